#ifndef TWINBEAM_SINKS_HPP
#define TWINBEAM_SINKS_HPP

#include <memory>
#include <utility>
#include <vector>

#include "twinbeam/detection.hpp"
#include "twinbeam/optics.hpp"
#include "twinbeam/propagate.hpp"
#include "twinbeam/pwpa.hpp"

namespace twinbeam {

/// Grid of the detection plane a path produces from a crystal-exit grid.
inline GridSpec detection_grid(const GridSpec& g, const OpticalPath& path, const CrystalParams& c) {
  GridSpec out = g;
  if (path.kind == OpticsKind::far_field_f_f) {
    const double scale = c.lambda_1 * path.f / two_pi;
    out.l_x = g.n_x * scale * (two_pi / g.l_x);
    if (g.has_y()) out.l_y = g.n_y * scale * (two_pi / g.l_y);
  }
  return out;
}

/// Per-trajectory statistics on one detection plane: optics, per-cell count
/// vectors, mean/variance per cell, windowed pixel-pair accumulators for a
/// detector-size scan, and an optional correlation-map row against a fixed
/// cell. All reductions are plain ordered sums, so block merges reproduce a
/// single pass to roundoff.
class PlaneStatsSink : public TrajectorySink {
 public:
  struct Options {
    OpticalPath path;
    DetectorSpec detector;
    std::vector<double> d_list;  // detector sizes for the scan ([] = just detector.d)
    bool accumulate_map = false;
    double map_fix_x = 0;  // coordinate of the fixed map pixel
    bool keep_samples = true;
  };

  PlaneStatsSink(const CrystalParams& crystal, const GridSpec& exit_grid, Options opt)
      : crystal_(crystal), opt_(std::move(opt)) {
    plane_grid_ = detection_grid(exit_grid, opt_.path, crystal_);
    if (opt_.d_list.empty()) opt_.d_list.push_back(opt_.detector.d);
    for (double d : opt_.d_list) {
      DetectorSpec det = opt_.detector;
      det.d = d;
      windows_.push_back(resolve_windows(det, plane_grid_));
      StatsAccumulator acc;
      acc.keep_samples = opt_.keep_samples;
      acc.modes1 = windows_.back().r1.x_cells.size() * windows_.back().r1.modes_per_cell;
      acc.modes2 = windows_.back().r2.x_cells.size() * windows_.back().r2.modes_per_cell;
      accs_.push_back(std::move(acc));
    }
    const int nx = plane_grid_.n_x;
    sum_c1_.assign(nx, 0.0);
    sum_c1_sq_.assign(nx, 0.0);
    if (opt_.accumulate_map) {
      map_fix_cell_ = nearest_cell(plane_grid_, opt_.map_fix_x);
      sum_c1_fix_.assign(nx, 0.0);
    }
  }

  static int nearest_cell(const GridSpec& g, double x) {
    int i = static_cast<int>(std::lround(x / g.dx())) + g.n_x / 2;
    if (i < 0 || i >= g.n_x) throw ConfigError("map pixel outside the lattice window");
    return i;
  }

  void consume(std::uint64_t, const FieldState& exit_state) override {
    FieldState arm1, arm2;
    bool two_arms = false;
    switch (opt_.path.kind) {
      case OpticsKind::far_field_f_f:
        arm1 = to_far_field(exit_state, opt_.path, crystal_);
        break;
      case OpticsKind::near_field_2f2f: {
        NearFieldArms arms = image_near_field(exit_state, opt_.path, crystal_);
        arm1 = std::move(arms.signal);
        arm2 = std::move(arms.idler);
        two_arms = true;
        break;
      }
      default:
        arm1 = exit_state;
        if (opt_.path.kind == OpticsKind::free_space)
          free_space_propagate(arm1, opt_.path.free_length, crystal_);
        break;
    }

    const DetectorWindows& w0 = windows_.front();
    std::vector<double> c1 = counts_by_cell(arm1, 0, w0);
    std::vector<double> c2;
    if (two_arms)
      c2 = counts_by_cell(arm2, 0, w0);
    else if (arm1.n_env() == 2)
      c2 = counts_by_cell(arm1, 1, w0);
    const std::vector<double>& cc2 = c2.empty() ? c1 : c2;

    for (std::size_t k = 0; k < windows_.size(); ++k) {
      double n1 = 0, n2 = 0;
      for (int i : windows_[k].r1.x_cells) n1 += c1[i];
      for (int i : windows_[k].r2.x_cells) n2 += cc2[i];
      accs_[k].add(n1, n2);
    }
    const int nx = plane_grid_.n_x;
    for (int i = 0; i < nx; ++i) {
      sum_c1_[i] += c1[i];
      sum_c1_sq_[i] += c1[i] * c1[i];
    }
    if (opt_.accumulate_map) {
      const double fix = c1[map_fix_cell_];
      for (int i = 0; i < nx; ++i) sum_c1_fix_[i] += c1[i] * fix;
    }
    ++n_;
  }

  void merge_from(TrajectorySink& other) override {
    auto& o = dynamic_cast<PlaneStatsSink&>(other);
    for (std::size_t k = 0; k < accs_.size(); ++k) accs_[k].merge(o.accs_[k]);
    for (std::size_t i = 0; i < sum_c1_.size(); ++i) {
      sum_c1_[i] += o.sum_c1_[i];
      sum_c1_sq_[i] += o.sum_c1_sq_[i];
      if (opt_.accumulate_map) sum_c1_fix_[i] += o.sum_c1_fix_[i];
    }
    n_ += o.n_;
  }

  const GridSpec& plane_grid() const { return plane_grid_; }
  const std::vector<DetectorWindows>& windows() const { return windows_; }
  const std::vector<StatsAccumulator>& accumulators() const { return accs_; }
  std::size_t n_traj() const { return n_; }
  int map_fix_cell() const { return map_fix_cell_; }

  /// Per-cell mean Wigner counts with the vacuum half subtracted:
  /// the measured spectrum/beam profile in photons per cell.
  std::vector<double> mean_counts_corrected() const {
    std::vector<double> out(sum_c1_.size());
    const double half = 0.5 * windows_.front().r1.modes_per_cell;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sum_c1_[i] / n_ - half;
    return out;
  }

  struct MapPoint {
    double x = 0;
    double g = 0;   // normally ordered <:dN(x) dN(x'):>
    double se = 0;  // Gaussian-approximation standard error
  };

  /// Correlation-map row against the fixed pixel, with per-cell ordering
  /// corrections applied on the diagonal.
  std::vector<MapPoint> correlation_map() const {
    if (!opt_.accumulate_map) throw ConfigError("correlation map was not accumulated");
    const int nx = plane_grid_.n_x;
    const double n = static_cast<double>(n_);
    const double mpc = static_cast<double>(windows_.front().r1.modes_per_cell);
    std::vector<MapPoint> out(nx);
    const double mean_fix = sum_c1_[map_fix_cell_] / n;
    const double var_fix = sum_c1_sq_[map_fix_cell_] / n - mean_fix * mean_fix;
    for (int i = 0; i < nx; ++i) {
      const double mean_i = sum_c1_[i] / n;
      const double var_i = sum_c1_sq_[i] / n - mean_i * mean_i;
      double g;
      if (i == map_fix_cell_) {
        // <:(dN)^2:> = Var_W - M/4 - (<N_W> - M/2)
        g = var_i - 0.25 * mpc - (mean_i - 0.5 * mpc);
      } else {
        g = sum_c1_fix_[i] / n - mean_i * mean_fix;
      }
      out[i].x = coord_at(i, nx, plane_grid_.dx());
      out[i].g = g;
      out[i].se = std::sqrt(std::max(0.0, (var_i * var_fix + g * g) / n));
    }
    return out;
  }

 private:
  CrystalParams crystal_;
  Options opt_;
  GridSpec plane_grid_;
  std::vector<DetectorWindows> windows_;
  std::vector<StatsAccumulator> accs_;
  std::vector<double> sum_c1_, sum_c1_sq_, sum_c1_fix_;
  int map_fix_cell_ = -1;
  std::size_t n_ = 0;
};

/// Second- and fourth-order field moments on a small (x, t) cell patch of the
/// crystal-exit state, for checking the Gaussian moment factorization of the
/// count covariances.
class MomentPatchSink : public TrajectorySink {
 public:
  MomentPatchSink(const GridSpec& g, int patch_nx, int patch_nt)
      : grid_(g), nx_(patch_nx), nt_(patch_nt) {
    x0_ = g.n_x / 2 - nx_ / 2;
    t0_ = (g.has_t() ? g.n_t : 1) / 2 - nt_ / 2;
    const int m = nx_ * nt_;
    sum_a_.assign(m, cplx(0, 0));
    sum_n_.assign(m, 0.0);
    sum_aa_.assign(static_cast<std::size_t>(m) * m, cplx(0, 0));
    sum_ac_.assign(static_cast<std::size_t>(m) * m, cplx(0, 0));
    sum_nn_.assign(static_cast<std::size_t>(m) * m, 0.0);
  }

  void consume(std::uint64_t, const FieldState& s) override {
    const int m = nx_ * nt_;
    std::vector<cplx> a(m);
    std::vector<double> nw(m);
    const double dv = s.grid.cell_volume();
    const double root_dv = std::sqrt(dv);
    for (int i = 0; i < nx_; ++i)
      for (int k = 0; k < nt_; ++k) {
        const cplx v = s.envelopes[0][s.idx(x0_ + i, 0, t0_ + k)] * root_dv;  // mode units
        a[i * nt_ + k] = v;
        nw[i * nt_ + k] = std::norm(v);
      }
    for (int i = 0; i < m; ++i) {
      sum_a_[i] += a[i];
      sum_n_[i] += nw[i];
      for (int j = 0; j < m; ++j) {
        sum_aa_[static_cast<std::size_t>(i) * m + j] += a[i] * a[j];
        sum_ac_[static_cast<std::size_t>(i) * m + j] += a[i] * std::conj(a[j]);
        sum_nn_[static_cast<std::size_t>(i) * m + j] += nw[i] * nw[j];
      }
    }
    ++n_;
  }

  void merge_from(TrajectorySink& other) override {
    auto& o = dynamic_cast<MomentPatchSink&>(other);
    for (std::size_t i = 0; i < sum_a_.size(); ++i) {
      sum_a_[i] += o.sum_a_[i];
      sum_n_[i] += o.sum_n_[i];
    }
    for (std::size_t i = 0; i < sum_aa_.size(); ++i) {
      sum_aa_[i] += o.sum_aa_[i];
      sum_ac_[i] += o.sum_ac_[i];
      sum_nn_[i] += o.sum_nn_[i];
    }
    n_ += o.n_;
  }

  int patch_modes() const { return nx_ * nt_; }
  std::size_t n_traj() const { return n_; }

  /// Empirical Cov(n_i, n_j) of the Wigner cell counts.
  double count_cov(int i, int j) const {
    const int m = nx_ * nt_;
    const double n = static_cast<double>(n_);
    return sum_nn_[static_cast<std::size_t>(i) * m + j] / n - (sum_n_[i] / n) * (sum_n_[j] / n);
  }

  /// Gaussian-moment prediction |<a_i a_j*>|^2 + |<a_i a_j>|^2.
  double gaussian_prediction(int i, int j) const {
    const int m = nx_ * nt_;
    const double n = static_cast<double>(n_);
    const cplx ac = sum_ac_[static_cast<std::size_t>(i) * m + j] / n;
    const cplx aa = sum_aa_[static_cast<std::size_t>(i) * m + j] / n;
    return std::norm(ac) + std::norm(aa);
  }

  double mean_count(int i) const { return sum_n_[i] / static_cast<double>(n_); }

 private:
  GridSpec grid_;
  int nx_, nt_, x0_, t0_;
  std::vector<cplx> sum_a_, sum_aa_, sum_ac_;
  std::vector<double> sum_n_, sum_nn_;
  std::size_t n_ = 0;
};

}  // namespace twinbeam

#endif  // TWINBEAM_SINKS_HPP
