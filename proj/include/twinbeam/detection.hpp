#ifndef TWINBEAM_DETECTION_HPP
#define TWINBEAM_DETECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "twinbeam/field.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/propagate.hpp"

namespace twinbeam {

enum class DetectorPlane { near_field, far_field };

inline std::string to_string(DetectorPlane p) {
  return p == DetectorPlane::near_field ? "near" : "far";
}

/// Square (1-D: segment) pixel pair geometry and detection parameters.
struct DetectorSpec {
  DetectorPlane plane = DetectorPlane::far_field;
  double d = 0;                    // pixel size (m)
  double center_1 = 0, center_2 = 0;  // pixel centers in the detection plane (m)
  double t_d = 0;                  // detection time window (s)
  double eta = 1.0;                // quantum efficiency
  bool symmetric = false;          // far field: R2 is the point reflection of R1
  double omega_filter = 0;         // hard frequency cutoff (rad/s); 0 = none

  std::vector<std::string> violations(const GridSpec& g) const {
    std::vector<std::string> v;
    if (!(d > 0)) v.push_back("detector: pixel size d must be > 0");
    if (g.has_t() && !(t_d > 0 && t_d <= g.t_win))
      v.push_back("detector: time window t_d must lie in (0, t_win]");
    if (!(eta >= 0 && eta <= 1)) v.push_back("detector: efficiency must be in [0, 1]");
    if (omega_filter > 0 && g.has_t()) {
      if (t_d < g.t_win)
        v.push_back("detector: frequency filter requires t_d = t_win (counting in the Omega basis)");
      if (omega_filter >= pi / g.dt())
        v.push_back("detector: omega_filter must lie inside the temporal Nyquist band");
    }
    return v;
  }
};

/// Cell-index window of one pixel on the lattice of `grid`.
struct PixelWindow {
  std::vector<int> x_cells;
  std::size_t modes_per_cell = 1;  // time/frequency cells per transverse cell
  double effective_d = 0;          // n_cells * dx actually covered
};

namespace detail {

inline std::vector<int> window_cells(const GridSpec& g, double center, double d) {
  std::vector<int> cells;
  const double dx = g.dx();
  for (int i = 0; i < g.n_x; ++i) {
    double x = coord_at(i, g.n_x, dx);
    if (x >= center - 0.5 * d - 1e-12 * dx && x < center + 0.5 * d - 1e-12 * dx) cells.push_back(i);
  }
  return cells;
}

inline std::vector<int> reflect_cells(const GridSpec& g, const std::vector<int>& cells) {
  std::vector<int> out;
  out.reserve(cells.size());
  for (int i : cells) {
    if (i == 0) throw ConfigError("detector: symmetric window touches the lattice edge cell");
    out.push_back(g.n_x - i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Resolve the two pixel windows for a detector on a given grid. For the
/// symmetric far-field mode R2 is the exact point reflection of R1.
struct DetectorWindows {
  PixelWindow r1, r2;
  std::vector<int> t_cells;   // time cells inside t_d (or Omega cells inside the filter)
  bool frequency_basis = false;
};

inline DetectorWindows resolve_windows(const DetectorSpec& det, const GridSpec& g) {
  if (g.has_y()) throw ConfigError("detector: 2-D transverse windows not wired up; use x_t grids");
  DetectorWindows w;
  w.r1.x_cells = detail::window_cells(g, det.center_1, det.d);
  if (w.r1.x_cells.empty()) throw ConfigError("detector: pixel R1 covers no lattice cell (d below grid resolution or outside window)");
  if (det.d < g.dx()) throw ConfigError("detector: pixel size below the grid cell");
  if (det.symmetric) {
    w.r2.x_cells = detail::reflect_cells(g, w.r1.x_cells);
  } else {
    w.r2.x_cells = detail::window_cells(g, det.center_2, det.d);
    if (w.r2.x_cells.empty()) throw ConfigError("detector: pixel R2 covers no lattice cell");
  }
  w.r1.effective_d = w.r1.x_cells.size() * g.dx();
  w.r2.effective_d = w.r2.x_cells.size() * g.dx();

  if (g.has_t()) {
    if (det.omega_filter > 0) {
      w.frequency_basis = true;
      for (int k = 0; k < g.n_t; ++k)
        if (std::abs(omega_at(k, g.n_t, g.t_win)) <= det.omega_filter) w.t_cells.push_back(k);
    } else {
      for (int k = 0; k < g.n_t; ++k)
        if (std::abs(coord_at(k, g.n_t, g.dt())) <= 0.5 * det.t_d) w.t_cells.push_back(k);
    }
    if (w.t_cells.empty()) throw ConfigError("detector: empty time/frequency window");
  } else {
    w.t_cells.push_back(0);
  }
  w.r1.modes_per_cell = w.r2.modes_per_cell = w.t_cells.size();
  return w;
}

/// Per-transverse-cell raw Wigner counts: sum over the detection time window
/// (or the filtered frequency band) of |a|^2 * cell volume. One entry per
/// x cell; each counts modes_per_cell lattice modes.
inline std::vector<double> counts_by_cell(const FieldState& state, int env,
                                          const DetectorWindows& w) {
  const GridSpec& g = state.grid;
  std::vector<double> out(g.n_x, 0.0);
  const int nt = state.nt();
  if (!w.frequency_basis) {
    const double dv = g.cell_volume();
    for (int i = 0; i < g.n_x; ++i) {
      double s = 0;
      const cplx* a = state.envelopes[env].data() + state.idx(i, 0, 0);
      for (int k : w.t_cells) s += std::norm(a[k]);
      out[i] = s * dv;
    }
  } else {
    // Transform the time axis only; count |a(x,Omega)|^2 dx dOmega over the
    // filtered band (a unitary mode basis, so ordering corrections carry over).
    FieldState tmp = state;
    auto& fft = FftEngine::instance();
    fft.transform(tmp.envelopes[env].data(), g.n_x, tmp.ny(), nt, axis_t, FFTW_FORWARD);
    const double ct = g.dt() / std::sqrt(two_pi);
    const double dv = g.dx() * g.domega() * ct * ct;
    for (int i = 0; i < g.n_x; ++i) {
      double s = 0;
      const cplx* a = tmp.envelopes[env].data() + tmp.idx(i, 0, 0);
      for (int k : w.t_cells) s += std::norm(a[k]);
      out[i] = s * dv;
    }
  }
  return out;
}

struct CountSample {
  double n1_w = 0, n2_w = 0;     // raw Wigner counts
  std::size_t m1 = 0, m2 = 0;    // lattice modes per detector
};

/// Raw Wigner photon counts over the two detection windows. For two-envelope
/// states detector j reads envelope j; degenerate type I reads the single
/// envelope at both windows.
inline CountSample count_photons(const FieldState& state, const DetectorSpec& det,
                                 const DetectorWindows& w) {
  const int env2 = state.n_env() == 2 ? 1 : 0;
  std::vector<double> c1 = counts_by_cell(state, 0, w);
  std::vector<double> c2 = (env2 == 0) ? c1 : counts_by_cell(state, env2, w);
  CountSample s;
  for (int i : w.r1.x_cells) s.n1_w += c1[i];
  for (int i : w.r2.x_cells) s.n2_w += c2[i];
  s.m1 = w.r1.x_cells.size() * w.r1.modes_per_cell;
  s.m2 = w.r2.x_cells.size() * w.r2.modes_per_cell;
  (void)det;
  return s;
}

/// Streaming first/second moments of the detector count pair, with the
/// per-trajectory samples retained for jackknife resampling. merge() uses the
/// pairwise update so that merged and single-pass accumulators agree to
/// roundoff.
struct StatsAccumulator {
  std::size_t n = 0;
  double mean1 = 0, mean2 = 0;
  double m2_1 = 0, m2_2 = 0, m2_c = 0;  // central co-moments
  std::size_t modes1 = 0, modes2 = 0;
  bool keep_samples = true;
  std::vector<double> s1, s2;

  void add(double n1, double n2) {
    ++n;
    double d1 = n1 - mean1, d2 = n2 - mean2;
    mean1 += d1 / n;
    mean2 += d2 / n;
    m2_1 += d1 * (n1 - mean1);
    m2_2 += d2 * (n2 - mean2);
    m2_c += d1 * (n2 - mean2);
    if (keep_samples) {
      s1.push_back(n1);
      s2.push_back(n2);
    }
  }

  void merge(const StatsAccumulator& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double d1 = o.mean1 - mean1, d2 = o.mean2 - mean2;
    const double nt = na + nb;
    m2_1 += o.m2_1 + d1 * d1 * na * nb / nt;
    m2_2 += o.m2_2 + d2 * d2 * na * nb / nt;
    m2_c += o.m2_c + d1 * d2 * na * nb / nt;
    mean1 += d1 * nb / nt;
    mean2 += d2 * nb / nt;
    n += o.n;
    if (keep_samples) {
      s1.insert(s1.end(), o.s1.begin(), o.s1.end());
      s2.insert(s2.end(), o.s2.begin(), o.s2.end());
    }
  }
};

/// Ordering-corrected photon statistics with jackknife standard errors.
struct Measurement {
  double n1 = 0, n2 = 0, n_plus = 0;  // corrected mean photon numbers
  double var_minus = 0;               // corrected Var(N1 - N2)
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double se_n1 = 0, se_n2 = 0, se_n_plus = 0, se_var_minus = 0;
  double se_ratio = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_traj = 0, modes1 = 0, modes2 = 0;
  bool ratio_defined = false;  // false when the shot term is consistent with zero
  bool jackknife_ok = false;   // n_traj >= 10 and samples retained
};

/// Wigner -> normal-ordering corrections: each lattice mode contributes 1/2
/// to a mean count and 1/4 to a count variance. Corrected means subtract
/// M/2; the corrected variance of N- subtracts (M1+M2)/4 (cross-covariances
/// of distinct modes need no correction). Calibrated against the two-mode
/// squeezed-state oracle in the tests.
inline Measurement ordering_correct(const StatsAccumulator& acc) {
  if (acc.n < 2) throw ConfigError("ordering_correct: need at least 2 trajectories");
  Measurement m;
  m.n_traj = acc.n;
  m.modes1 = acc.modes1;
  m.modes2 = acc.modes2;
  const double c1 = 0.5 * acc.modes1, c2 = 0.5 * acc.modes2;
  const double cvar = 0.25 * (acc.modes1 + acc.modes2);
  const double n = static_cast<double>(acc.n);
  m.n1 = acc.mean1 - c1;
  m.n2 = acc.mean2 - c2;
  m.n_plus = m.n1 + m.n2;
  const double var_w = (acc.m2_1 + acc.m2_2 - 2.0 * acc.m2_c) / (n - 1.0);
  m.var_minus = var_w - cvar;

  m.jackknife_ok = acc.keep_samples && acc.n >= 10;
  if (m.jackknife_ok) {
    // Delete-one recomputation from totals; O(n).
    const std::size_t N = acc.n;
    double sx = 0, sy = 0, sd = 0, sd2 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      sx += acc.s1[i];
      sy += acc.s2[i];
      double d = acc.s1[i] - acc.s2[i];
      sd += d;
      sd2 += d * d;
    }
    std::vector<double> j_n1(N), j_n2(N), j_var(N), j_ratio(N);
    for (std::size_t i = 0; i < N; ++i) {
      const double nn = static_cast<double>(N - 1);
      const double d = acc.s1[i] - acc.s2[i];
      const double mean_d = (sd - d) / nn;
      const double var = ((sd2 - d * d) - nn * mean_d * mean_d) / (nn - 1.0) - cvar;
      j_n1[i] = (sx - acc.s1[i]) / nn - c1;
      j_n2[i] = (sy - acc.s2[i]) / nn - c2;
      const double shot = j_n1[i] + j_n2[i];
      j_var[i] = var;
      j_ratio[i] = var / shot;
    }
    auto jack_se = [N](const std::vector<double>& v) {
      double mean = 0;
      for (double x : v) mean += x;
      mean /= N;
      double s = 0;
      for (double x : v) s += (x - mean) * (x - mean);
      return std::sqrt(s * (N - 1.0) / N);
    };
    m.se_n1 = jack_se(j_n1);
    m.se_n2 = jack_se(j_n2);
    m.se_var_minus = jack_se(j_var);
    std::vector<double> j_np(N);
    for (std::size_t i = 0; i < N; ++i) j_np[i] = j_n1[i] + j_n2[i];
    m.se_n_plus = jack_se(j_np);
    m.ratio_defined = m.n_plus > 5.0 * m.se_n_plus && m.n_plus > 0;
    if (m.ratio_defined) {
      m.ratio = m.var_minus / m.n_plus;
      m.se_ratio = jack_se(j_ratio);
    }
  } else {
    // Moment-based errors only.
    m.se_n1 = std::sqrt(acc.m2_1 / (n - 1.0) / n);
    m.se_n2 = std::sqrt(acc.m2_2 / (n - 1.0) / n);
    m.se_n_plus = std::sqrt((acc.m2_1 + acc.m2_2 + 2.0 * acc.m2_c) / (n - 1.0) / n);
    m.se_var_minus = var_w * std::sqrt(2.0 / (n - 1.0));
    m.ratio_defined = m.n_plus > 5.0 * m.se_n_plus && m.n_plus > 0;
    if (m.ratio_defined) {
      m.ratio = m.var_minus / m.n_plus;
      m.se_ratio = std::abs(m.ratio) * std::sqrt(2.0 / (n - 1.0)) + m.se_n_plus / m.n_plus;
    }
  }
  return m;
}

/// Detection losses as Bernoulli thinning of the counts, applied to the
/// moments: means scale by eta, Var(N-) -> eta^2 Var + eta(1-eta) <N+>.
/// A perfectly correlated input (Var = 0) therefore detects at
/// ratio = 1 - eta.
inline Measurement apply_efficiency(const Measurement& in, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("apply_efficiency: eta must be in [0, 1]");
  Measurement m = in;
  m.n1 = eta * in.n1;
  m.n2 = eta * in.n2;
  m.n_plus = eta * in.n_plus;
  m.var_minus = eta * eta * in.var_minus + eta * (1.0 - eta) * in.n_plus;
  m.se_n1 = eta * in.se_n1;
  m.se_n2 = eta * in.se_n2;
  m.se_n_plus = eta * in.se_n_plus;
  m.se_var_minus = eta * eta * in.se_var_minus + eta * (1.0 - eta) * in.se_n_plus;
  if (eta == 0.0) {
    m.ratio_defined = false;
    m.ratio = std::numeric_limits<double>::quiet_NaN();
    m.se_ratio = std::numeric_limits<double>::quiet_NaN();
  } else if (in.ratio_defined) {
    // ratio' = eta * ratio + (1 - eta), exactly affine.
    m.ratio = eta * in.ratio + (1.0 - eta);
    m.se_ratio = eta * in.se_ratio;
  }
  return m;
}

}  // namespace twinbeam

#endif  // TWINBEAM_DETECTION_HPP
