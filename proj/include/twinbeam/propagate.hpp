#ifndef TWINBEAM_PROPAGATE_HPP
#define TWINBEAM_PROPAGATE_HPP

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "twinbeam/field.hpp"
#include "twinbeam/gain.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/rng.hpp"

namespace twinbeam {

inline int envelopes_for(const CrystalParams& c) {
  return c.phase_match == PhaseMatch::type1_degenerate ? 1 : 2;
}

/// The lattice propagates in the frame comoving with the pump (t' = t - k_0' z,
/// y' = y + rho_0 z), which removes the common group delay and pump walk-off
/// from every detuning; otherwise the pulse would march out of the finite
/// window. Pair sums delta_1(q,O) + delta_2(-q,-O) are frame-invariant, so
/// gains and correlation observables are unchanged.
inline double comoving_detuning(const CrystalParams& c, int j, double qx, double qy, double omega) {
  return detuning(c, j, qx, qy, omega) - c.kp_0 * omega - c.rho_0 * qy;
}

/// Phase relating a lab-frame mode amplitude at depth z to the comoving one.
inline cplx comoving_frame_factor(const CrystalParams& c, double qx, double qy, double omega,
                                  double z) {
  (void)qx;
  return std::exp(cplx(0, -(c.kp_0 * omega + c.rho_0 * qy) * z));
}

/// Vacuum input in the Wigner representation: every real-space cell of every
/// envelope is an independent circular complex Gaussian with
/// <|a|^2> = 1/(2 dV), the discrete form of the (1/2) delta(x-x') delta(t-t')
/// symmetrized vacuum correlation.
inline FieldState sample_vacuum(const GridSpec& grid, const CrystalParams& crystal,
                                const TrajectorySeed& seed) {
  FieldState s = FieldState::zero(grid, envelopes_for(crystal));
  RandomStream rs = seed.stream();
  const double scale = std::sqrt(0.5 / grid.cell_volume());
  for (auto& env : s.envelopes)
    for (auto& a : env) a = scale * rs.gaussian_pair();
  return s;
}

/// Analytically propagated Gaussian pump: separable complex factors per axis.
/// A0(z,x,y,t) = A_p * gx(z,x) * gy(z,y) * gt(z,t), exact for the quadratic
/// dispersion of the pump detuning (diffraction, walk-off, group delay, GVD).
class PumpField {
 public:
  PumpField(const CrystalParams& c, const PumpParams& p, bool plane_wave)
      : c_(c), p_(p), plane_wave_(plane_wave) {}

  bool plane_wave() const { return plane_wave_; }
  double amplitude() const { return p_.amplitude; }

  /// Complex transverse factor at depth z, in the comoving frame (the rho_0
  /// drift is transformed away; diffraction spreading remains).
  cplx transverse_factor(double z, double x, bool walk_off_axis) const {
    (void)walk_off_axis;
    const double w2 = p_.w_0 * p_.w_0;
    const cplx denom = 1.0 + cplx(0, z * 2.0 / (c_.k_0 * w2));
    return std::exp(-(x * x) / (w2 * denom)) / std::sqrt(denom);
  }

  /// Temporal factor in the comoving frame (group delay removed, GVD kept).
  cplx temporal_factor(double z, double t) const {
    const double tau2 = p_.tau_0 * p_.tau_0;
    const cplx denom = 1.0 - cplx(0, z * 2.0 * c_.kpp_0 / tau2);
    return std::exp(-(t * t) / (tau2 * denom)) / std::sqrt(denom);
  }

  /// Materialized pump lattice at depth z (the closed form above).
  ComplexVec envelope(double z, const GridSpec& g) const {
    ComplexVec out(g.n_cells());
    const int ny = g.has_y() ? g.n_y : 1;
    const int nt = g.has_t() ? g.n_t : 1;
    std::vector<cplx> gx(g.n_x), gy(ny, cplx(1, 0)), gt(nt, cplx(1, 0));
    const bool x_is_walkoff = !g.has_y();  // 1-D transverse axis = walk-off axis
    for (int i = 0; i < g.n_x; ++i)
      gx[i] = plane_wave_ ? cplx(1, 0)
                          : transverse_factor(z, coord_at(i, g.n_x, g.dx()), x_is_walkoff);
    if (g.has_y() && !plane_wave_)
      for (int j = 0; j < ny; ++j) gy[j] = transverse_factor(z, coord_at(j, ny, g.dy()), true);
    if (g.has_t() && !plane_wave_)
      for (int k = 0; k < nt; ++k) gt[k] = temporal_factor(z, coord_at(k, nt, g.dt()));
    std::size_t n = 0;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < ny; ++j)
        for (int k = 0; k < nt; ++k) out[n++] = p_.amplitude * gx[i] * gy[j] * gt[k];
    return out;
  }

  const CrystalParams& crystal() const { return c_; }

 private:
  CrystalParams c_;
  PumpParams p_;
  bool plane_wave_;
};

/// Reference pump propagation: spectral multiplication of the z=0 lattice by
/// the comoving-frame e^{i delta_0(q,Omega) z}. Used to validate the closed
/// form.
inline ComplexVec pump_envelope_spectral(double z, const GridSpec& g, const CrystalParams& c,
                                         const PumpParams& p) {
  PumpField pf(c, p, false);
  ComplexVec lat = pf.envelope(0.0, g);
  FieldState tmp;
  tmp.grid = g;
  tmp.envelopes.push_back(std::move(lat));
  tmp.to_fourier();
  const int ny = tmp.ny(), nt = tmp.nt();
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nt; ++k) {
        double qx = 0, qy = 0, om = 0;
        if (g.has_y()) {
          qx = freq_at(i, g.n_x, g.l_x);
          qy = freq_at(j, ny, g.l_y);
        } else {
          qy = freq_at(i, g.n_x, g.l_x);
        }
        if (g.has_t()) om = omega_at(k, nt, g.t_win);
        double d0 = comoving_detuning(c, 0, qx, qy, om);
        tmp.envelopes[0][tmp.idx(i, j, k)] *= std::exp(cplx(0, d0 * z));
      }
  tmp.to_real();
  return std::move(tmp.envelopes[0]);
}

struct StepScheme {
  bool pump_plane_wave = false;  // substitute the constant A_p for the pump
  bool nan_check = true;
  double overflow_limit = 1e120;  // per-cell |a|^2 abort threshold
};

namespace detail {

/// cosh(r) and sinh(r)/r from r^2; exact to double precision for the small
/// per-step arguments, falling back to the library functions otherwise.
inline void cosh_sinhc_small(double r2, double& c, double& s) {
  if (r2 < 1.6e-3) {
    c = 1.0 + r2 * (0.5 + r2 * (1.0 / 24.0 + r2 / 720.0));
    s = 1.0 + r2 * (1.0 / 6.0 + r2 * (1.0 / 120.0 + r2 / 5040.0));
  } else {
    double r = std::sqrt(r2);
    c = std::cosh(r);
    s = std::sinh(r) / r;
  }
}

/// Linear-step multiplier tables e^{i delta_j(q,Omega) dz} for one envelope,
/// with the inverse-FFT 1/N normalization folded in.
inline ComplexVec linear_multiplier(const GridSpec& g, const CrystalParams& c, int envelope_j,
                                    double dz) {
  ComplexVec mul(g.n_cells());
  const int ny = g.has_y() ? g.n_y : 1;
  const int nt = g.has_t() ? g.n_t : 1;
  const double inv_n = 1.0 / static_cast<double>(g.n_cells());
  std::size_t n = 0;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nt; ++k) {
        double qx = 0, qy = 0, om = 0;
        if (g.has_y()) {
          qx = freq_at(i, g.n_x, g.l_x);
          qy = freq_at(j, ny, g.l_y);
        } else {
          qy = freq_at(i, g.n_x, g.l_x);
        }
        if (g.has_t()) om = omega_at(k, nt, g.t_win);
        mul[n++] = std::exp(cplx(0, comoving_detuning(c, envelope_j, qx, qy, om) * dz)) * inv_n;
      }
  return mul;
}

}  // namespace detail

/// Precomputed per-grid propagation tables, shared read-only by all
/// trajectory workers.
struct PropagationPlan {
  GridSpec grid;
  CrystalParams crystal;
  std::vector<ComplexVec> half_mul;  // per envelope, e^{i delta dz/2}/N
  std::vector<ComplexVec> full_mul;  // per envelope, e^{i delta dz}/N

  PropagationPlan(const GridSpec& g, const CrystalParams& c) : grid(g), crystal(c) {
    const double dz = g.dz(c);
    const int ne = envelopes_for(c);
    for (int e = 0; e < ne; ++e) {
      int j = (e == 0) ? 1 : 2;
      half_mul.push_back(detail::linear_multiplier(g, c, j, 0.5 * dz));
      full_mul.push_back(detail::linear_multiplier(g, c, j, dz));
    }
  }
};

/// Symmetric split-step propagation of the state from z = 0 to z = l_c.
/// Linear half-steps are exact Fourier multipliers; the nonlinear step solves
/// the parametric cell coupling da1 = sigma A0 e^{-i Delta_0 z} a2* dz exactly
/// as a hyperbolic rotation with the midpoint pump value, which conserves
/// |a1|^2 - |a2|^2 per cell to roundoff.
inline void propagate_in_place(FieldState& state, const PropagationPlan& plan,
                               const PumpField& pump, const StepScheme& scheme = {}) {
  const GridSpec& g = state.grid;
  const CrystalParams& c = plan.crystal;
  if (state.domain != FieldDomain::real_space) throw ConfigError("propagate: state must be in real space");
  if (state.n_env() != envelopes_for(c)) throw ConfigError("propagate: envelope count mismatch");

  const double dz = g.dz(c);
  const int ny = state.ny(), nt = state.nt();
  const unsigned axes = axis_x | (g.has_y() ? axis_y : 0u) | (g.has_t() ? axis_t : 0u);
  auto& fft = FftEngine::instance();

  auto linear = [&](const std::vector<ComplexVec>& mul) {
    for (int e = 0; e < state.n_env(); ++e) {
      cplx* a = state.envelopes[e].data();
      fft.transform(a, g.n_x, ny, nt, axes, FFTW_FORWARD);
      const cplx* m = mul[e].data();
      const std::size_t n = state.envelopes[e].size();
      for (std::size_t i = 0; i < n; ++i) a[i] *= m[i];
      fft.transform(a, g.n_x, ny, nt, axes, FFTW_BACKWARD);
    }
  };

  std::vector<cplx> gx(g.n_x), gy(ny, cplx(1, 0)), gt(nt, cplx(1, 0));
  const bool two_env = state.n_env() == 2;
  const bool x_is_walkoff = !g.has_y();

  auto nonlinear = [&](double z_mid) {
    const cplx mismatch = std::exp(cplx(0, -c.delta_0 * z_mid));
    const cplx base = c.sigma * pump.amplitude() * mismatch * dz;  // c dz at unit profile
    if (!pump.plane_wave()) {
      for (int i = 0; i < g.n_x; ++i)
        gx[i] = pump.transverse_factor(z_mid, coord_at(i, g.n_x, g.dx()), x_is_walkoff);
      if (g.has_y())
        for (int j = 0; j < ny; ++j)
          gy[j] = pump.transverse_factor(z_mid, coord_at(j, ny, g.dy()), true);
      if (g.has_t())
        for (int k = 0; k < nt; ++k) gt[k] = pump.temporal_factor(z_mid, coord_at(k, nt, g.dt()));
    } else {
      std::fill(gx.begin(), gx.end(), cplx(1, 0));
      std::fill(gy.begin(), gy.end(), cplx(1, 0));
      std::fill(gt.begin(), gt.end(), cplx(1, 0));
    }
    cplx* a1 = state.envelopes[0].data();
    cplx* a2 = two_env ? state.envelopes[1].data() : nullptr;
    std::size_t n = 0;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < ny; ++j) {
        const cplx gxy = gx[i] * gy[j];
        for (int k = 0; k < nt; ++k, ++n) {
          const cplx cd = base * gxy * gt[k];  // c * dz for this cell
          double C, S;
          detail::cosh_sinhc_small(std::norm(cd), C, S);
          const cplx cs = cd * S;
          if (two_env) {
            const cplx b1 = C * a1[n] + cs * std::conj(a2[n]);
            const cplx b2 = C * a2[n] + cs * std::conj(a1[n]);
            a1[n] = b1;
            a2[n] = b2;
          } else {
            a1[n] = C * a1[n] + cs * std::conj(a1[n]);
          }
        }
      }
  };

  auto check = [&](int step) {
    double peak = 0;
    for (const auto& env : state.envelopes)
      for (const auto& a : env) peak = std::max(peak, std::norm(a));
    if (!std::isfinite(peak) || peak > scheme.overflow_limit) {
      std::ostringstream os;
      os << "propagate: field overflow/NaN at step " << step << " (z = " << (step + 1) * dz
         << " m, peak |a|^2 = " << peak << "); gain too high for this grid";
      throw NumericalError(os.str());
    }
  };

  // L(dz/2) [N(dz) L(dz)]^{n_z - 1} N(dz) L(dz/2)
  linear(plan.half_mul);
  for (int m = 0; m < g.n_z; ++m) {
    nonlinear((m + 0.5) * dz);
    if (m + 1 < g.n_z)
      linear(plan.full_mul);
    else
      linear(plan.half_mul);
    if (scheme.nan_check) check(m);
  }
  state.plane_z = c.l_c;
}

/// Per-worker partial reduction over trajectories. Implementations accumulate
/// in trajectory order within a worker block; blocks are merged in order, so
/// results are bitwise reproducible for a fixed configuration.
class TrajectorySink {
 public:
  virtual ~TrajectorySink() = default;
  virtual void consume(std::uint64_t trajectory_index, const FieldState& exit_state) = 0;
  virtual void merge_from(TrajectorySink& other) = 0;
};

using SinkFactory = std::function<std::unique_ptr<TrajectorySink>()>;

struct EnsembleOptions {
  std::uint64_t n_traj = 1;
  std::uint64_t master_seed = 0;
  int workers = 0;  // 0 = hardware concurrency
  StepScheme scheme;
  bool allow_partial = false;  // salvage an ensemble with failed trajectories
};

struct TrajectoryFailure {
  std::uint64_t index;
  std::string message;
};

struct EnsembleReport {
  std::uint64_t completed = 0;
  std::vector<TrajectoryFailure> failures;
};

/// Run n_traj independent trajectories (sample -> propagate -> sinks).
/// Returns one merged sink per factory plus a failure report.
inline EnsembleReport run_ensemble(const CrystalParams& crystal, const PumpParams& pump_params,
                                   const GridSpec& grid, const EnsembleOptions& opt,
                                   const std::vector<SinkFactory>& factories,
                                   std::vector<std::unique_ptr<TrajectorySink>>& merged) {
  PropagationPlan plan(grid, crystal);
  PumpField pump(crystal, pump_params, opt.scheme.pump_plane_wave);

  int workers = opt.workers > 0 ? opt.workers : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (static_cast<std::uint64_t>(workers) > opt.n_traj) workers = static_cast<int>(opt.n_traj);

  std::vector<std::vector<std::unique_ptr<TrajectorySink>>> partials(workers);
  for (int w = 0; w < workers; ++w)
    for (const auto& f : factories) partials[w].push_back(f());

  std::vector<std::vector<TrajectoryFailure>> fails(workers);
  std::vector<std::uint64_t> done(workers, 0);

  auto work = [&](int w) {
    const std::uint64_t lo = opt.n_traj * w / workers;
    const std::uint64_t hi = opt.n_traj * (w + 1) / workers;
    for (std::uint64_t t = lo; t < hi; ++t) {
      try {
        FieldState s = sample_vacuum(grid, crystal, TrajectorySeed{opt.master_seed, t});
        propagate_in_place(s, plan, pump, opt.scheme);
        for (auto& sink : partials[w]) sink->consume(t, s);
        ++done[w];
      } catch (const std::exception& e) {
        fails[w].push_back({t, e.what()});
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }

  EnsembleReport report;
  for (int w = 0; w < workers; ++w) {
    report.completed += done[w];
    report.failures.insert(report.failures.end(), fails[w].begin(), fails[w].end());
  }
  if (!report.failures.empty() && !opt.allow_partial) {
    std::ostringstream os;
    os << report.failures.size() << " trajectory failure(s); first: index "
       << report.failures.front().index << ": " << report.failures.front().message;
    throw NumericalError(os.str());
  }

  merged.clear();
  for (std::size_t i = 0; i < factories.size(); ++i) {
    merged.push_back(std::move(partials[0][i]));
    for (int w = 1; w < workers; ++w) merged[i]->merge_from(*partials[w][i]);
  }
  return report;
}

}  // namespace twinbeam

#endif  // TWINBEAM_PROPAGATE_HPP
