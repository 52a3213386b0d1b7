#ifndef TWINBEAM_GAIN_HPP
#define TWINBEAM_GAIN_HPP

#include <cmath>

#include "twinbeam/core.hpp"
#include "twinbeam/model.hpp"

namespace twinbeam {

/// cosh(G z) and sinh(G z)/G evaluated from G^2, continuing analytically to
/// the oscillatory branch G^2 < 0 (cos, sinc). The series window avoids the
/// 0/0 cancellation at the gain/oscillation boundary.
inline void gamma_cosh_sinhc(double gamma2, double z, double& c, double& s) {
  double w = gamma2 * z * z;
  if (std::abs(w) < 1e-6) {
    c = 1.0 + w / 2.0 + w * w / 24.0;
    s = z * (1.0 + w / 6.0 + w * w / 120.0);
    return;
  }
  if (w > 0) {
    double g = std::sqrt(gamma2);
    c = std::cosh(g * z);
    s = std::sinh(g * z) / g;
  } else {
    double m = std::sqrt(-gamma2);
    c = std::cos(m * z);
    s = std::sin(m * z) / m;
  }
}

/// Plane-wave-pump gains of the conjugate pair (q,Omega), (-q,-Omega).
struct GainSample {
  cplx u1, v1, u2, v2;
  cplx gamma;    // Gamma(q,Omega) (1/m); imaginary on the oscillatory branch
  double delta;  // Delta(q,Omega) (1/m)
};

/// Input-output gain functions after propagation length z in the crystal.
/// sigma_p = sigma * A_p >= 0; z in (0, l_c].
inline GainSample gain_uv(const CrystalParams& c, double sigma_p, double qx, double qy,
                          double omega, double z) {
  const double d1p = detuning(c, 1, qx, qy, omega);
  const double d2p = detuning(c, 2, qx, qy, omega);
  const double d1m = detuning(c, 1, -qx, -qy, -omega);
  const double d2m = detuning(c, 2, -qx, -qy, -omega);

  const double delta_p = c.delta_0 + d1p + d2m;  // Delta(q,Omega)
  const double delta_m = c.delta_0 + d1m + d2p;  // Delta(-q,-Omega)
  const double g2p = sigma_p * sigma_p - 0.25 * delta_p * delta_p;
  const double g2m = sigma_p * sigma_p - 0.25 * delta_m * delta_m;

  double cp, sp, cm, sm;
  gamma_cosh_sinhc(g2p, z, cp, sp);
  gamma_cosh_sinhc(g2m, z, cm, sm);

  const cplx ph1 = std::exp(cplx(0, 0.5 * (d1p - d2m - c.delta_0) * z));
  const cplx ph2 = std::exp(cplx(0, 0.5 * (d2p - d1m - c.delta_0) * z));

  GainSample g;
  g.u1 = ph1 * (cplx(cp, 0) + cplx(0, 0.5 * delta_p) * sp);
  g.v1 = ph1 * (sigma_p * sp);
  g.u2 = ph2 * (cplx(cm, 0) + cplx(0, 0.5 * delta_m) * sm);
  g.v2 = ph2 * (sigma_p * sm);
  g.gamma = g2p >= 0 ? cplx(std::sqrt(g2p), 0) : cplx(0, std::sqrt(-g2p));
  g.delta = delta_p;
  return g;
}

/// tanh(x)/x with the x -> 0 limit.
inline double tanhc(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - x * x / 3.0;
  return std::tanh(x) / x;
}

/// Detector shifts minimizing the near-field N_- fluctuations (type II):
/// the imaged plane depth Delta_z and the relative idler displacement
/// Delta_y along the walk-off axis.
struct OptimalShifts {
  double delta_z = 0;  // m
  double delta_y = 0;  // m
};

inline OptimalShifts optimal_shifts(const CrystalParams& c, double sigma_p) {
  const double x = sigma_p * c.l_c;
  const double f = 0.5 * tanhc(x);  // tanh(sigma_p l_c)/(2 sigma_p l_c)
  OptimalShifts s;
  s.delta_z = f * (c.n_1 + c.n_2) / (2.0 * c.n_1 * c.n_2) * c.l_c;
  s.delta_y = f * c.rho_2 * c.l_c;
  return s;
}

/// Phase of U1(q,O) V2(-q,-O) U1*(q',O) V2*(-q',-O) together with its
/// high-gain linearization. The approximation is only trusted inside the
/// gain band |Delta l_c| < band_bound (default 2 sigma_p l_c).
struct GainProductPhase {
  double exact = 0;   // rad
  double approx = 0;  // rad
  bool in_band = true;
};

inline GainProductPhase phase_of_gain_product(const CrystalParams& c, double sigma_p,
                                              double qx, double qy, double qx_p, double qy_p,
                                              double omega, double band_bound = 0) {
  if (band_bound <= 0) band_bound = 2.0 * sigma_p * c.l_c;
  GainSample a = gain_uv(c, sigma_p, qx, qy, omega, c.l_c);
  GainSample am = gain_uv(c, sigma_p, -qx, -qy, -omega, c.l_c);
  GainSample b = gain_uv(c, sigma_p, qx_p, qy_p, omega, c.l_c);
  GainSample bm = gain_uv(c, sigma_p, -qx_p, -qy_p, -omega, c.l_c);
  GainProductPhase r;
  r.exact = std::arg(a.u1 * am.v2 * std::conj(b.u1 * bm.v2));
  const double dla = a.delta * c.l_c;
  const double dlb = b.delta * c.l_c;
  r.approx = 0.5 * tanhc(sigma_p * c.l_c) * (dla - dlb);
  r.in_band = std::abs(dla) < band_bound && std::abs(dlb) < band_bound;
  return r;
}

/// Quasi-stationary finite-pump kernels: the gain functions with the local
/// pump amplitude A0(x,y,t) = A_p exp(-(x^2+y^2)/w0^2) exp(-t^2/tau0^2) in
/// place of the plane-wave A_p. Reduces to gain_uv at the pump center.
inline GainSample quasi_stationary_kernels(const CrystalParams& c, const PumpParams& p, double z,
                                           double qx, double qy, double omega, double x, double y,
                                           double t) {
  const double a0 = p.amplitude * std::exp(-(x * x + y * y) / (p.w_0 * p.w_0)) *
                    std::exp(-(t * t) / (p.tau_0 * p.tau_0));
  return gain_uv(c, c.sigma * a0, qx, qy, omega, z);
}

}  // namespace twinbeam

#endif  // TWINBEAM_GAIN_HPP
