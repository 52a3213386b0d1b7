#ifndef TWINBEAM_MODEL_HPP
#define TWINBEAM_MODEL_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twinbeam/core.hpp"

namespace twinbeam {

enum class PhaseMatch { type1_degenerate, type2 };

inline std::string to_string(PhaseMatch pm) {
  return pm == PhaseMatch::type1_degenerate ? "type1_degenerate" : "type2";
}

/// Linear dispersion and nonlinear coupling constants of the medium.
/// Index 0 is the pump, 1 the signal (taken ordinarily polarized, rho_1 = 0),
/// 2 the idler. Walk-off angles rho_0, rho_2 are positive with the drift
/// oriented along -y.
struct CrystalParams {
  PhaseMatch phase_match = PhaseMatch::type2;
  double l_c = 0;                           // crystal length (m)
  double lambda_0 = 0, lambda_1 = 0, lambda_2 = 0;  // vacuum wavelengths (m)
  double n_0 = 0, n_1 = 0, n_2 = 0;         // refractive indices at the carriers
  double k_0 = 0, k_1 = 0, k_2 = 0;         // carrier wave numbers 2*pi*n/lambda (1/m)
  double kp_0 = 0, kp_1 = 0, kp_2 = 0;      // inverse group velocities k' (s/m)
  double kpp_0 = 0, kpp_1 = 0, kpp_2 = 0;   // group velocity dispersion k'' (s^2/m)
  double rho_0 = 0, rho_2 = 0;              // walk-off angles (rad)
  double delta_0 = 0;                       // collinear mismatch k_1 + k_2 - k_0 (1/m)
  double sigma = 0;                         // nonlinear coupling (1/m per unit pump amplitude)

  /// Fill k_j from n_j and lambda_j.
  void finalize() {
    k_0 = two_pi * n_0 / lambda_0;
    k_1 = two_pi * n_1 / lambda_1;
    k_2 = two_pi * n_2 / lambda_2;
  }

  double k_bar() const { return 2.0 * k_1 * k_2 / (k_1 + k_2); }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    auto fail = [&v](const std::string& m) { v.push_back(m); };
    if (!(l_c > 0)) fail("crystal: l_c must be > 0");
    if (!(lambda_0 > 0 && lambda_1 > 0 && lambda_2 > 0)) fail("crystal: wavelengths must be > 0");
    if (!(k_0 > 0 && k_1 > 0 && k_2 > 0)) fail("crystal: wave numbers must be > 0 (call finalize())");
    if (lambda_0 > 0 && lambda_1 > 0 && lambda_2 > 0) {
      double lhs = 1.0 / lambda_1 + 1.0 / lambda_2;
      double rhs = 1.0 / lambda_0;
      if (std::abs(lhs - rhs) > 1e-12 * rhs)
        fail("crystal: carrier energy conservation 1/lambda_1 + 1/lambda_2 = 1/lambda_0 violated");
    }
    for (auto [k, n, lam, name] : {std::tuple{k_0, n_0, lambda_0, "k_0"},
                                   std::tuple{k_1, n_1, lambda_1, "k_1"},
                                   std::tuple{k_2, n_2, lambda_2, "k_2"}}) {
      if (lam > 0 && std::abs(k - two_pi * n / lam) > 1e-9 * k)
        fail(std::string("crystal: ") + name + " inconsistent with 2*pi*n/lambda");
    }
    if (std::abs((k_1 + k_2 - k_0) - delta_0) > 1e-6 * (k_1 + k_2))
      fail("crystal: delta_0 inconsistent with k_1 + k_2 - k_0");
    if (phase_match == PhaseMatch::type1_degenerate) {
      if (std::abs(lambda_1 - lambda_2) > 1e-12 * lambda_1 ||
          std::abs(lambda_1 - 2.0 * lambda_0) > 1e-12 * lambda_1)
        fail("crystal: type1_degenerate requires lambda_1 = lambda_2 = 2*lambda_0");
      if (rho_2 != 0) fail("crystal: type1_degenerate requires rho_2 = 0");
    }
    if (!(sigma >= 0)) fail("crystal: sigma must be >= 0");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid CrystalParams:";
      for (auto& m : v) msg += "\n  - " + m;
      throw ConfigError(msg);
    }
  }
};

/// Gaussian pump geometry. amplitude is normalized so that sigma * amplitude
/// is the plane-wave gain rate sigma_p (1/m).
struct PumpParams {
  double amplitude = 1.0;  // peak envelope amplitude A_p
  double w_0 = 0;          // beam waist (m)
  double tau_0 = 0;        // pulse duration (s)
  double sigma_p_lc = 0;   // dimensionless gain sigma*A_p*l_c

  std::vector<std::string> violations(const CrystalParams& c) const {
    std::vector<std::string> v;
    if (!(w_0 > 0)) v.push_back("pump: w_0 must be > 0");
    if (!(tau_0 > 0)) v.push_back("pump: tau_0 must be > 0");
    double expect = c.sigma * amplitude * c.l_c;
    if (std::abs(sigma_p_lc - expect) > 1e-12 * std::max(1.0, std::abs(expect)))
      v.push_back("pump: sigma_p_lc inconsistent with sigma*amplitude*l_c");
    return v;
  }

  void validate(const CrystalParams& c) const {
    auto v = violations(c);
    if (!v.empty()) {
      std::string msg = "invalid PumpParams:";
      for (auto& m : v) msg += "\n  - " + m;
      throw ConfigError(msg);
    }
  }
};

/// Characteristic bandwidths and lengths of the down-conversion geometry.
struct DerivedScales {
  double q_0 = 0;             // spatial bandwidth sqrt(k_bar/l_c) (1/m)
  double omega_0_prime = 0;   // 1/(|k1'-k2'| l_c), infinite when k1'=k2'
  bool omega_0_prime_infinite = false;
  double omega_0_dprime = 0;  // sqrt(2/((k1''+k2'') l_c))
  double omega_0 = 0;         // selected gain bandwidth (rad/s)
  double k_bar = 0;           // 2 k1 k2/(k1+k2) (1/m)
  double x_coh = 0;           // 1/q_0 (m)
  double q_c = 0;             // ring center offset k_bar*rho_2/2 (1/m)
  double q_r = 0;             // ring radius (1/m), 0 when no_rings
  bool no_rings = false;      // k_bar*delta_0 + q_c^2 < 0
  double delta_q0 = 0;        // pump spatial bandwidth 2/w_0 (1/m)
  double delta_omega0 = 0;    // pump temporal bandwidth 2/tau_0 (rad/s)
  double x_diff = 0;          // far-field resolution length (lambda f/2pi) delta_q0 (m)
  double x_0 = 0;             // far-field scale (lambda f/2pi) q_0 (m)
  double s_diff = 0;          // resolution area (lambda f)^2 / S_A (m^2)
  double s_a = 0;             // effective pump area pi w_0^2 / 2 (m^2)
  double z_r0 = 0;            // pump Rayleigh length pi w_0^2/lambda_0 (m)
  double z_disp0 = 0;         // pump dispersion length tau_0^2/(2 k_0'') (m)
  double focal_length = 0;    // f used for the far-field scalings (m)
};

/// Populate every derived scale. f is the focal length used for the
/// far-field mappings; pass 0 if no lens is involved (x_diff, x_0, s_diff
/// are then left at 0).
inline DerivedScales derive_scales(const CrystalParams& c, const PumpParams& p, double f) {
  DerivedScales s;
  s.k_bar = c.k_bar();
  s.q_0 = std::sqrt(s.k_bar / c.l_c);
  s.x_coh = 1.0 / s.q_0;
  double dkp = c.kp_1 - c.kp_2;
  if (dkp == 0.0) {
    s.omega_0_prime_infinite = true;
    s.omega_0_prime = std::numeric_limits<double>::infinity();
  } else {
    s.omega_0_prime = 1.0 / (std::abs(dkp) * c.l_c);
  }
  s.omega_0_dprime = std::sqrt(2.0 / ((c.kpp_1 + c.kpp_2) * c.l_c));
  s.omega_0 = (c.phase_match == PhaseMatch::type1_degenerate) ? s.omega_0_dprime : s.omega_0_prime;
  s.q_c = 0.5 * s.k_bar * c.rho_2;
  double qr2 = s.k_bar * c.delta_0 + s.q_c * s.q_c;
  if (qr2 >= 0) {
    s.q_r = std::sqrt(qr2);
  } else {
    s.no_rings = true;
    s.q_r = 0;
  }
  s.delta_q0 = 2.0 / p.w_0;
  s.delta_omega0 = 2.0 / p.tau_0;
  s.s_a = 0.5 * pi * p.w_0 * p.w_0;
  s.z_r0 = pi * p.w_0 * p.w_0 / c.lambda_0;
  s.z_disp0 = c.kpp_0 != 0 ? p.tau_0 * p.tau_0 / (2.0 * c.kpp_0) : std::numeric_limits<double>::infinity();
  s.focal_length = f;
  if (f > 0) {
    double scale = c.lambda_1 * f / two_pi;  // q -> x mapping at the signal wavelength
    s.x_diff = scale * s.delta_q0;
    s.x_0 = scale * s.q_0;
    s.s_diff = sqr(c.lambda_1 * f) / s.s_a;
  }
  return s;
}

/// Quadratic expansion of k_jz around the carrier, Fourier-space detuning of
/// envelope j (Eq. form: k'O + k''O^2/2 + rho q_y - (q_x^2+q_y^2)/(2 k)).
inline double detuning(const CrystalParams& c, int j, double qx, double qy, double omega) {
  double kp, kpp, rho, k;
  switch (j) {
    case 0: kp = c.kp_0; kpp = c.kpp_0; rho = c.rho_0; k = c.k_0; break;
    case 1: kp = c.kp_1; kpp = c.kpp_1; rho = 0.0;     k = c.k_1; break;
    default: kp = c.kp_2; kpp = c.kpp_2; rho = c.rho_2; k = c.k_2; break;
  }
  return kp * omega + 0.5 * kpp * omega * omega + rho * qy - (qx * qx + qy * qy) / (2.0 * k);
}

struct MismatchSample {
  double delta_lc = 0;      // dimensionless Delta(q, Omega) * l_c
  bool paraxial_ok = true;  // |q| below paraxial_ratio * min(k_1, k_2)
};

inline constexpr double default_paraxial_ratio = 0.2;

/// Accumulated phase mismatch of the conjugate mode pair (q,Omega), (-q,-Omega),
/// in the dimensionless bandwidth form.
inline MismatchSample phase_mismatch(const CrystalParams& c, double qx, double qy, double omega,
                                     double paraxial_ratio = default_paraxial_ratio) {
  double kb = c.k_bar();
  double q0 = std::sqrt(kb / c.l_c);
  double q2 = qx * qx + qy * qy;
  MismatchSample r;
  double dlc = c.delta_0 * c.l_c - c.rho_2 * qy * c.l_c - q2 / (q0 * q0);
  double dkp = c.kp_1 - c.kp_2;
  if (dkp != 0.0) {
    double omega0p = 1.0 / (std::abs(dkp) * c.l_c);
    dlc += (dkp > 0 ? 1.0 : -1.0) * omega / omega0p;
  }
  double omega0pp2 = 2.0 / ((c.kpp_1 + c.kpp_2) * c.l_c);
  dlc += omega * omega / omega0pp2;
  r.delta_lc = dlc;
  r.paraxial_ok = std::sqrt(q2) < paraxial_ratio * std::min(c.k_1, c.k_2);
  return r;
}

/// Delta(q,Omega) in 1/m, for the gain functions.
inline double pair_mismatch(const CrystalParams& c, double qx, double qy, double omega) {
  return phase_mismatch(c, qx, qy, omega).delta_lc / c.l_c;
}

enum class GridDims { x_t, xy, xy_t };

inline std::string to_string(GridDims d) {
  switch (d) {
    case GridDims::x_t: return "x_t";
    case GridDims::xy: return "xy";
    default: return "xy_t";
  }
}

/// Sampling lattice for the space-time envelopes. The transverse x axis is
/// the walk-off axis (the q_y direction of the mismatch formulas) so that
/// 1-D runs capture type II geometry.
struct GridSpec {
  GridDims dims = GridDims::x_t;
  int n_x = 1024, n_y = 1, n_t = 512;
  double l_x = 0, l_y = 0, t_win = 0;  // windows (m, m, s)
  int n_z = 200;
  bool band_limited_t = false;  // temporal Nyquist band doubles as a hard spectral filter

  bool has_y() const { return dims != GridDims::x_t; }
  bool has_t() const { return dims != GridDims::xy; }
  double dx() const { return l_x / n_x; }
  double dy() const { return has_y() ? l_y / n_y : 1.0; }
  double dt() const { return has_t() ? t_win / n_t : 1.0; }
  double dq() const { return two_pi / l_x; }
  double domega() const { return has_t() ? two_pi / t_win : 0.0; }
  /// Cell volume dx*dt (1D+time), dx*dy or dx*dy*dt.
  double cell_volume() const {
    double v = dx();
    if (has_y()) v *= dy();
    if (has_t()) v *= dt();
    return v;
  }
  std::size_t n_cells() const {
    return static_cast<std::size_t>(n_x) * static_cast<std::size_t>(has_y() ? n_y : 1) *
           static_cast<std::size_t>(has_t() ? n_t : 1);
  }
  double dz(const CrystalParams& c) const { return c.l_c / n_z; }

  static bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

  std::vector<std::string> violations(const CrystalParams& c, const PumpParams& p) const {
    std::vector<std::string> v;
    if (!is_pow2(n_x)) v.push_back("grid: n_x must be a power of two");
    if (has_y() && !is_pow2(n_y)) v.push_back("grid: n_y must be a power of two");
    if (has_t() && !is_pow2(n_t)) v.push_back("grid: n_t must be a power of two");
    if (!(l_x > 0)) v.push_back("grid: l_x must be > 0");
    if (has_y() && !(l_y > 0)) v.push_back("grid: l_y must be > 0");
    if (has_t() && !(t_win > 0)) v.push_back("grid: t_win must be > 0");
    if (n_z < 1) v.push_back("grid: n_z must be >= 1");
    if (!v.empty()) return v;

    DerivedScales s = derive_scales(c, p, 0.0);
    // Transverse Nyquist: the gain band sits within max(q_r, q_c) + O(q_0).
    double q_need = std::max(s.q_r, s.q_c) + 4.0 * s.q_0;
    if (!(pi / dx() > q_need)) {
      std::ostringstream os;
      os << "grid: transverse Nyquist pi/dx = " << pi / dx() << " must exceed max(q_r,q_c)+4*q_0 = "
         << q_need;
      v.push_back(os.str());
    }
    if (has_y() && !(pi / dy() > q_need)) v.push_back("grid: transverse Nyquist violated on y axis");
    if (has_t()) {
      double o_need = 4.0 * s.omega_0;
      if (!(pi / dt() > o_need) && !band_limited_t) {
        std::ostringstream os;
        os << "grid: temporal Nyquist pi/dt = " << pi / dt() << " must exceed 4*Omega_0 = " << o_need
           << " (or set band_limited_t to treat the grid band as a hard spectral filter)";
        v.push_back(os.str());
      }
      if (band_limited_t && !(pi / dt() > 8.0 * s.delta_omega0))
        v.push_back("grid: band-limited temporal window must still cover the pump bandwidth (pi/dt > 8*delta_omega0)");
    }
    // Window coverage for a finite pump: the envelope must decay before the boundary.
    const double tol = 1.0 - 1e-9;
    if (!(l_x >= 6.0 * p.w_0 * tol)) v.push_back("grid: window coverage l_x >= 6*w_0 violated");
    if (has_y() && !(l_y >= 6.0 * p.w_0 * tol)) v.push_back("grid: window coverage l_y >= 6*w_0 violated");
    if (has_t() && !(t_win >= 6.0 * p.tau_0 * tol)) v.push_back("grid: window coverage t_win >= 6*tau_0 violated");
    return v;
  }

  void validate(const CrystalParams& c, const PumpParams& p) const {
    auto v = violations(c, p);
    if (!v.empty()) {
      std::string msg = "invalid GridSpec:";
      for (auto& m : v) msg += "\n  - " + m;
      throw ConfigError(msg);
    }
  }
};

}  // namespace twinbeam

#endif  // TWINBEAM_MODEL_HPP
