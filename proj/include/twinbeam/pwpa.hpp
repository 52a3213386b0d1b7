#ifndef TWINBEAM_PWPA_HPP
#define TWINBEAM_PWPA_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "twinbeam/detection.hpp"
#include "twinbeam/gain.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/optics.hpp"
#include "twinbeam/quadrature.hpp"

namespace twinbeam {

/// Quadrature controls for the closed-form results. Windows follow the gain
/// geometry: q over +-(max(q_r, q_c) + q_margin*q_0), Omega over
/// +-omega_margin*Omega_0 unless omega_cut overrides.
struct PwpaOptions {
  double rel_tol = 1e-4;
  int max_levels = 8;
  double q_margin = 6.0;
  double omega_margin = 6.0;
  double omega_cut = 0;  // explicit half-band (rad/s); 0 = omega_margin * Omega_0
  int base_per_q0 = 8;   // base resolution: q_0 / base_per_q0
  int base_per_omega0 = 8;
};

namespace pwpa_detail {

struct Bands {
  double q_half = 0, omega_half = 0;
  int nq_base = 0, nomega_base = 0;
};

inline Bands bands(const CrystalParams& c, const PumpParams& p, const PwpaOptions& o) {
  DerivedScales s = derive_scales(c, p, 0);
  Bands b;
  b.q_half = std::max(s.q_r, s.q_c) + o.q_margin * s.q_0;
  b.omega_half = o.omega_cut > 0 ? o.omega_cut : o.omega_margin * s.omega_0;
  b.nq_base = std::max(33, 2 * static_cast<int>(std::ceil(b.q_half * o.base_per_q0 / s.q_0)) + 1);
  b.nomega_base =
      std::max(17, 2 * static_cast<int>(std::ceil(b.omega_half * o.base_per_omega0 / s.omega_0)) + 1);
  return b;
}

}  // namespace pwpa_detail

/// Near-field mean photon flux density (1 transverse dimension + time):
/// integral of |V_1|^2 dq dOmega / (2 pi)^2 over the gain band.
inline Convergence mean_intensity_near(const CrystalParams& c, const PumpParams& p,
                                       const PwpaOptions& opt = {}) {
  if (p.sigma_p_lc == 0) return Convergence{0, 0, 1, true, {0}};
  const double sigma_p = c.sigma * p.amplitude;
  const auto b = pwpa_detail::bands(c, p, opt);
  auto level_value = [&](int lvl) {
    const int nq = (b.nq_base - 1) * (1 << lvl) + 1;
    const int nw = (b.nomega_base - 1) * (1 << lvl) + 1;
    auto inner = [&](double q) {
      return trapezoid(
          [&](double w) {
            GainSample g = gain_uv(c, sigma_p, 0, q, w, c.l_c);
            return std::norm(g.v1);
          },
          -b.omega_half, b.omega_half, nw);
    };
    return trapezoid(inner, -b.q_half, b.q_half, nq) / (two_pi * two_pi);
  };
  return refine_until(level_value, opt.rel_tol, opt.max_levels);
}

/// Far-field mean intensity at position x in the focal plane:
/// (1/S_diff) * integral dOmega/2pi |V_1(2 pi x / lambda f, Omega)|^2.
inline Convergence mean_intensity_far(double x, const CrystalParams& c, const PumpParams& p,
                                      double f, const PwpaOptions& opt = {}) {
  if (p.sigma_p_lc == 0) return Convergence{0, 0, 1, true, {0}};
  const double sigma_p = c.sigma * p.amplitude;
  const auto b = pwpa_detail::bands(c, p, opt);
  const DerivedScales s = derive_scales(c, p, f);
  const double q = two_pi * x / (c.lambda_1 * f);
  auto level_value = [&](int lvl) {
    const int nw = (b.nomega_base - 1) * (1 << lvl) + 1;
    return trapezoid(
               [&](double w) {
                 GainSample g = gain_uv(c, sigma_p, 0, q, w, c.l_c);
                 return std::norm(g.v1);
               },
               -b.omega_half, b.omega_half, nw) /
           two_pi / s.s_diff;
  };
  return refine_until(level_value, opt.rel_tol, opt.max_levels);
}

/// Pixel-integrated photon statistics under the plane-wave pump.
struct PixelCorrelationResult {
  double self_var = 0;   // <:(dN1)^2:> (photons^2)
  double self_var_2 = 0; // <:(dN2)^2:>
  double cross_cov = 0;  // <dN1 dN2>
  double shot = 0;       // <N+>
  double ratio = 0;      // <(dN-)^2>/<N+>
  Convergence convergence;
};

namespace pwpa_detail {

/// sum over q, q' of K(q - q') A(q) conj(A(q')) for an even real kernel K,
/// via zero-padded FFT cross-correlation. Weights must be folded into A.
class KernelCorrelator {
 public:
  KernelCorrelator(int n, double dq, double kernel_width_d) : n_(n) {
    m_ = 1;
    while (m_ < 2 * n) m_ <<= 1;
    std::vector<cplx> fk(m_, cplx(0, 0));
    for (int s = -(n - 1); s <= n - 1; ++s) {
      double k = sinc(0.5 * s * dq * kernel_width_d);
      fk[(s + m_) % m_] = k * k;
    }
    fft_pow2(fk, false);
    fk_ = std::move(fk);
  }

  /// Returns sum_{i,j} K(i-j) a_i conj(a_j) (real for even real K).
  double operator()(const std::vector<cplx>& a) const {
    std::vector<cplx> fa(m_, cplx(0, 0));
    std::copy(a.begin(), a.end(), fa.begin());
    fft_pow2(fa, false);
    // sum_s K(s) C(s) = (1/m) sum_f conj(FK(f)) |FA(f)|^2
    cplx total(0, 0);
    for (int f = 0; f < m_; ++f) total += std::conj(fk_[f]) * std::norm(fa[f]);
    return total.real() / static_cast<double>(m_);
  }

 private:
  static void fft_pow2(std::vector<cplx>& v, bool inverse) {
    const int n = static_cast<int>(v.size());
    for (int i = 1, j = 0; i < n; ++i) {
      int bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(v[i], v[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
      double ang = two_pi / len * (inverse ? 1 : -1);
      cplx wl(std::cos(ang), std::sin(ang));
      for (int i = 0; i < n; i += len) {
        cplx w(1, 0);
        for (int j = 0; j < len / 2; ++j) {
          cplx u = v[i + j], t = v[i + j + len / 2] * w;
          v[i + j] = u + t;
          v[i + j + len / 2] = u - t;
          w *= wl;
        }
      }
    }
  }

  int n_, m_;
  std::vector<cplx> fk_;
};

}  // namespace pwpa_detail

/// Evaluate the near-field pixel correlation quadratures for square (1-D:
/// segment) pixels of size d imaged at depth delta_z with relative detector
/// shift delta_y. All three moments carry the common factor T_d, which
/// cancels in the ratio; shot is reported per unit T_d times t_d.
inline PixelCorrelationResult pixel_correlations_near(const DetectorSpec& det,
                                                      const OpticalPath& path,
                                                      const CrystalParams& c, const PumpParams& p,
                                                      const PwpaOptions& opt = {}) {
  const double sigma_p = c.sigma * p.amplitude;
  const auto b = pwpa_detail::bands(c, p, opt);
  const double t_d = det.t_d > 0 ? det.t_d : 1.0;
  const double lambda = c.lambda_1;

  PixelCorrelationResult res;
  auto level_value = [&](int lvl) {
    const int nq = (b.nq_base - 1) * (1 << lvl) + 1;
    const int nw = (b.nomega_base - 1) * (1 << lvl) + 1;
    const double dq = 2.0 * b.q_half / (nq - 1);
    const double dw = 2.0 * b.omega_half / (nw - 1);

    pwpa_detail::KernelCorrelator corr(nq, dq, det.d);
    std::vector<cplx> f_tab(nq), v1_tab(nq), v2_tab(nq);
    double self1 = 0, self2 = 0, cross = 0, flux = 0;
    for (int iw = 0; iw < nw; ++iw) {
      const double w = -b.omega_half + iw * dw;
      const double ww = trapezoid_weight(iw, nw) * dw / two_pi;
      const double sw = std::sqrt(ww);
      for (int iq = 0; iq < nq; ++iq) {
        const double q = -b.q_half + iq * dq;
        GainSample gp = gain_uv(c, sigma_p, 0, q, w, c.l_c);
        GainSample gm = gain_uv(c, sigma_p, 0, -q, -w, c.l_c);
        const double wq = trapezoid_weight(iq, nq) * dq;
        const cplx ramp =
            std::exp(cplx(0, lambda * q * q * path.delta_z / two_pi + q * path.delta_y));
        f_tab[iq] = sw * wq * ramp * gp.u1 * gm.v2;
        v1_tab[iq] = sw * wq * std::norm(gp.v1);
        v2_tab[iq] = sw * wq * std::norm(gp.v2);
        flux += ww * wq * (std::norm(gp.v1) + std::norm(gp.v2));
      }
      self1 += corr(v1_tab);
      self2 += corr(v2_tab);
      cross += corr(f_tab);
    }
    const double hnorm = sqr(det.d / two_pi);
    res.self_var = t_d * hnorm * self1;
    res.self_var_2 = t_d * hnorm * self2;
    res.cross_cov = t_d * hnorm * cross;
    res.shot = t_d * det.d * flux / two_pi;
    return (res.shot + res.self_var + res.self_var_2 - 2.0 * res.cross_cov) / res.shot;
  };
  res.convergence = refine_until(level_value, opt.rel_tol, opt.max_levels);
  res.ratio = res.convergence.value;
  return res;
}

/// Far-field pixel statistics with symmetric detectors: the PWPA correlations
/// are delta-like in q, so the pixel integrals collapse to single-q integrals
/// over the detection band Q1 = (2 pi / lambda f)[center - d/2, center + d/2].
/// The aperture constant L_A = sqrt(pi/2) w_0 enters all three moments alike.
inline PixelCorrelationResult pixel_correlations_far(const DetectorSpec& det,
                                                     const OpticalPath& path,
                                                     const CrystalParams& c, const PumpParams& p,
                                                     const PwpaOptions& opt = {}) {
  const double sigma_p = c.sigma * p.amplitude;
  const auto b = pwpa_detail::bands(c, p, opt);
  const double t_d = det.t_d > 0 ? det.t_d : 1.0;
  const double map = two_pi / (c.lambda_1 * path.f);
  const double q_lo = map * (det.center_1 - 0.5 * det.d);
  const double q_hi = map * (det.center_1 + 0.5 * det.d);
  const double l_a = std::sqrt(0.5 * pi) * p.w_0;

  PixelCorrelationResult res;
  auto level_value = [&](int lvl) {
    const int nq = std::max(9, (33 - 1) * (1 << lvl) + 1);
    const int nw = (b.nomega_base - 1) * (1 << lvl) + 1;
    double self1 = 0, self2 = 0, cross = 0, flux = 0;
    auto omega_int = [&](auto&& f) {
      return trapezoid(f, -b.omega_half, b.omega_half, nw) / two_pi;
    };
    self1 = trapezoid(
        [&](double q) {
          return omega_int([&](double w) { return sqr(std::norm(gain_uv(c, sigma_p, 0, q, w, c.l_c).v1)); });
        },
        q_lo, q_hi, nq);
    self2 = trapezoid(
        [&](double q) {
          return omega_int([&](double w) {
            return sqr(std::norm(gain_uv(c, sigma_p, 0, -q, -w, c.l_c).v2));
          });
        },
        q_lo, q_hi, nq);
    cross = trapezoid(
        [&](double q) {
          return omega_int([&](double w) {
            GainSample gp = gain_uv(c, sigma_p, 0, q, w, c.l_c);
            GainSample gm = gain_uv(c, sigma_p, 0, -q, -w, c.l_c);
            return std::norm(gp.u1 * gm.v2);
          });
        },
        q_lo, q_hi, nq);
    flux = trapezoid(
        [&](double q) {
          return omega_int([&](double w) {
            GainSample gp = gain_uv(c, sigma_p, 0, q, w, c.l_c);
            GainSample gm = gain_uv(c, sigma_p, 0, -q, -w, c.l_c);
            return std::norm(gp.v1) + std::norm(gm.v2);
          });
        },
        q_lo, q_hi, nq);
    const double pref = t_d * l_a / two_pi;
    res.self_var = pref * self1;
    res.self_var_2 = pref * self2;
    res.cross_cov = pref * cross;
    res.shot = pref * flux;
    return (res.shot + res.self_var + res.self_var_2 - 2.0 * res.cross_cov) / res.shot;
  };
  res.convergence = refine_until(level_value, opt.rel_tol, opt.max_levels, true);
  res.ratio = res.convergence.value;
  return res;
}

inline PixelCorrelationResult pixel_correlations_pwpa(const DetectorSpec& det,
                                                      const OpticalPath& path,
                                                      const CrystalParams& c, const PumpParams& p,
                                                      const PwpaOptions& opt = {}) {
  return det.plane == DetectorPlane::near_field ? pixel_correlations_near(det, path, c, p, opt)
                                                : pixel_correlations_far(det, path, c, p, opt);
}

/// Ratio surface over the (delta_z, delta_y) lattice from the near-field
/// quadratures, reusing the gain tables across grid points.
struct DzDySurface {
  std::vector<double> dz, dy;
  std::vector<double> ratio;  // row-major [dz][dy]
  double min_ratio = 0;
  double dz_min = 0, dy_min = 0;
};

inline DzDySurface scan_dz_dy_pwpa(const DetectorSpec& det, const CrystalParams& c,
                                   const PumpParams& p, const std::vector<double>& dz_list,
                                   const std::vector<double>& dy_list, const PwpaOptions& opt = {},
                                   int level = 2) {
  const double sigma_p = c.sigma * p.amplitude;
  const auto b = pwpa_detail::bands(c, p, opt);
  const int nq = (b.nq_base - 1) * (1 << level) + 1;
  const int nw = (b.nomega_base - 1) * (1 << level) + 1;
  const double dq = 2.0 * b.q_half / (nq - 1);
  const double dw = 2.0 * b.omega_half / (nw - 1);
  const double lambda = c.lambda_1;

  // Omega-integrated pair tables S(q,q') and the separable self/shot pieces.
  std::vector<cplx> s_cross(static_cast<std::size_t>(nq) * nq, cplx(0, 0));
  std::vector<double> s_self1(static_cast<std::size_t>(nq) * nq, 0.0), s_self2 = s_self1;
  std::vector<cplx> f_tab(nq);
  std::vector<double> v1_tab(nq), v2_tab(nq);
  double flux = 0;
  for (int iw = 0; iw < nw; ++iw) {
    const double w = -b.omega_half + iw * dw;
    const double ww = trapezoid_weight(iw, nw) * dw / two_pi;
    for (int iq = 0; iq < nq; ++iq) {
      const double q = -b.q_half + iq * dq;
      GainSample gp = gain_uv(c, sigma_p, 0, q, w, c.l_c);
      GainSample gm = gain_uv(c, sigma_p, 0, -q, -w, c.l_c);
      f_tab[iq] = gp.u1 * gm.v2;
      v1_tab[iq] = std::norm(gp.v1);
      v2_tab[iq] = std::norm(gp.v2);
    }
    for (int i = 0; i < nq; ++i) {
      flux += ww * trapezoid_weight(i, nq) * dq * (v1_tab[i] + v2_tab[i]);
      for (int j = 0; j < nq; ++j) {
        const std::size_t id = static_cast<std::size_t>(i) * nq + j;
        s_cross[id] += ww * f_tab[i] * std::conj(f_tab[j]);
        s_self1[id] += ww * v1_tab[i] * v1_tab[j];
        s_self2[id] += ww * v2_tab[i] * v2_tab[j];
      }
    }
  }

  // Fold pixel kernel and trapezoid weights.
  const double hnorm = sqr(det.d / two_pi);
  double self_total = 0;
  std::vector<cplx> t_cross(s_cross.size());
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nq; ++j) {
      const std::size_t id = static_cast<std::size_t>(i) * nq + j;
      const double k = sqr(sinc(0.5 * (i - j) * dq * det.d));
      const double wij = trapezoid_weight(i, nq) * trapezoid_weight(j, nq) * dq * dq;
      t_cross[id] = hnorm * k * wij * s_cross[id];
      self_total += hnorm * k * wij * (s_self1[id] + s_self2[id]);
    }
  const double shot = det.d * flux / two_pi;

  DzDySurface surf;
  surf.dz = dz_list;
  surf.dy = dy_list;
  surf.ratio.resize(dz_list.size() * dy_list.size());
  surf.min_ratio = std::numeric_limits<double>::infinity();
  std::vector<cplx> wq(nq);
  for (std::size_t a = 0; a < dz_list.size(); ++a) {
    for (std::size_t bth = 0; bth < dy_list.size(); ++bth) {
      for (int i = 0; i < nq; ++i) {
        const double q = -b.q_half + i * dq;
        wq[i] = std::exp(cplx(0, lambda * q * q * dz_list[a] / two_pi + q * dy_list[bth]));
      }
      double cross = 0;
      for (int i = 0; i < nq; ++i) {
        cplx row(0, 0);
        const cplx* trow = t_cross.data() + static_cast<std::size_t>(i) * nq;
        for (int j = 0; j < nq; ++j) row += trow[j] * std::conj(wq[j]);
        cross += (wq[i] * row).real();
      }
      const double ratio = (shot + self_total - 2.0 * cross) / shot;
      surf.ratio[a * dy_list.size() + bth] = ratio;
      if (ratio < surf.min_ratio) {
        surf.min_ratio = ratio;
        surf.dz_min = dz_list[a];
        surf.dy_min = dy_list[bth];
      }
    }
  }
  return surf;
}

}  // namespace twinbeam

#endif  // TWINBEAM_PWPA_HPP
