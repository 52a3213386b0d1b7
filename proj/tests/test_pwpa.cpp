#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "test_helpers.hpp"
#include "twinbeam/pwpa.hpp"

using namespace twinbeam;
using Catch::Approx;

TEST_CASE("mean intensity: vacuum in, nothing out") {
  auto cfg = testing::lbo_config();
  cfg.crystal.sigma = 0;
  cfg.pump.sigma_p_lc = 0;
  CHECK(mean_intensity_near(cfg.crystal, cfg.pump).value == 0.0);
}

TEST_CASE("mean intensity scales as (sigma_p l_c)^2 in the spontaneous regime") {
  auto cfg = testing::lbo_config();
  PwpaOptions opt;
  opt.rel_tol = 1e-5;
  auto at_gain = [&](double slc) {
    ExperimentConfig c = cfg;
    c.crystal.sigma = slc / c.crystal.l_c;
    c.pump.sigma_p_lc = slc;
    return mean_intensity_near(c.crystal, c.pump, opt).value;
  };
  double i1 = at_gain(0.01), i2 = at_gain(0.02);
  CHECK(i2 / i1 == Approx(4.0).epsilon(2e-4));
}

TEST_CASE("mean intensity near: LBO at gain 3 self-converges") {
  const auto& cfg = testing::lbo_config();
  Convergence c = mean_intensity_near(cfg.crystal, cfg.pump);
  CHECK(c.converged);
  CHECK(c.rel_change < 1e-4);
  CHECK(c.value > 0);
}

TEST_CASE("far-field intensity: ring maximum, dark outside, collinear peak at 0") {
  const auto& cfg = testing::lbo_config();
  DerivedScales s = derive_scales(cfg.crystal, cfg.pump, cfg.optics.f);
  const double map = cfg.crystal.lambda_1 * cfg.optics.f / two_pi;
  const double x_ring = map * s.q_r;
  double peak = mean_intensity_far(x_ring, cfg.crystal, cfg.pump, cfg.optics.f).value;
  // scan the radial profile: the ring position is the global maximum
  double best = 0, best_x = 0;
  for (int i = 0; i <= 60; ++i) {
    double x = map * (s.q_r + 6 * s.q_0) * i / 60.0;
    double v = mean_intensity_far(x, cfg.crystal, cfg.pump, cfg.optics.f).value;
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  CHECK(best_x == Approx(x_ring).margin(0.1 * map * s.q_0));
  CHECK(best == Approx(peak).epsilon(0.01));
  // far outside the rings the intensity dies
  double far = mean_intensity_far(map * (s.q_r + 6.0 * s.q_0), cfg.crystal, cfg.pump, cfg.optics.f).value;
  CHECK(far < 1e-3 * peak);

  // collinear type I (q_r = 0): peak at x = 0
  ExperimentConfig col = testing::lbo_config();
  col.crystal.delta_0 = 0;
  col.crystal.n_0 = col.crystal.n_1;
  col.crystal.finalize();
  double at0 = mean_intensity_far(0, col.crystal, col.pump, col.optics.f).value;
  double off = mean_intensity_far(map * 2.0 * s.q_0, col.crystal, col.pump, col.optics.f).value;
  CHECK(at0 > off);
}

TEST_CASE("kernel correlator equals the brute-force double sum") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 101;
  const double dq = 2500.0, d = 3.3e-5;
  std::vector<cplx> a(n);
  for (auto& v : a) v = cplx(u(rng), u(rng));
  pwpa_detail::KernelCorrelator corr(n, dq, d);
  double fast = corr(a);
  double direct = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      direct += sqr(sinc(0.5 * (i - j) * dq * d)) * (a[i] * std::conj(a[j])).real();
  CHECK(fast == Approx(direct).epsilon(1e-12));
}

TEST_CASE("pixel correlations: optimized evaluation equals a direct trapezoid oracle") {
  // Fixed-resolution direct (q, q') double sum at a handful of Omega nodes,
  // independently coded, against the same quantity assembled through the
  // FFT-correlator path.
  const auto& cfg = testing::bbo_near_config();
  const CrystalParams& c = cfg.crystal;
  const double sigma_p = c.sigma * cfg.pump.amplitude;
  DerivedScales s = derive_scales(c, cfg.pump, 0);
  const double qh = s.q_c + 6.0 * s.q_0;
  const double wh = 2.0 * s.omega_0;
  const int nq = 301, nw = 9;
  const double dq = 2 * qh / (nq - 1), dw = 2 * wh / (nw - 1);
  const double d = cfg.detector.d;
  const OpticalPath& path = cfg.optics;

  double direct_cross = 0, direct_self = 0;
  std::vector<cplx> f(nq);
  std::vector<double> v1(nq);
  for (int iw = 0; iw < nw; ++iw) {
    const double w = -wh + iw * dw;
    const double ww = trapezoid_weight(iw, nw) * dw / two_pi;
    for (int iq = 0; iq < nq; ++iq) {
      const double q = -qh + iq * dq;
      GainSample gp = gain_uv(c, sigma_p, 0, q, w, c.l_c);
      GainSample gm = gain_uv(c, sigma_p, 0, -q, -w, c.l_c);
      cplx ramp = std::exp(cplx(0, c.lambda_1 * q * q * path.delta_z / two_pi + q * path.delta_y));
      f[iq] = ramp * gp.u1 * gm.v2;
      v1[iq] = std::norm(gp.v1);
    }
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < nq; ++j) {
        double k = sqr(sinc(0.5 * (i - j) * dq * d));
        double wij = trapezoid_weight(i, nq) * trapezoid_weight(j, nq) * dq * dq * ww;
        direct_cross += k * wij * (f[i] * std::conj(f[j])).real();
        direct_self += k * wij * v1[i] * v1[j];
      }
  }

  // same sums via the correlator
  pwpa_detail::KernelCorrelator corr(nq, dq, d);
  double fast_cross = 0, fast_self = 0;
  std::vector<cplx> ft(nq), vt(nq);
  for (int iw = 0; iw < nw; ++iw) {
    const double w = -wh + iw * dw;
    const double ww = trapezoid_weight(iw, nw) * dw / two_pi;
    for (int iq = 0; iq < nq; ++iq) {
      const double q = -qh + iq * dq;
      GainSample gp = gain_uv(c, sigma_p, 0, q, w, c.l_c);
      GainSample gm = gain_uv(c, sigma_p, 0, -q, -w, c.l_c);
      cplx ramp = std::exp(cplx(0, c.lambda_1 * q * q * path.delta_z / two_pi + q * path.delta_y));
      double wq = trapezoid_weight(iq, nq) * dq;
      ft[iq] = std::sqrt(ww) * wq * ramp * gp.u1 * gm.v2;
      vt[iq] = std::sqrt(ww) * wq * std::norm(gp.v1);
    }
    fast_cross += corr(ft);
    fast_self += corr(vt);
  }
  CHECK(fast_cross == Approx(direct_cross).epsilon(1e-6));
  CHECK(fast_self == Approx(direct_self).epsilon(1e-6));
}

TEST_CASE("near-field pixel statistics: small and large detector limits") {
  const auto& cfg = testing::bbo_near_config();
  DerivedScales s = derive_scales(cfg.crystal, cfg.pump, 0);
  PwpaOptions opt;
  opt.omega_cut = cfg.detector.omega_filter;

  SECTION("d well below x_coh approaches shot noise") {
    DetectorSpec det = cfg.detector;
    det.d = 0.1 * s.x_coh;
    auto r = pixel_correlations_near(det, cfg.optics, cfg.crystal, cfg.pump, opt);
    CHECK(r.ratio == Approx(1.0).margin(0.1));
    det.d = 0.025 * s.x_coh;
    auto r2 = pixel_correlations_near(det, cfg.optics, cfg.crystal, cfg.pump, opt);
    CHECK(r2.ratio == Approx(1.0).margin(0.03));
    CHECK(std::abs(r2.ratio - 1.0) < std::abs(r.ratio - 1.0));
  }

  SECTION("d well above x_coh with zero shifts kills the noise (~1/d)") {
    OpticalPath zero = cfg.optics;
    zero.delta_z = zero.delta_y = 0;
    DetectorSpec det = cfg.detector;
    det.d = 40.0 * s.x_coh;
    auto r = pixel_correlations_near(det, zero, cfg.crystal, cfg.pump, opt);
    CHECK(r.ratio < 0.45);
    det.d = 120.0 * s.x_coh;
    auto r2 = pixel_correlations_near(det, zero, cfg.crystal, cfg.pump, opt);
    CHECK(r2.ratio < 0.5 * r.ratio);
    det.d = 400.0 * s.x_coh;
    auto r3 = pixel_correlations_near(det, zero, cfg.crystal, cfg.pump, opt);
    CHECK(r3.ratio < 0.05);
  }

  SECTION("BBO anchor: ratio 0.3 at d = 2 x_coh and the optimal shifts") {
    auto r = pixel_correlations_near(cfg.detector, cfg.optics, cfg.crystal, cfg.pump, opt);
    CHECK(r.ratio == Approx(0.30).margin(0.05));
    CHECK(r.self_var == Approx(r.self_var_2).epsilon(1e-6));  // equal beams
  }

  SECTION("shot-noise inequality for every computed result") {
    for (double d : {0.5 * s.x_coh, 2.0 * s.x_coh, 10.0 * s.x_coh}) {
      DetectorSpec det = cfg.detector;
      det.d = d;
      auto r = pixel_correlations_near(det, cfg.optics, cfg.crystal, cfg.pump, opt);
      CHECK(2.0 * r.cross_cov - r.self_var - r.self_var_2 <= r.shot * (1 + 1e-9));
      CHECK(r.ratio >= -1e-9);
    }
  }
}

TEST_CASE("far-field zero-noise identity: symmetric pixels cancel to < 1e-3") {
  for (const auto* cfgp : {&testing::lbo_config(), &testing::bbo_far_config()}) {
    const auto& cfg = *cfgp;
    PwpaOptions opt;
    opt.omega_cut = cfg.detector.omega_filter;
    DetectorSpec det = cfg.detector;
    det.symmetric = true;
    auto r = pixel_correlations_far(det, cfg.optics, cfg.crystal, cfg.pump, opt);
    CHECK(std::abs(r.ratio) < 1e-3);
    // large pixels too (the d -> infinity path of the identity)
    det.d = 10 * det.d;
    auto r2 = pixel_correlations_far(det, cfg.optics, cfg.crystal, cfg.pump, opt);
    CHECK(std::abs(r2.ratio) < 1e-3);
  }
}

TEST_CASE("dz-dy surface: minimum near the optimal shifts, cigar along the walk-off diagonal") {
  const auto& cfg = testing::bbo_near_config();
  PwpaOptions opt;
  opt.omega_cut = cfg.detector.omega_filter;
  OptimalShifts o = optimal_shifts(cfg.crystal, cfg.crystal.sigma * cfg.pump.amplitude);

  std::vector<double> dz, dy;
  for (int i = 0; i < 17; ++i) dz.push_back(0.0008 * i / 16);  // 50 um cells
  for (int i = 0; i < 20; ++i) dy.push_back(9.5e-5 * i / 19);  // 5 um cells
  DzDySurface s = scan_dz_dy_pwpa(cfg.detector, cfg.crystal, cfg.pump, dz, dy, opt, 1);
  CHECK(std::abs(s.dz_min - o.delta_z) <= 50e-6 + 1e-12);
  CHECK(std::abs(s.dy_min - o.delta_y) <= 5e-6 + 1e-12);
  CHECK(s.min_ratio < 0.35);

  // ratio at (0,0) is far above shot noise for d = 2 x_coh
  DzDySurface origin = scan_dz_dy_pwpa(cfg.detector, cfg.crystal, cfg.pump, {0.0}, {0.0}, opt, 1);
  CHECK(origin.ratio[0] > 1.0);

  // cigar: along the diagonal dy = rho_2 dz the ratio stays low, perpendicular it blows up
  const double ddz = 1.5e-4;
  auto at = [&](double a, double b) {
    return scan_dz_dy_pwpa(cfg.detector, cfg.crystal, cfg.pump, {a}, {b}, opt, 1).ratio[0];
  };
  double along = at(o.delta_z + ddz, o.delta_y + cfg.crystal.rho_2 * ddz);
  double perp = at(o.delta_z + ddz, o.delta_y - cfg.crystal.rho_2 * ddz);
  CHECK(along < 0.3 * perp);
}

TEST_CASE("surface scan agrees with the single-point quadrature at the optimum") {
  const auto& cfg = testing::bbo_near_config();
  PwpaOptions opt;
  opt.omega_cut = cfg.detector.omega_filter;
  auto point = pixel_correlations_near(cfg.detector, cfg.optics, cfg.crystal, cfg.pump, opt);
  DzDySurface s = scan_dz_dy_pwpa(cfg.detector, cfg.crystal, cfg.pump, {cfg.optics.delta_z},
                                  {cfg.optics.delta_y}, opt, 2);
  CHECK(s.ratio[0] == Approx(point.ratio).epsilon(5e-3));
}
