#ifndef TWINBEAM_RUN_HPP
#define TWINBEAM_RUN_HPP

#include <chrono>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "twinbeam/config.hpp"
#include "twinbeam/io.hpp"
#include "twinbeam/pwpa.hpp"
#include "twinbeam/sinks.hpp"

namespace twinbeam {

struct RunResult {
  std::vector<std::string> files;
  Measurement mc_measurement;
  PixelCorrelationResult pwpa_result;
  bool has_mc = false, has_pwpa = false;
};

namespace run_detail {

inline void write_gain_table(const ExperimentConfig& cfg, const std::string& path) {
  const CrystalParams& c = cfg.crystal;
  const double sigma_p = c.sigma * cfg.pump.amplitude;
  DerivedScales s = derive_scales(c, cfg.pump, cfg.optics.f);
  TableWriter t(path);
  t.meta("table", "pwpa gain functions");
  t.provenance(cfg);
  t.columns({"q", "omega", "abs_u1_sq", "abs_v1_sq", "delta_lc"});
  const double q_half = std::max(s.q_r, s.q_c) + 6.0 * s.q_0;
  const double w_half = 6.0 * s.omega_0;
  const int nq = 201, nw = 41;
  for (int i = 0; i < nq; ++i) {
    double q = -q_half + 2.0 * q_half * i / (nq - 1);
    for (int j = 0; j < nw; ++j) {
      double w = -w_half + 2.0 * w_half * j / (nw - 1);
      GainSample g = gain_uv(c, sigma_p, 0, q, w, c.l_c);
      t.row(q, w, std::norm(g.u1), std::norm(g.v1), g.delta * c.l_c);
    }
  }
}

inline void write_far_profile(const ExperimentConfig& cfg, const std::string& path) {
  const CrystalParams& c = cfg.crystal;
  DerivedScales s = derive_scales(c, cfg.pump, cfg.optics.f);
  TableWriter t(path);
  t.meta("table", "pwpa far-field mean intensity profile");
  t.provenance(cfg);
  t.columns({"x", "intensity"});
  const double map = c.lambda_1 * cfg.optics.f / two_pi;
  const double x_half = map * (std::max(s.q_r, s.q_c) + 6.0 * s.q_0);
  for (int i = 0; i <= 200; ++i) {
    double x = -x_half + 2.0 * x_half * i / 200;
    t.row(x, mean_intensity_far(x, c, cfg.pump, cfg.optics.f).value);
  }
}

inline void write_measurement(const Measurement& m, const ExperimentConfig& cfg,
                              const std::string& path, double wall, double effective_d) {
  TableWriter t(path);
  t.meta("table", "monte carlo photon statistics");
  t.provenance(cfg, wall);
  t.meta("effective_pixel_size", effective_d);
  t.meta("efficiency", cfg.detector.eta);
  t.columns({"quantity", "value", "std_err"});
  t.row("N1", m.n1, m.se_n1);
  t.row("N2", m.n2, m.se_n2);
  t.row("N_plus", m.n_plus, m.se_n_plus);
  t.row("var_minus", m.var_minus, m.se_var_minus);
  if (m.ratio_defined)
    t.row("ratio", m.ratio, m.se_ratio);
  else
    t.row("ratio", "undefined(shot~0)", 0);
}

}  // namespace run_detail

/// Execute the experiment a config describes: the PWPA analytic pipeline,
/// the Monte Carlo pipeline, or both, writing plot-ready tables with full
/// provenance into the output directory.
inline RunResult run_experiment(const ExperimentConfig& cfg, bool quiet = false) {
  cfg.validate();
  ensure_directory(cfg.output.directory);
  const std::string dir = cfg.output.directory + "/";
  RunResult res;
  auto log = [&](const std::string& s) {
    if (!quiet) std::cerr << "[twinbeam] " << s << "\n";
  };

  save_config(cfg, dir + "config.cfg");
  res.files.push_back(dir + "config.cfg");

  DerivedScales scales = derive_scales(cfg.crystal, cfg.pump, cfg.optics.f);
  {
    TableWriter t(dir + "derived_scales.tsv");
    t.meta("table", "derived characteristic scales");
    t.provenance(cfg);
    t.columns({"quantity", "value"});
    t.row("q_0", scales.q_0);
    t.row("x_coh", scales.x_coh);
    t.row("omega_0", scales.omega_0);
    t.row("q_c", scales.q_c);
    t.row("q_r", scales.q_r);
    t.row("x_diff", scales.x_diff);
    t.row("x_0", scales.x_0);
    t.row("sigma_p_lc", cfg.pump.sigma_p_lc);
    t.row("delta_q0_over_q0", scales.delta_q0 / scales.q_0);
    t.row("delta_omega0_over_omega0", scales.delta_omega0 / scales.omega_0);
    t.row("delta0_lc", cfg.crystal.delta_0 * cfg.crystal.l_c);
    res.files.push_back(dir + "derived_scales.tsv");
  }

  const bool do_pwpa = cfg.run.mode != RunMode::mc;
  const bool do_mc = cfg.run.mode != RunMode::pwpa;

  if (do_pwpa) {
    log("pwpa: gain table");
    run_detail::write_gain_table(cfg, dir + "gain_table.tsv");
    res.files.push_back(dir + "gain_table.tsv");
    if (cfg.optics.f > 0) {
      log("pwpa: far-field intensity profile");
      run_detail::write_far_profile(cfg, dir + "far_intensity.tsv");
      res.files.push_back(dir + "far_intensity.tsv");
    }
    log("pwpa: pixel correlations");
    PwpaOptions popt;
    popt.omega_cut = cfg.detector.omega_filter;  // 0 keeps the default window
    res.pwpa_result = pixel_correlations_pwpa(cfg.detector, cfg.optics, cfg.crystal, cfg.pump, popt);
    res.has_pwpa = true;
    {
      TableWriter t(dir + "pixel_correlations.tsv");
      t.meta("table", "pwpa pixel-integrated correlations");
      t.provenance(cfg);
      t.meta("quadrature_rel_change", res.pwpa_result.convergence.rel_change);
      t.columns({"self_var", "self_var_2", "cross_cov", "shot", "ratio"});
      t.row(res.pwpa_result.self_var, res.pwpa_result.self_var_2, res.pwpa_result.cross_cov,
            res.pwpa_result.shot, res.pwpa_result.ratio);
      res.files.push_back(dir + "pixel_correlations.tsv");
    }
    if (cfg.scan.dz_steps > 0 && cfg.detector.plane == DetectorPlane::near_field) {
      log("pwpa: delta_z/delta_y surface");
      std::vector<double> dz(cfg.scan.dz_steps), dy(cfg.scan.dy_steps);
      for (int i = 0; i < cfg.scan.dz_steps; ++i)
        dz[i] = cfg.scan.dz_min +
                (cfg.scan.dz_max - cfg.scan.dz_min) * i / std::max(1, cfg.scan.dz_steps - 1);
      for (int i = 0; i < cfg.scan.dy_steps; ++i)
        dy[i] = cfg.scan.dy_min +
                (cfg.scan.dy_max - cfg.scan.dy_min) * i / std::max(1, cfg.scan.dy_steps - 1);
      DzDySurface surf = scan_dz_dy_pwpa(cfg.detector, cfg.crystal, cfg.pump, dz, dy, popt);
      TableWriter t(dir + "dzdy_surface.tsv");
      t.meta("table", "pwpa noise-ratio surface over (delta_z, delta_y)");
      t.provenance(cfg);
      t.meta("min_ratio", surf.min_ratio);
      t.meta("dz_at_min", surf.dz_min);
      t.meta("dy_at_min", surf.dy_min);
      t.columns({"delta_z", "delta_y", "ratio"});
      for (std::size_t a = 0; a < dz.size(); ++a)
        for (std::size_t b = 0; b < dy.size(); ++b) t.row(dz[a], dy[b], surf.ratio[a * dy.size() + b]);
      res.files.push_back(dir + "dzdy_surface.tsv");
    }
    if (!cfg.scan.d_list.empty()) {
      log("pwpa: detector-size scan");
      TableWriter t(dir + "pwpa_dscan.tsv");
      t.meta("table", "pwpa noise ratio vs detector size");
      t.provenance(cfg);
      t.columns({"d", "ratio", "self_var", "cross_cov", "shot"});
      for (double d : cfg.scan.d_list) {
        DetectorSpec det = cfg.detector;
        det.d = d;
        PixelCorrelationResult r = pixel_correlations_pwpa(det, cfg.optics, cfg.crystal, cfg.pump, popt);
        t.row(d, r.ratio, r.self_var, r.cross_cov, r.shot);
      }
      res.files.push_back(dir + "pwpa_dscan.tsv");
    }
  }

  if (do_mc) {
    log("mc: ensemble of " + std::to_string(cfg.run.n_traj) + " trajectories");
    auto t0 = std::chrono::steady_clock::now();
    PlaneStatsSink::Options so;
    so.path = cfg.optics;
    so.detector = cfg.detector;
    so.d_list = cfg.scan.d_list;
    so.keep_samples = true;
    if (so.d_list.empty()) so.d_list.push_back(cfg.detector.d);
    EnsembleOptions eo;
    eo.n_traj = cfg.run.n_traj;
    eo.master_seed = cfg.run.master_seed;
    eo.workers = cfg.run.workers;
    std::vector<SinkFactory> factories{[&]() {
      return std::make_unique<PlaneStatsSink>(cfg.crystal, cfg.grid, so);
    }};
    std::vector<std::unique_ptr<TrajectorySink>> merged;
    EnsembleReport rep = run_ensemble(cfg.crystal, cfg.pump, cfg.grid, eo, factories, merged);
    auto& sink = dynamic_cast<PlaneStatsSink&>(*merged[0]);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log("mc: done in " + std::to_string(wall) + " s, " + std::to_string(rep.completed) + " ok");

    // The configured detector size is the first entry whose window matches.
    std::size_t main_idx = 0;
    for (std::size_t i = 0; i < so.d_list.size(); ++i)
      if (so.d_list[i] == cfg.detector.d) main_idx = i;
    Measurement m = ordering_correct(sink.accumulators()[main_idx]);
    if (cfg.detector.eta < 1.0) m = apply_efficiency(m, cfg.detector.eta);
    res.mc_measurement = m;
    res.has_mc = true;
    run_detail::write_measurement(m, cfg, dir + "measurement.tsv", wall,
                                  sink.windows()[main_idx].r1.effective_d);
    res.files.push_back(dir + "measurement.tsv");

    if (so.d_list.size() > 1) {
      TableWriter t(dir + "mc_dscan.tsv");
      t.meta("table", "monte carlo noise ratio vs detector size");
      t.provenance(cfg, wall);
      t.columns({"d", "effective_d", "ratio", "se_ratio", "n_plus", "var_minus"});
      for (std::size_t i = 0; i < so.d_list.size(); ++i) {
        Measurement mi = ordering_correct(sink.accumulators()[i]);
        if (cfg.detector.eta < 1.0) mi = apply_efficiency(mi, cfg.detector.eta);
        t.row(so.d_list[i], sink.windows()[i].r1.effective_d,
              mi.ratio_defined ? mi.ratio : std::numeric_limits<double>::quiet_NaN(), mi.se_ratio,
              mi.n_plus, mi.var_minus);
      }
      res.files.push_back(dir + "mc_dscan.tsv");
    }

    {
      TableWriter t(dir + "beam_profile.tsv");
      t.meta("table", "mean detected photons per cell (vacuum-subtracted)");
      t.provenance(cfg, wall);
      t.columns({"x", "photons_per_cell"});
      auto prof = sink.mean_counts_corrected();
      const GridSpec& pg = sink.plane_grid();
      for (int i = 0; i < pg.n_x; ++i) t.row(coord_at(i, pg.n_x, pg.dx()), prof[i]);
      res.files.push_back(dir + "beam_profile.tsv");
    }
  }

  if (res.has_mc && res.has_pwpa && !quiet) {
    std::cerr << "[twinbeam] ratio: mc = " << res.mc_measurement.ratio
              << " +- " << res.mc_measurement.se_ratio << ", pwpa = " << res.pwpa_result.ratio
              << "\n";
  }
  return res;
}

}  // namespace twinbeam

#endif  // TWINBEAM_RUN_HPP
