// twinbeam command-line interface: batch experiment runner for the twin-beam
// correlation simulator. Subcommands: presets, validate, pwpa, simulate, scan.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "twinbeam/run.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string presets_dir = twinbeam::preset_directory();
  std::string out_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t n_traj = 0;
  bool n_traj_set = false;
  std::string mode;
  int workers = -1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "configuration file");
  cmd->add_option("--preset", a.preset, "named preset (see `twinbeam presets`)");
  cmd->add_option("--presets-dir", a.presets_dir, "preset search directory");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--override", a.overrides, "section.key=value override (repeatable)");
  cmd->add_option_function<std::uint64_t>("--seed", [&a](std::uint64_t v) { a.seed = v; a.seed_set = true; },
                                          "master seed");
  cmd->add_option_function<std::uint64_t>("--n-traj", [&a](std::uint64_t v) { a.n_traj = v; a.n_traj_set = true; },
                                          "trajectory count");
  cmd->add_option("--mode", a.mode, "pwpa | mc | both");
  cmd->add_option("--workers", a.workers, "worker threads (0 = hardware)");
}

twinbeam::ExperimentConfig load_from(const CommonArgs& a) {
  using namespace twinbeam;
  std::string path;
  if (!a.config_path.empty())
    path = a.config_path;
  else if (!a.preset.empty())
    path = preset_path(a.preset, a.presets_dir);
  else
    throw ConfigError("either --config or --preset is required");
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  std::string text = apply_overrides(buf.str(), a.overrides);
  ExperimentConfig cfg = parse_config(text, path);
  if (a.seed_set) cfg.run.master_seed = a.seed;
  if (a.n_traj_set) cfg.run.n_traj = a.n_traj;
  if (!a.out_dir.empty()) cfg.output.directory = a.out_dir;
  if (a.workers >= 0) cfg.run.workers = a.workers;
  if (!a.mode.empty()) {
    if (a.mode == "pwpa") cfg.run.mode = RunMode::pwpa;
    else if (a.mode == "mc") cfg.run.mode = RunMode::mc;
    else if (a.mode == "both") cfg.run.mode = RunMode::both;
    else throw ConfigError("--mode must be pwpa, mc or both");
  }
  return cfg;
}

int do_presets(const CommonArgs& a) {
  auto presets = twinbeam::list_presets(a.presets_dir);
  if (presets.empty()) {
    std::cout << "no presets found in " << a.presets_dir << "\n";
    return 0;
  }
  for (const auto& p : presets) std::cout << p.name << "\t" << p.description << "\n";
  return 0;
}

int do_validate(const CommonArgs& a) {
  using namespace twinbeam;
  ExperimentConfig cfg = load_from(a);
  auto v = cfg.violations();
  if (!v.empty()) {
    std::cout << "invalid:\n";
    for (const auto& m : v) std::cout << "  - " << m << "\n";
    return 2;
  }
  DerivedScales s = derive_scales(cfg.crystal, cfg.pump, cfg.optics.f);
  std::cout << "ok\n";
  std::cout << "  sigma_p_lc            = " << cfg.pump.sigma_p_lc << "\n";
  std::cout << "  delta0_lc             = " << cfg.crystal.delta_0 * cfg.crystal.l_c << "\n";
  std::cout << "  q_0                   = " << s.q_0 << " 1/m (x_coh = " << s.x_coh * 1e6 << " um)\n";
  std::cout << "  q_r / q_0             = " << s.q_r / s.q_0 << (s.no_rings ? " (no rings)" : "") << "\n";
  std::cout << "  q_c / q_0             = " << s.q_c / s.q_0 << "\n";
  std::cout << "  omega_0               = " << s.omega_0 << " rad/s\n";
  std::cout << "  delta_q0 / q_0        = " << s.delta_q0 / s.q_0 << "\n";
  std::cout << "  delta_omega0 / omega_0= " << s.delta_omega0 / s.omega_0 << "\n";
  if (cfg.optics.f > 0) std::cout << "  x_diff                = " << s.x_diff * 1e6 << " um\n";
  return 0;
}

int do_run(const CommonArgs& a, twinbeam::RunMode forced, bool force) {
  twinbeam::ExperimentConfig cfg = load_from(a);
  if (force) cfg.run.mode = forced;
  twinbeam::RunResult r = twinbeam::run_experiment(cfg);
  std::cout << "wrote " << r.files.size() << " file(s) to " << cfg.output.directory << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twin-beam spatial quantum correlation simulator"};
  app.require_subcommand(1);

  CommonArgs a;
  auto* presets = app.add_subcommand("presets", "list shipped experiment presets");
  presets->add_option("--presets-dir", a.presets_dir, "preset search directory");
  auto* validate = app.add_subcommand("validate", "check a configuration and echo derived ratios");
  add_common(validate, a);
  auto* pwpa = app.add_subcommand("pwpa", "analytic plane-wave-pump tables and curves");
  add_common(pwpa, a);
  auto* simulate = app.add_subcommand("simulate", "stochastic ensemble run");
  add_common(simulate, a);
  auto* scan = app.add_subcommand("scan", "detector-size scan and shift-surface outputs");
  add_common(scan, a);

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) return do_presets(a);
    if (validate->parsed()) return do_validate(a);
    if (pwpa->parsed()) return do_run(a, twinbeam::RunMode::pwpa, true);
    if (simulate->parsed()) return do_run(a, twinbeam::RunMode::both, false);
    if (scan->parsed()) return do_run(a, twinbeam::RunMode::both, false);
  } catch (const twinbeam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const twinbeam::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
