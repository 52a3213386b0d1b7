#ifndef TWINBEAM_CONFIG_HPP
#define TWINBEAM_CONFIG_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "twinbeam/detection.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/optics.hpp"

namespace twinbeam {

enum class RunMode { pwpa, mc, both };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::pwpa: return "pwpa";
    case RunMode::mc: return "mc";
    default: return "both";
  }
}

struct RunParams {
  RunMode mode = RunMode::both;
  std::uint64_t n_traj = 1000;
  std::uint64_t master_seed = 20240811;
  int workers = 0;  // 0 = hardware concurrency
};

struct OutputParams {
  std::string directory = "out";
  bool write_fields = false;
};

struct ScanParams {
  std::vector<double> d_list;                 // detector sizes (m)
  int dz_steps = 0, dy_steps = 0;             // 0 = no surface scan
  double dz_min = 0, dz_max = 0, dy_min = 0, dy_max = 0;
};

/// Full description of one experiment: physics, sampling, geometry, run
/// bookkeeping. Loads from / saves to the key-value config format.
struct ExperimentConfig {
  std::string name, description;
  CrystalParams crystal;
  PumpParams pump;
  GridSpec grid;
  OpticalPath optics;
  DetectorSpec detector;
  RunParams run;
  OutputParams output;
  ScanParams scan;

  std::vector<std::string> violations() const {
    std::vector<std::string> v = crystal.violations();
    if (v.empty()) {
      auto pv = pump.violations(crystal);
      v.insert(v.end(), pv.begin(), pv.end());
      auto gv = grid.violations(crystal, pump);
      v.insert(v.end(), gv.begin(), gv.end());
      auto ov = optics.violations(crystal);
      v.insert(v.end(), ov.begin(), ov.end());
      auto dv = detector.violations(grid);
      v.insert(v.end(), dv.begin(), dv.end());
    }
    if (run.n_traj < 1) v.push_back("run: n_traj must be >= 1");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid configuration:";
      for (auto& m : v) msg += "\n  - " + m;
      throw ConfigError(msg);
    }
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Parsed raw file: ordered (section, key) -> value with duplicate detection.
struct RawConfig {
  std::map<std::string, std::map<std::string, std::string>> values;
  std::set<std::pair<std::string, std::string>> consumed;

  static RawConfig parse(const std::string& text, const std::string& origin) {
    RawConfig rc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      // strip trailing comment
      auto hash = val.find(" #");
      if (hash != std::string::npos) val = trim(val.substr(0, hash));
      if (rc.values[section].count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      rc.values[section][key] = val;
    }
    return rc;
  }

  bool has(const std::string& sec, const std::string& key) const {
    auto s = values.find(sec);
    return s != values.end() && s->second.count(key) > 0;
  }

  std::string take(const std::string& sec, const std::string& key) {
    consumed.insert({sec, key});
    return values.at(sec).at(key);
  }

  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [sec, kv] : values)
      for (const auto& [key, val] : kv)
        if (!consumed.count({sec, key})) out.push_back("[" + sec + "] " + key);
    return out;
  }
};

struct Reader {
  RawConfig& rc;
  std::vector<std::string> missing;

  std::optional<std::string> raw(const std::string& sec, const std::string& key, bool required) {
    if (!rc.has(sec, key)) {
      if (required) missing.push_back("[" + sec + "] " + key);
      return std::nullopt;
    }
    return rc.take(sec, key);
  }

  double num(const std::string& sec, const std::string& key, double dflt = 0, bool required = true) {
    auto v = raw(sec, key, required);
    if (!v) return dflt;
    char* end = nullptr;
    double x = std::strtod(v->c_str(), &end);
    if (end == v->c_str() || *end != '\0')
      throw ConfigError("config: [" + sec + "] " + key + ": not a number: '" + *v + "'");
    return x;
  }

  std::int64_t integer(const std::string& sec, const std::string& key, std::int64_t dflt = 0,
                       bool required = true) {
    auto v = raw(sec, key, required);
    if (!v) return dflt;
    try {
      std::size_t pos = 0;
      std::int64_t x = std::stoll(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return x;
    } catch (...) {
      throw ConfigError("config: [" + sec + "] " + key + ": not an integer: '" + *v + "'");
    }
  }

  bool boolean(const std::string& sec, const std::string& key, bool dflt = false,
               bool required = false) {
    auto v = raw(sec, key, required);
    if (!v) return dflt;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ConfigError("config: [" + sec + "] " + key + ": expected true/false");
  }

  std::string text(const std::string& sec, const std::string& key, std::string dflt = "",
                   bool required = false) {
    auto v = raw(sec, key, required);
    return v ? *v : dflt;
  }

  std::vector<double> num_list(const std::string& sec, const std::string& key) {
    auto v = raw(sec, key, false);
    std::vector<double> out;
    if (!v) return out;
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      char* end = nullptr;
      double x = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0')
        throw ConfigError("config: [" + sec + "] " + key + ": bad list entry '" + item + "'");
      out.push_back(x);
    }
    return out;
  }
};

inline std::string fmt_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace config_detail

/// Parse a configuration document. Unknown sections or keys are rejected,
/// missing required keys reported together.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config") {
  using namespace config_detail;
  RawConfig rc = RawConfig::parse(text, origin);
  Reader r{rc, {}};
  ExperimentConfig cfg;

  std::int64_t schema = r.integer("", "schema_version", 1, true);
  if (schema != 1) throw ConfigError(origin + ": unsupported schema_version");
  cfg.name = r.text("", "name");
  cfg.description = r.text("", "description");

  std::string pm = r.text("crystal", "phase_match", "", true);
  if (pm == "type1_degenerate") cfg.crystal.phase_match = PhaseMatch::type1_degenerate;
  else if (pm == "type2") cfg.crystal.phase_match = PhaseMatch::type2;
  else if (!pm.empty()) throw ConfigError(origin + ": crystal.phase_match must be type1_degenerate or type2");
  cfg.crystal.l_c = r.num("crystal", "l_c");
  cfg.crystal.lambda_0 = r.num("crystal", "lambda_0");
  cfg.crystal.lambda_1 = r.num("crystal", "lambda_1");
  cfg.crystal.lambda_2 = r.num("crystal", "lambda_2");
  cfg.crystal.n_0 = r.num("crystal", "n_0");
  cfg.crystal.n_1 = r.num("crystal", "n_1");
  cfg.crystal.n_2 = r.num("crystal", "n_2");
  cfg.crystal.kp_0 = r.num("crystal", "kp_0");
  cfg.crystal.kp_1 = r.num("crystal", "kp_1");
  cfg.crystal.kp_2 = r.num("crystal", "kp_2");
  cfg.crystal.kpp_0 = r.num("crystal", "kpp_0");
  cfg.crystal.kpp_1 = r.num("crystal", "kpp_1");
  cfg.crystal.kpp_2 = r.num("crystal", "kpp_2");
  cfg.crystal.rho_0 = r.num("crystal", "rho_0");
  cfg.crystal.rho_2 = r.num("crystal", "rho_2");
  cfg.crystal.delta_0 = r.num("crystal", "delta_0");
  cfg.crystal.sigma = r.num("crystal", "sigma");
  cfg.crystal.finalize();

  cfg.pump.amplitude = r.num("pump", "amplitude");
  cfg.pump.w_0 = r.num("pump", "waist");
  cfg.pump.tau_0 = r.num("pump", "duration");
  cfg.pump.sigma_p_lc = cfg.crystal.sigma * cfg.pump.amplitude * cfg.crystal.l_c;

  std::string dims = r.text("grid", "dims", "x_t");
  if (dims == "x_t") cfg.grid.dims = GridDims::x_t;
  else if (dims == "xy") cfg.grid.dims = GridDims::xy;
  else if (dims == "xy_t") cfg.grid.dims = GridDims::xy_t;
  else throw ConfigError(origin + ": grid.dims must be x_t, xy or xy_t");
  cfg.grid.n_x = static_cast<int>(r.integer("grid", "n_x"));
  cfg.grid.n_y = static_cast<int>(r.integer("grid", "n_y", 1, false));
  cfg.grid.n_t = static_cast<int>(r.integer("grid", "n_t", 1, cfg.grid.has_t()));
  cfg.grid.n_z = static_cast<int>(r.integer("grid", "n_z"));
  cfg.grid.l_x = r.num("grid", "window_x");
  cfg.grid.l_y = r.num("grid", "window_y", 0, false);
  cfg.grid.t_win = r.num("grid", "window_t", 0, cfg.grid.has_t());
  cfg.grid.band_limited_t = r.boolean("grid", "band_limited_t");

  std::string kind = r.text("optics", "kind", "none");
  if (kind == "none") cfg.optics.kind = OpticsKind::none;
  else if (kind == "far_field_f_f") cfg.optics.kind = OpticsKind::far_field_f_f;
  else if (kind == "near_field_2f2f") cfg.optics.kind = OpticsKind::near_field_2f2f;
  else if (kind == "free_space") cfg.optics.kind = OpticsKind::free_space;
  else throw ConfigError(origin + ": optics.kind unrecognized");
  cfg.optics.f = r.num("optics", "focal_length", 0, false);
  cfg.optics.delta_z = r.num("optics", "delta_z", 0, false);
  cfg.optics.delta_y = r.num("optics", "delta_y", 0, false);
  cfg.optics.free_length = r.num("optics", "free_length", 0, false);

  std::string plane = r.text("detector", "plane", "", true);
  if (plane == "near") cfg.detector.plane = DetectorPlane::near_field;
  else if (plane == "far") cfg.detector.plane = DetectorPlane::far_field;
  else if (!plane.empty()) throw ConfigError(origin + ": detector.plane must be near or far");
  cfg.detector.d = r.num("detector", "pixel_size");
  cfg.detector.center_1 = r.num("detector", "center_1", 0, false);
  cfg.detector.center_2 = r.num("detector", "center_2", 0, false);
  cfg.detector.t_d = r.num("detector", "time_window", 0, cfg.grid.has_t());
  cfg.detector.eta = r.num("detector", "efficiency", 1.0, false);
  cfg.detector.symmetric = r.boolean("detector", "symmetric");
  cfg.detector.omega_filter = r.num("detector", "omega_filter", 0, false);

  std::string mode = r.text("run", "mode", "both");
  if (mode == "pwpa") cfg.run.mode = RunMode::pwpa;
  else if (mode == "mc") cfg.run.mode = RunMode::mc;
  else if (mode == "both") cfg.run.mode = RunMode::both;
  else throw ConfigError(origin + ": run.mode must be pwpa, mc or both");
  cfg.run.n_traj = static_cast<std::uint64_t>(r.integer("run", "n_traj", 1000, false));
  cfg.run.master_seed = static_cast<std::uint64_t>(r.integer("run", "master_seed", 20240811, false));
  cfg.run.workers = static_cast<int>(r.integer("run", "workers", 0, false));

  cfg.output.directory = r.text("output", "directory", "out");
  cfg.output.write_fields = r.boolean("output", "write_fields");

  cfg.scan.d_list = r.num_list("scan", "d_list");
  cfg.scan.dz_steps = static_cast<int>(r.integer("scan", "dz_steps", 0, false));
  cfg.scan.dy_steps = static_cast<int>(r.integer("scan", "dy_steps", 0, false));
  cfg.scan.dz_min = r.num("scan", "dz_min", 0, false);
  cfg.scan.dz_max = r.num("scan", "dz_max", 0, false);
  cfg.scan.dy_min = r.num("scan", "dy_min", 0, false);
  cfg.scan.dy_max = r.num("scan", "dy_max", 0, false);

  if (!r.missing.empty()) {
    std::string msg = origin + ": missing required keys:";
    for (auto& m : r.missing) msg += "\n  - " + m;
    throw ConfigError(msg);
  }
  auto unknown = rc.unconsumed();
  if (!unknown.empty()) {
    std::string msg = origin + ": unknown keys (strict mode):";
    for (auto& u : unknown) msg += "\n  - " + u;
    throw ConfigError(msg);
  }
  return cfg;
}

/// Canonical serialization; load(save(cfg)) reproduces cfg exactly and the
/// byte stream is the config-hash input.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  using config_detail::fmt_num;
  std::ostringstream os;
  os << "schema_version = 1\n";
  if (!cfg.name.empty()) os << "name = " << cfg.name << "\n";
  if (!cfg.description.empty()) os << "description = " << cfg.description << "\n";
  os << "\n[crystal]\n";
  os << "phase_match = " << to_string(cfg.crystal.phase_match) << "\n";
  os << "l_c = " << fmt_num(cfg.crystal.l_c) << "\n";
  os << "lambda_0 = " << fmt_num(cfg.crystal.lambda_0) << "\n";
  os << "lambda_1 = " << fmt_num(cfg.crystal.lambda_1) << "\n";
  os << "lambda_2 = " << fmt_num(cfg.crystal.lambda_2) << "\n";
  os << "n_0 = " << fmt_num(cfg.crystal.n_0) << "\n";
  os << "n_1 = " << fmt_num(cfg.crystal.n_1) << "\n";
  os << "n_2 = " << fmt_num(cfg.crystal.n_2) << "\n";
  os << "kp_0 = " << fmt_num(cfg.crystal.kp_0) << "\n";
  os << "kp_1 = " << fmt_num(cfg.crystal.kp_1) << "\n";
  os << "kp_2 = " << fmt_num(cfg.crystal.kp_2) << "\n";
  os << "kpp_0 = " << fmt_num(cfg.crystal.kpp_0) << "\n";
  os << "kpp_1 = " << fmt_num(cfg.crystal.kpp_1) << "\n";
  os << "kpp_2 = " << fmt_num(cfg.crystal.kpp_2) << "\n";
  os << "rho_0 = " << fmt_num(cfg.crystal.rho_0) << "\n";
  os << "rho_2 = " << fmt_num(cfg.crystal.rho_2) << "\n";
  os << "delta_0 = " << fmt_num(cfg.crystal.delta_0) << "\n";
  os << "sigma = " << fmt_num(cfg.crystal.sigma) << "\n";
  os << "\n[pump]\n";
  os << "amplitude = " << fmt_num(cfg.pump.amplitude) << "\n";
  os << "waist = " << fmt_num(cfg.pump.w_0) << "\n";
  os << "duration = " << fmt_num(cfg.pump.tau_0) << "\n";
  os << "\n[grid]\n";
  os << "dims = " << to_string(cfg.grid.dims) << "\n";
  os << "n_x = " << cfg.grid.n_x << "\n";
  if (cfg.grid.has_y()) os << "n_y = " << cfg.grid.n_y << "\n";
  if (cfg.grid.has_t()) os << "n_t = " << cfg.grid.n_t << "\n";
  os << "n_z = " << cfg.grid.n_z << "\n";
  os << "window_x = " << fmt_num(cfg.grid.l_x) << "\n";
  if (cfg.grid.has_y()) os << "window_y = " << fmt_num(cfg.grid.l_y) << "\n";
  if (cfg.grid.has_t()) os << "window_t = " << fmt_num(cfg.grid.t_win) << "\n";
  if (cfg.grid.band_limited_t) os << "band_limited_t = true\n";
  os << "\n[optics]\n";
  os << "kind = " << to_string(cfg.optics.kind) << "\n";
  if (cfg.optics.f != 0) os << "focal_length = " << fmt_num(cfg.optics.f) << "\n";
  if (cfg.optics.delta_z != 0) os << "delta_z = " << fmt_num(cfg.optics.delta_z) << "\n";
  if (cfg.optics.delta_y != 0) os << "delta_y = " << fmt_num(cfg.optics.delta_y) << "\n";
  if (cfg.optics.free_length != 0) os << "free_length = " << fmt_num(cfg.optics.free_length) << "\n";
  os << "\n[detector]\n";
  os << "plane = " << to_string(cfg.detector.plane) << "\n";
  os << "pixel_size = " << fmt_num(cfg.detector.d) << "\n";
  os << "center_1 = " << fmt_num(cfg.detector.center_1) << "\n";
  os << "center_2 = " << fmt_num(cfg.detector.center_2) << "\n";
  if (cfg.grid.has_t()) os << "time_window = " << fmt_num(cfg.detector.t_d) << "\n";
  os << "efficiency = " << fmt_num(cfg.detector.eta) << "\n";
  if (cfg.detector.symmetric) os << "symmetric = true\n";
  if (cfg.detector.omega_filter != 0) os << "omega_filter = " << fmt_num(cfg.detector.omega_filter) << "\n";
  os << "\n[run]\n";
  os << "mode = " << to_string(cfg.run.mode) << "\n";
  os << "n_traj = " << cfg.run.n_traj << "\n";
  os << "master_seed = " << cfg.run.master_seed << "\n";
  os << "workers = " << cfg.run.workers << "\n";
  os << "\n[output]\n";
  os << "directory = " << cfg.output.directory << "\n";
  if (cfg.output.write_fields) os << "write_fields = true\n";
  bool has_scan = !cfg.scan.d_list.empty() || cfg.scan.dz_steps > 0;
  if (has_scan) {
    os << "\n[scan]\n";
    if (!cfg.scan.d_list.empty()) {
      os << "d_list = ";
      for (std::size_t i = 0; i < cfg.scan.d_list.size(); ++i)
        os << (i ? "," : "") << fmt_num(cfg.scan.d_list[i]);
      os << "\n";
    }
    if (cfg.scan.dz_steps > 0) {
      os << "dz_steps = " << cfg.scan.dz_steps << "\n";
      os << "dz_min = " << fmt_num(cfg.scan.dz_min) << "\n";
      os << "dz_max = " << fmt_num(cfg.scan.dz_max) << "\n";
      os << "dy_steps = " << cfg.scan.dy_steps << "\n";
      os << "dy_min = " << fmt_num(cfg.scan.dy_min) << "\n";
      os << "dy_max = " << fmt_num(cfg.scan.dy_max) << "\n";
    }
  }
  return os.str();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), path);
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write config file: " + path);
  f << serialize_config(cfg);
}

/// Apply "section.key=value" overrides on top of a config document.
inline std::string apply_overrides(std::string text, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    auto eq = ov.find('=');
    auto dot = ov.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override must look like section.key=value: " + ov);
    std::string sec = ov.substr(0, dot);
    std::string key = ov.substr(dot + 1, eq - dot - 1);
    std::string val = ov.substr(eq + 1);
    // Rewrite in place if present, else append to the section (or create it).
    std::istringstream in(text);
    std::ostringstream out;
    std::string line, cur;
    bool replaced = false, section_seen = false;
    auto flush_append = [&](bool at_section_end) {
      if (!replaced && at_section_end && cur == sec && section_seen) {
        out << key << " = " << val << "\n";
        replaced = true;
      }
    };
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string t = config_detail::trim(lines[i]);
      if (!t.empty() && t.front() == '[' && t.back() == ']') {
        flush_append(true);
        cur = config_detail::trim(t.substr(1, t.size() - 2));
        if (cur == sec) section_seen = true;
        out << lines[i] << "\n";
        continue;
      }
      auto e = t.find('=');
      if (!replaced && cur == sec && e != std::string::npos &&
          config_detail::trim(t.substr(0, e)) == key) {
        out << key << " = " << val << "\n";
        replaced = true;
      } else {
        out << lines[i] << "\n";
      }
    }
    flush_append(true);
    if (!replaced) {
      if (!section_seen) out << "\n[" << sec << "]\n";
      out << key << " = " << val << "\n";
    }
    text = out.str();
  }
  return text;
}

/// FNV-1a hash of the canonical serialization, recorded in output metadata.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::string s = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

#ifndef TWINBEAM_PRESET_DIR
#define TWINBEAM_PRESET_DIR "presets"
#endif

inline std::string preset_directory() {
  if (const char* env = std::getenv("TWINBEAM_PRESETS")) return env;
  return TWINBEAM_PRESET_DIR;
}

struct PresetInfo {
  std::string name;
  std::string description;
  std::string path;
};

inline std::vector<PresetInfo> list_presets(const std::string& dir = preset_directory()) {
  std::vector<PresetInfo> out;
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".cfg") continue;
    try {
      ExperimentConfig cfg = load_config(e.path().string());
      out.push_back({cfg.name.empty() ? e.path().stem().string() : cfg.name, cfg.description,
                     e.path().string()});
    } catch (const ConfigError&) {
      out.push_back({e.path().stem().string(), "(unparseable preset)", e.path().string()});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

inline std::string preset_path(const std::string& name, const std::string& dir = preset_directory()) {
  namespace fs = std::filesystem;
  fs::path p = fs::path(dir) / (name + ".cfg");
  if (!fs::exists(p)) throw ConfigError("preset not found: " + name + " (searched " + dir + ")");
  return p.string();
}

}  // namespace twinbeam

#endif  // TWINBEAM_CONFIG_HPP
