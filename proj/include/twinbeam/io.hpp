#ifndef TWINBEAM_IO_HPP
#define TWINBEAM_IO_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "twinbeam/config.hpp"

namespace twinbeam {

inline constexpr const char* twinbeam_version = "1.0.0";

/// Tab-separated table with a self-describing '#' metadata header. Every
/// result file carries enough metadata to re-run the experiment exactly.
class TableWriter {
 public:
  TableWriter(const std::string& path) : f_(path) {
    if (!f_) throw ConfigError("cannot open output file: " + path);
    f_.precision(12);
  }

  void meta(const std::string& key, const std::string& value) {
    f_ << "# " << key << ": " << value << "\n";
  }
  void meta(const std::string& key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    meta(key, std::string(buf));
  }
  void meta(const std::string& key, std::uint64_t value) { meta(key, std::to_string(value)); }

  void provenance(const ExperimentConfig& cfg, double wall_seconds = -1) {
    meta("generator", std::string("twinbeam ") + twinbeam_version);
    meta("config_hash", config_hash(cfg));
    meta("master_seed", cfg.run.master_seed);
    meta("n_traj", cfg.run.n_traj);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s n_x=%d n_t=%d n_z=%d window_x=%.9g window_t=%.9g",
                  to_string(cfg.grid.dims).c_str(), cfg.grid.n_x, cfg.grid.n_t, cfg.grid.n_z,
                  cfg.grid.l_x, cfg.grid.t_win);
    meta("grid", std::string(buf));
    if (wall_seconds >= 0) meta("wall_seconds", wall_seconds);
  }

  void columns(const std::vector<std::string>& names) {
    f_ << "#";
    for (const auto& n : names) f_ << "\t" << n;
    f_ << "\n";
  }

  template <typename... Ts>
  void row(Ts... vals) {
    bool first = true;
    ((f_ << (first ? (first = false, "") : "\t") << vals), ...);
    f_ << "\n";
  }

 private:
  std::ofstream f_;
};

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir);
}

}  // namespace twinbeam

#endif  // TWINBEAM_IO_HPP
