// Shared fixtures: the shipped presets, loaded once per test binary.
#ifndef TWINBEAM_TESTS_HELPERS_HPP
#define TWINBEAM_TESTS_HELPERS_HPP

#include "twinbeam/config.hpp"

namespace twinbeam::testing {

inline const ExperimentConfig& lbo_config() {
  static ExperimentConfig cfg = load_config(preset_path("lbo-far-field"));
  return cfg;
}

inline const ExperimentConfig& bbo_near_config() {
  static ExperimentConfig cfg = load_config(preset_path("bbo-near-field"));
  return cfg;
}

inline const ExperimentConfig& bbo_far_config() {
  static ExperimentConfig cfg = load_config(preset_path("bbo-far-field"));
  return cfg;
}

}  // namespace twinbeam::testing

#endif
