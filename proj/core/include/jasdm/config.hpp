#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "jasdm/model.hpp"

namespace jasdm {

/// Malformed or invalid configuration. line() is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Model and scheme settings read from a config file. The step size is
/// delta = tau * 2^-delta_exponent.
///
///   k1: 0.24
///   k2: 3
///   k3: 0.4
///   alpha: 0.5
///   lambda: 1
///   tau: 1
///   horizon: 1
///   theta: 0.5
///   m: 0.25
///   delta_exponent: 5
///   delay_coeff: {kind: power, gamma: 1}
///   jump_coeff: {kind: linear, delta_scale: 2, lipschitz_L: 1, positive: true}
///   initial_segment: {kind: constant, value: 1}
struct LoadedConfig {
  ModelSpec model;
  SchemeConfig scheme;
  int delta_exponent = 5;
  std::vector<std::string> warnings;
};

LoadedConfig load_config_from_string(const std::string& text);
LoadedConfig load_config(const std::filesystem::path& path);

/// Serializes back to the file format (flow-style YAML, 17 significant
/// digits). Custom coefficients and non-constant segments cannot be
/// represented and raise ConfigError.
std::string dump_config(const LoadedConfig& config);

/// Steps per delay for an exponent: 2^e.
int steps_for_exponent(int exponent);

}  // namespace jasdm
