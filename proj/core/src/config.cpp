#include "jasdm/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace jasdm {

namespace {

std::string with_line(const std::string& what, int line) {
  if (line <= 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}

int line_of(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where, line_of(kv.first));
  }
}

const YAML::Node require(const YAML::Node& map, const std::string& key, int parent_line) {
  const YAML::Node node = map[key];
  if (!node) throw ConfigError("missing required key '" + key + "'", parent_line);
  return node;
}

template <class T>
T read_as(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("key '" + key + "' has an invalid value", line_of(node));
  }
}

double read_number(const YAML::Node& map, const std::string& key, int parent_line) {
  return read_as<double>(require(map, key, parent_line), key);
}

double read_number_or(const YAML::Node& map, const std::string& key, double fallback) {
  const YAML::Node node = map[key];
  return node ? read_as<double>(node, key) : fallback;
}

YAML::Node require_map(const YAML::Node& map, const std::string& key, int parent_line) {
  YAML::Node node = require(map, key, parent_line);
  if (!node.IsMap()) throw ConfigError("key '" + key + "' must be a mapping", line_of(node));
  return node;
}

DelayCoefficient read_delay(const YAML::Node& node) {
  reject_unknown(node, {"kind", "gamma"}, "delay_coeff");
  const int line = line_of(node);
  const auto kind = read_as<std::string>(require(node, "kind", line), "kind");
  if (kind == "constant") return DelayCoefficient::constant();
  if (kind == "power") {
    const double gamma = read_number(node, "gamma", line);
    if (!(gamma > 0.0)) throw ConfigError("delay_coeff.gamma must be > 0", line);
    return DelayCoefficient::power(gamma);
  }
  throw ConfigError("delay_coeff.kind must be 'constant' or 'power', got '" + kind + "'", line);
}

JumpCoefficient read_jump(const YAML::Node& node, std::vector<std::string>& warnings) {
  reject_unknown(node, {"kind", "delta_scale", "lipschitz_L", "positive"}, "jump_coeff");
  const int line = line_of(node);
  const auto kind = read_as<std::string>(require(node, "kind", line), "kind");
  JumpCoefficient coeff = JumpCoefficient::zero();
  if (kind == "zero") {
    coeff = JumpCoefficient::zero();
  } else {
    const double scale = read_number(node, "delta_scale", line);
    if (kind == "linear") {
      coeff = JumpCoefficient::linear(scale);
    } else if (kind == "sine") {
      coeff = JumpCoefficient::sine(scale);
    } else if (kind == "saturating") {
      coeff = JumpCoefficient::saturating(scale);
    } else {
      throw ConfigError(
          "jump_coeff.kind must be one of zero, linear, sine, saturating; got '" + kind + "'", line);
    }
  }
  if (const YAML::Node positive = node["positive"]) {
    if (read_as<bool>(positive, "positive") != coeff.positive())
      throw ConfigError("jump_coeff.positive disagrees with the sign of the '" + kind +
                            "' coefficient",
                        line_of(positive));
  }
  if (const YAML::Node declared = node["lipschitz_L"]) {
    const double L = read_as<double>(declared, "lipschitz_L");
    if (!(L >= 0.0)) throw ConfigError("jump_coeff.lipschitz_L must be >= 0", line_of(declared));
    if (L < coeff.intrinsic_lipschitz()) {
      std::ostringstream os;
      os << "declared lipschitz_L=" << L << " is below the bound " << coeff.intrinsic_lipschitz()
         << " of the " << kind << " jump coefficient";
      warnings.push_back(os.str());
    }
    coeff = coeff.with_declared_lipschitz(L);
  }
  return coeff;
}

InitialSegment read_segment(const YAML::Node& node) {
  reject_unknown(node, {"kind", "value"}, "initial_segment");
  const int line = line_of(node);
  const auto kind = read_as<std::string>(require(node, "kind", line), "kind");
  if (kind != "constant")
    throw ConfigError("initial_segment.kind must be 'constant' in config files", line);
  return InitialSegment::constant(read_number(node, "value", line));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, int line)
    : std::runtime_error(with_line(what, line)), line_(line) {}

int steps_for_exponent(int exponent) {
  if (exponent < 1 || exponent > 30)
    throw ConfigError("delta exponent must lie in [1, 30], got " + std::to_string(exponent));
  return 1 << exponent;
}

LoadedConfig load_config_from_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping of keys to values", line_of(root));
  reject_unknown(root,
                 {"k1", "k2", "k3", "alpha", "lambda", "tau", "horizon", "theta", "m",
                  "delta_exponent", "delay_coeff", "jump_coeff", "initial_segment"},
                 "config");

  LoadedConfig out;
  const int line = 1;
  ModelSpec& model = out.model;
  model.k1 = read_number(root, "k1", line);
  model.k2 = read_number(root, "k2", line);
  model.k3 = read_number(root, "k3", line);
  model.alpha = read_number(root, "alpha", line);
  model.lambda = read_number(root, "lambda", line);
  model.tau = read_number(root, "tau", line);
  model.horizon = read_number(root, "horizon", line);
  model.delay_coeff = read_delay(require_map(root, "delay_coeff", line));
  model.jump_coeff = read_jump(require_map(root, "jump_coeff", line), out.warnings);
  model.initial_segment = read_segment(require_map(root, "initial_segment", line));

  out.scheme.theta = read_number_or(root, "theta", 0.5);
  out.scheme.m = read_number_or(root, "m", 0.25);
  if (const YAML::Node e = root["delta_exponent"]) {
    out.delta_exponent = read_as<int>(e, "delta_exponent");
    try {
      out.scheme.steps_per_delay = steps_for_exponent(out.delta_exponent);
    } catch (const ConfigError& err) {
      throw ConfigError(err.what(), line_of(e));
    }
  } else {
    out.scheme.steps_per_delay = steps_for_exponent(out.delta_exponent);
  }

  try {
    model.validate();
    out.scheme.validate();
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return load_config_from_string(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what(), e.line());
  }
}

std::string dump_config(const LoadedConfig& config) {
  const ModelSpec& m = config.model;
  std::ostringstream os;
  os << "k1: " << fmt(m.k1) << "\n"
     << "k2: " << fmt(m.k2) << "\n"
     << "k3: " << fmt(m.k3) << "\n"
     << "alpha: " << fmt(m.alpha) << "\n"
     << "lambda: " << fmt(m.lambda) << "\n"
     << "tau: " << fmt(m.tau) << "\n"
     << "horizon: " << fmt(m.horizon) << "\n"
     << "theta: " << fmt(config.scheme.theta) << "\n"
     << "m: " << fmt(config.scheme.m) << "\n"
     << "delta_exponent: " << config.delta_exponent << "\n";

  switch (m.delay_coeff.kind()) {
    case DelayCoefficient::Kind::constant:
      os << "delay_coeff: {kind: constant}\n";
      break;
    case DelayCoefficient::Kind::power:
      os << "delay_coeff: {kind: power, gamma: " << fmt(m.delay_coeff.holder_gamma()) << "}\n";
      break;
    case DelayCoefficient::Kind::custom:
      throw ConfigError("custom delay coefficients cannot be written to a config file");
  }

  const JumpCoefficient& g = m.jump_coeff;
  if (g.kind() == JumpCoefficient::Kind::custom)
    throw ConfigError("custom jump coefficients cannot be written to a config file");
  os << "jump_coeff: {kind: " << to_string(g.kind());
  if (g.kind() != JumpCoefficient::Kind::zero) os << ", delta_scale: " << fmt(g.scale());
  os << ", lipschitz_L: " << fmt(g.lipschitz())
     << ", positive: " << (g.positive() ? "true" : "false") << "}\n";

  if (!m.initial_segment.is_constant())
    throw ConfigError("only constant initial segments can be written to a config file");
  os << "initial_segment: {kind: constant, value: " << fmt(m.initial_segment.constant_value())
     << "}\n";
  return os.str();
}

}  // namespace jasdm
