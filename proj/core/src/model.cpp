#include "jasdm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace jasdm {

namespace {

constexpr double kAlignTolerance = 1e-12;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

[[noreturn]] void fail(const std::string& what) { throw ModelError(what); }

}  // namespace

DelayCoefficient DelayCoefficient::constant() {
  return {Kind::constant, 1.0, nullptr};
}

DelayCoefficient DelayCoefficient::power(double gamma) {
  if (!positive_finite(gamma)) fail("power delay coefficient needs gamma > 0");
  return {Kind::power, gamma, nullptr};
}

DelayCoefficient DelayCoefficient::custom(std::function<double(double)> fn,
                                          double holder_gamma) {
  if (!fn) fail("custom delay coefficient needs a callable");
  if (!positive_finite(holder_gamma))
    fail("custom delay coefficient needs a declared Hoelder exponent > 0");
  return {Kind::custom, holder_gamma, std::move(fn)};
}

double DelayCoefficient::operator()(double x) const {
  if (!(x >= 0.0)) {
    std::ostringstream os;
    os << "delay coefficient evaluated at negative argument " << x;
    throw std::domain_error(os.str());
  }
  switch (kind_) {
    case Kind::constant:
      return 1.0;
    case Kind::power:
      return gamma_ == 1.0 ? x : std::pow(x, gamma_);
    case Kind::custom:
      return fn_(x);
  }
  return 1.0;
}

JumpCoefficient JumpCoefficient::zero() {
  return {Kind::zero, 0.0, 0.0, false, nullptr};
}

JumpCoefficient JumpCoefficient::linear(double scale) {
  return {Kind::linear, scale, std::abs(scale), scale > 0.0, nullptr};
}

JumpCoefficient JumpCoefficient::sine(double scale) {
  return {Kind::sine, scale, std::abs(scale), false, nullptr};
}

JumpCoefficient JumpCoefficient::saturating(double scale) {
  return {Kind::saturating, scale, std::abs(scale), scale > 0.0, nullptr};
}

JumpCoefficient JumpCoefficient::custom(std::function<double(double)> fn,
                                        double lipschitz, bool positive) {
  if (!fn) fail("custom jump coefficient needs a callable");
  if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
    fail("custom jump coefficient needs a declared Lipschitz bound >= 0");
  return {Kind::custom, 1.0, lipschitz, positive, std::move(fn)};
}

double JumpCoefficient::intrinsic_lipschitz() const noexcept {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::linear:
    case Kind::sine:
    case Kind::saturating:
      return std::abs(scale_);
    case Kind::custom:
      return lipschitz_;
  }
  return lipschitz_;
}

JumpCoefficient JumpCoefficient::with_declared_lipschitz(
    double lipschitz) const {
  if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
    fail("declared Lipschitz bound must be finite and >= 0");
  JumpCoefficient copy = *this;
  copy.lipschitz_ = lipschitz;
  return copy;
}

double JumpCoefficient::operator()(double x) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::linear:
      return scale_ * x;
    case Kind::sine:
      return scale_ * std::sin(x);
    case Kind::saturating:
      return scale_ * x / (1.0 + x);
    case Kind::custom:
      return fn_(x);
  }
  return 0.0;
}

InitialSegment InitialSegment::constant(double value) {
  return {value, nullptr};
}

InitialSegment InitialSegment::function(std::function<double(double)> fn) {
  if (!fn) fail("initial segment needs a callable");
  return {std::numeric_limits<double>::quiet_NaN(), std::move(fn)};
}

int ModelSpec::delay_periods() const {
  const double ratio = horizon / tau;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > kAlignTolerance * rounded)
    fail("horizon must be a positive integer multiple of tau");
  return static_cast<int>(rounded);
}

void ModelSpec::validate() const {
  if (!positive_finite(k1)) fail("k1 must be > 0");
  if (!positive_finite(k2)) fail("k2 must be > 0");
  if (!(k3 >= 0.0) || !std::isfinite(k3)) fail("k3 must be >= 0");
  if (!(alpha >= 0.5 && alpha < 1.0)) fail("alpha must lie in [1/2, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
  if (!positive_finite(tau)) fail("tau must be > 0");
  if (!positive_finite(horizon)) fail("horizon must be > 0");
  delay_periods();

  // Only the history grid nodes are probed here; simulate_path evaluates
  // the segment at every lookup anyway.
  constexpr int kProbes = 64;
  for (int i = 0; i <= kProbes; ++i) {
    const double t = -tau + tau * i / kProbes;
    const double v = initial_segment(t);
    if (!positive_finite(v)) {
      std::ostringstream os;
      os << "initial segment must be strictly positive, got " << v
         << " at t=" << t;
      fail(os.str());
    }
  }

  if (!(jump_coeff.lipschitz() <= 1.0) && !jump_coeff.positive())
    fail("jump coefficient needs |g'| < L <= 1, or g > 0 on x > 0");
}

ModelSpec ModelSpec::with_horizon(double new_horizon) const {
  ModelSpec copy = *this;
  copy.horizon = new_horizon;
  return copy;
}

SchemeConfig SchemeConfig::from_delta(double tau, double delta, double theta,
                                      double m) {
  if (!positive_finite(tau) || !positive_finite(delta))
    fail("tau and delta must be > 0");
  const double ratio = tau / delta;
  const double l = std::round(ratio);
  if (l < 2.0 || std::abs(ratio - l) > kAlignTolerance * l) {
    std::ostringstream os;
    os << "delta=" << delta << " is not tau/l for an integer l >= 2";
    fail(os.str());
  }
  SchemeConfig config;
  config.theta = theta;
  config.m = m;
  config.steps_per_delay = static_cast<int>(l);
  config.validate();
  return config;
}

void SchemeConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) fail("theta must lie in [0, 1]");
  if (!(m > 0.0 && m <= 0.25)) fail("m must lie in (0, 1/4]");
  if (steps_per_delay < 2) fail("steps per delay l must be >= 2");
}

AssumptionBReport validate_assumption_b(const ModelSpec& model,
                                        const SchemeConfig& config) {
  AssumptionBReport report;
  const double explicit_drift = model.k2 * (1.0 - config.theta);
  const double base = 1.0 / (explicit_drift + model.k3 * model.k3 / 4.0);
  report.components[0] = base * base;
  report.components[1] = report.components[0] * report.components[0];
  report.components[2] =
      explicit_drift > 0.0
          ? (4.0 - model.k3 * model.k3) / (4.0 * explicit_drift)
          : std::numeric_limits<double>::infinity();
  report.bound = *std::min_element(report.components.begin(),
                                   report.components.end());
  report.delta = config.delta(model.tau);
  report.satisfied = report.delta < report.bound;
  return report;
}

JumpStepReport validate_jump_step(const ModelSpec& model,
                                  const SchemeConfig& config) {
  JumpStepReport report;
  const double L = model.lipschitz_L();
  const double inv_l = L > 0.0 ? 1.0 / L : std::numeric_limits<double>::infinity();
  report.bound = model.lambda > 0.0 ? std::min(inv_l, 1.0) / model.lambda
                                    : std::numeric_limits<double>::infinity();
  report.delta = config.delta(model.tau);
  report.satisfied = report.delta < report.bound;
  return report;
}

bool in_positivity_regime(const ModelSpec& model, const SchemeConfig& config) {
  return validate_assumption_b(model, config).satisfied &&
         validate_jump_step(model, config).satisfied;
}

double eval_delay_coeff(const ModelSpec& model, double x) {
  return model.delay_coeff(x);
}

double eval_jump_coeff(const ModelSpec& model, double x) {
  return model.jump_coeff(x);
}

ModelSpec reference_model(double alpha, double gamma) {
  ModelSpec model;
  model.k1 = 0.24;
  model.k2 = 3.0;
  model.k3 = 0.4;
  model.alpha = alpha;
  model.lambda = 1.0;
  model.tau = 1.0;
  model.horizon = 1.0;
  model.delay_coeff = DelayCoefficient::power(gamma);
  model.jump_coeff = JumpCoefficient::linear(2.0).with_declared_lipschitz(1.0);
  model.initial_segment = InitialSegment::constant(1.0);
  return model;
}

std::string to_string(DelayCoefficient::Kind kind) {
  switch (kind) {
    case DelayCoefficient::Kind::constant:
      return "constant";
    case DelayCoefficient::Kind::power:
      return "power";
    case DelayCoefficient::Kind::custom:
      return "custom";
  }
  return "unknown";
}

std::string to_string(JumpCoefficient::Kind kind) {
  switch (kind) {
    case JumpCoefficient::Kind::zero:
      return "zero";
    case JumpCoefficient::Kind::linear:
      return "linear";
    case JumpCoefficient::Kind::sine:
      return "sine";
    case JumpCoefficient::Kind::saturating:
      return "saturating";
    case JumpCoefficient::Kind::custom:
      return "custom";
  }
  return "unknown";
}

}  // namespace jasdm
