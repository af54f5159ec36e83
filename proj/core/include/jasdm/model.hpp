#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>

namespace jasdm {

/// Raised when a model or scheme parameterization violates its structural
/// invariants (ranges, delay alignment, step-size form).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Delay coefficient b(.) acting on the lagged state x_{t - tau}.
class DelayCoefficient {
 public:
  enum class Kind { constant, power, custom };

  /// b(x) = 1 (plain CIR/CEV diffusion, no delay dependence).
  static DelayCoefficient constant();
  /// b(x) = x^gamma, gamma > 0.
  static DelayCoefficient power(double gamma);
  /// User function on [0, inf) with a declared Hoelder exponent.
  static DelayCoefficient custom(std::function<double(double)> fn,
                                 double holder_gamma);

  Kind kind() const noexcept { return kind_; }
  double holder_gamma() const noexcept { return gamma_; }

  /// Throws std::domain_error for x < 0; b is only declared on the
  /// nonnegative half-line.
  double operator()(double x) const;

 private:
  DelayCoefficient(Kind kind, double gamma, std::function<double(double)> fn)
      : kind_(kind), gamma_(gamma), fn_(std::move(fn)) {}

  Kind kind_;
  double gamma_;
  std::function<double(double)> fn_;
};

/// Jump coefficient g(.) multiplying the compensated Poisson increment.
class JumpCoefficient {
 public:
  enum class Kind { zero, linear, sine, saturating, custom };

  static JumpCoefficient zero();
  /// g(x) = scale * x
  static JumpCoefficient linear(double scale);
  /// g(x) = scale * sin(x)
  static JumpCoefficient sine(double scale);
  /// g(x) = scale * x / (1 + x)
  static JumpCoefficient saturating(double scale);
  static JumpCoefficient custom(std::function<double(double)> fn,
                                double lipschitz, bool positive);

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }

  /// Declared bound L on |g'|. Built-ins default to |scale| (1 for zero).
  double lipschitz() const noexcept { return lipschitz_; }
  /// Whether g(x) > 0 for every x > 0.
  bool positive() const noexcept { return positive_; }

  /// Bound on |g'| implied by the formula itself, independent of any
  /// declared override. Equals lipschitz() for custom coefficients.
  double intrinsic_lipschitz() const noexcept;

  /// Same coefficient with a different declared Lipschitz bound.
  JumpCoefficient with_declared_lipschitz(double lipschitz) const;

  double operator()(double x) const;

 private:
  JumpCoefficient(Kind kind, double scale, double lipschitz, bool positive,
                  std::function<double(double)> fn)
      : kind_(kind),
        scale_(scale),
        lipschitz_(lipschitz),
        positive_(positive),
        fn_(std::move(fn)) {}

  Kind kind_;
  double scale_;
  double lipschitz_;
  bool positive_;
  std::function<double(double)> fn_;
};

/// Initial segment xi on [-tau, 0]; evaluated on demand so delay lookups
/// into the history are exact.
class InitialSegment {
 public:
  static InitialSegment constant(double value);
  static InitialSegment function(std::function<double(double)> fn);

  /// Returns the constant value for constant segments, NaN otherwise.
  double constant_value() const noexcept { return value_; }
  bool is_constant() const noexcept { return !fn_; }

  double operator()(double t) const { return fn_ ? fn_(t) : value_; }

 private:
  InitialSegment(double value, std::function<double(double)> fn)
      : value_(value), fn_(std::move(fn)) {}

  double value_;
  std::function<double(double)> fn_;
};

/// Parameters of the jump-delay CIR/CEV equation
///
///   dx = (k1 - k2 x) dt + k3 b(x_{t-tau}) x^alpha dW + g(x) dN~,
///   x = xi on [-tau, 0].
struct ModelSpec {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double alpha = 0.5;
  double lambda = 0.0;
  double tau = 1.0;
  double horizon = 1.0;
  DelayCoefficient delay_coeff = DelayCoefficient::constant();
  JumpCoefficient jump_coeff = JumpCoefficient::zero();
  InitialSegment initial_segment = InitialSegment::constant(1.0);

  double holder_gamma() const noexcept { return delay_coeff.holder_gamma(); }
  double lipschitz_L() const noexcept { return jump_coeff.lipschitz(); }
  bool jump_positive() const noexcept { return jump_coeff.positive(); }

  /// Number of whole delay periods in the horizon.
  int delay_periods() const;

  /// Throws ModelError on the first violated invariant. Zero k3 and zero
  /// lambda are accepted (deterministic and jump-free reductions).
  void validate() const;

  ModelSpec with_horizon(double horizon) const;
};

/// Which node value a delay lookup returns when t - tau lands on a jump node.
enum class DelayValue { post_jump, pre_jump };

/// Discretization settings. The maximum step is always tau / l for an
/// integer l >= 2 so that the base grid stays aligned with the delay.
struct SchemeConfig {
  double theta = 0.5;
  double m = 0.25;
  int steps_per_delay = 32;
  DelayValue delay_value = DelayValue::post_jump;

  double delta(double tau) const noexcept { return tau / steps_per_delay; }

  /// Builds a config from an explicit step size, rejecting any delta that
  /// is not tau / l to one part in 1e12.
  static SchemeConfig from_delta(double tau, double delta, double theta = 0.5,
                                 double m = 0.25);

  void validate() const;
};

struct AssumptionBReport {
  /// (1/(k2(1-theta)+k3^2/4))^2, its fourth power, (4-k3^2)/(4 k2 (1-theta)).
  std::array<double, 3> components{};
  double bound = 0.0;
  double delta = 0.0;
  bool satisfied = false;
};

struct JumpStepReport {
  double bound = 0.0;
  double delta = 0.0;
  bool satisfied = false;
};

/// Step-size conditions under which the under-root quantity of the scheme
/// is provably nonnegative. The third component is +inf at theta = 1.
AssumptionBReport validate_assumption_b(const ModelSpec& model,
                                        const SchemeConfig& config);

/// delta < (1/lambda) * min(1/L, 1); keeps the compensated jump update
/// strictly positive. With lambda = 0 the bound is +inf.
JumpStepReport validate_jump_step(const ModelSpec& model,
                                  const SchemeConfig& config);

/// Both step conditions hold.
bool in_positivity_regime(const ModelSpec& model, const SchemeConfig& config);

double eval_delay_coeff(const ModelSpec& model, double x);
double eval_jump_coeff(const ModelSpec& model, double x);

/// Table-2 style model: k1=0.24, k2=3, k3=0.4, b(x)=x^gamma, g(x)=2x,
/// lambda=tau=T=1, xi = 1. The declared Lipschitz bound is 1.
ModelSpec reference_model(double alpha, double gamma);

std::string to_string(DelayCoefficient::Kind kind);
std::string to_string(JumpCoefficient::Kind kind);

}  // namespace jasdm
