#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jasdm/model.hpp"
#include "jasdm/noise.hpp"

namespace jasdm {

/// The compensated jump update produced a nonpositive state. Only possible
/// outside the step-size regime delta < (1/lambda) min(1/L, 1).
class PositivityViolation : public std::runtime_error {
 public:
  PositivityViolation(double y_minus, double dt, bool jump_flag, double result);

  double y_minus() const noexcept { return y_minus_; }
  double dt() const noexcept { return dt_; }
  bool jump_flag() const noexcept { return jump_flag_; }
  double result() const noexcept { return result_; }

 private:
  double y_minus_;
  double dt_;
  bool jump_flag_;
  double result_;
};

struct StepInputs {
  double y_current = 0.0;
  double y_delayed = 0.0;
  double dt = 0.0;
  double dW = 0.0;
  bool jump_flag = false;
};

/// Per-step pieces of the semi-discrete diffusion update
/// y_- = (sqrt(inner) + noise_coeff * dW)^2.
struct DiffusionTerms {
  double inner = 0.0;        ///< under-root quantity, clamped at 0
  double noise_coeff = 0.0;  ///< coefficient of dW
  bool clamped = false;      ///< raw under-root quantity was negative
};

DiffusionTerms jasdm_terms(double y, double y_delayed, double dt,
                           const ModelSpec& model, const SchemeConfig& config);

/// Under-root quantity
///   y (1 - k2 dt/(1 + k2 theta dt)) + k1 dt/(1 + k2 theta dt)
///     - k3^2/(4 (1 + k2 theta dt)^2) * b^2/(1 + b dt^m)^2 * y^(2 alpha - 1) dt
/// with b = b(y_delayed), clamped below at zero.
double jasdm_inner(double y, double y_delayed, double dt, const ModelSpec& model,
                   const SchemeConfig& config);

/// Left limit y_{t_{k+1}-} = z^2; increments *clamp_count when the
/// under-root quantity had to be clamped.
double jasdm_diffusion_step(const StepInputs& inputs, const ModelSpec& model,
                            const SchemeConfig& config,
                            std::size_t* clamp_count = nullptr);

/// y_- + g(y_-) (dN - lambda dt). Throws PositivityViolation on a
/// nonpositive result.
double jasdm_jump_update(double y_minus, double dt, bool jump_flag,
                         const ModelSpec& model);

/// Values of one path on a jump-adapted grid. Arrays are indexed like the
/// grid nodes, history prefix included; on [-tau, 0] both arrays hold xi.
struct Trajectory {
  JumpAdaptedGrid grid;
  std::vector<double> pre_jump;
  std::vector<double> post_jump;
  std::size_t clamp_count = 0;

  double terminal() const { return post_jump.back(); }
  double min_value() const;
  std::size_t negative_count() const;
};

/// Delay value at time t: xi(t) for t <= 0, otherwise the value at the
/// greatest node <= t. `frontier` is the last node index already computed.
double delay_lookup(const Trajectory& traj, double t, const ModelSpec& model,
                    DelayValue which = DelayValue::post_jump);
double delay_lookup(const Trajectory& traj, double t, const ModelSpec& model,
                    DelayValue which, std::size_t frontier);

/// Runs the jump-adapted semi-discrete scheme over the whole grid.
/// `increments` holds one Wiener increment per interval on [0, T]; jump
/// flags come from the grid.
Trajectory simulate_path(const ModelSpec& model, const SchemeConfig& config,
                         const JumpAdaptedGrid& grid, std::span<const double> increments);

/// Explicit Euler-Maruyama comparator with |x| inside fractional powers and
/// the same compensated jump update; negative values are kept, not clamped.
Trajectory euler_maruyama_path(const ModelSpec& model, const JumpAdaptedGrid& grid,
                               std::span<const double> increments);

enum class SchemeKind { jasdm, euler_maruyama };

std::string to_string(SchemeKind kind);

/// CSV with columns t,y_pre,y_post,is_jump, one row per node on [0, T],
/// 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace jasdm
