#include "jasdm/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace jasdm {

namespace {

/// y^p for y >= 0 with 0^0 = 1.
double state_power(double y, double p) {
  if (p == 0.0) return 1.0;
  if (y == 0.0) return 0.0;
  return std::pow(y, p);
}

std::string violation_message(double y_minus, double dt, bool jump_flag, double result) {
  std::ostringstream os;
  os.precision(17);
  os << "jump update lost positivity: y_minus=" << y_minus << " dt=" << dt
     << " jump=" << (jump_flag ? 1 : 0) << " result=" << result;
  return os.str();
}

// Tolerance when locating t - tau on the grid; absorbs the rounding of
// n * tau / l - tau.
double lookup_tolerance(const ModelSpec& model) { return 1e-12 * model.tau; }

/// Monotone cursor over the grid for successive delay lookups at t_k - tau.
class DelayCursor {
 public:
  DelayCursor(const Trajectory& traj, const ModelSpec& model, DelayValue which)
      : traj_(traj), model_(model), which_(which), tol_(lookup_tolerance(model)) {}

  double at(double t, std::size_t frontier) {
    if (t <= tol_) return model_.initial_segment(std::min(t, 0.0));
    const auto& grid = traj_.grid;
    if (pos_ < grid.origin()) pos_ = grid.origin();
    while (pos_ + 1 <= frontier && grid.time(pos_ + 1) <= t + tol_) ++pos_;
    if (which_ == DelayValue::pre_jump && grid.is_jump(pos_)) return traj_.pre_jump[pos_];
    return traj_.post_jump[pos_];
  }

 private:
  const Trajectory& traj_;
  const ModelSpec& model_;
  DelayValue which_;
  double tol_;
  std::size_t pos_ = 0;
};

Trajectory init_trajectory(const ModelSpec& model, const JumpAdaptedGrid& grid,
                           std::span<const double> increments) {
  if (increments.size() != grid.interval_count()) {
    std::ostringstream os;
    os << "expected " << grid.interval_count() << " increments, got " << increments.size();
    throw std::invalid_argument(os.str());
  }
  if (grid.tau() != model.tau || grid.horizon() != model.horizon)
    throw std::invalid_argument("grid does not match the model's tau and horizon");
  Trajectory traj;
  traj.grid = grid;
  traj.pre_jump.assign(grid.size(), 0.0);
  traj.post_jump.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i <= grid.origin(); ++i) {
    const double xi = model.initial_segment(grid.time(i));
    traj.pre_jump[i] = xi;
    traj.post_jump[i] = xi;
  }
  return traj;
}

}  // namespace

PositivityViolation::PositivityViolation(double y_minus, double dt, bool jump_flag,
                                         double result)
    : std::runtime_error(violation_message(y_minus, dt, jump_flag, result)),
      y_minus_(y_minus),
      dt_(dt),
      jump_flag_(jump_flag),
      result_(result) {}

DiffusionTerms jasdm_terms(double y, double y_delayed, double dt,
                           const ModelSpec& model, const SchemeConfig& config) {
  const double implicit = 1.0 + model.k2 * config.theta * dt;
  const double b = model.delay_coeff(y_delayed);
  const double damped_b = b / (1.0 + b * std::pow(dt, config.m));

  const double drift = y * (1.0 - model.k2 * dt / implicit) + model.k1 * dt / implicit;
  const double correction = model.k3 * model.k3 / (4.0 * implicit * implicit) *
                            damped_b * damped_b *
                            state_power(y, 2.0 * model.alpha - 1.0) * dt;

  DiffusionTerms terms;
  const double raw = drift - correction;
  terms.clamped = raw < 0.0;
  terms.inner = terms.clamped ? 0.0 : raw;
  terms.noise_coeff = model.k3 / (2.0 * implicit) * damped_b *
                      state_power(y, model.alpha - 0.5);
  return terms;
}

double jasdm_inner(double y, double y_delayed, double dt, const ModelSpec& model,
                   const SchemeConfig& config) {
  return jasdm_terms(y, y_delayed, dt, model, config).inner;
}

double jasdm_diffusion_step(const StepInputs& in, const ModelSpec& model,
                            const SchemeConfig& config, std::size_t* clamp_count) {
  const DiffusionTerms terms = jasdm_terms(in.y_current, in.y_delayed, in.dt, model, config);
  if (terms.clamped && clamp_count) ++*clamp_count;
  const double z = std::sqrt(terms.inner) + terms.noise_coeff * in.dW;
  return z * z;
}

double jasdm_jump_update(double y_minus, double dt, bool jump_flag,
                         const ModelSpec& model) {
  const double compensated = (jump_flag ? 1.0 : 0.0) - model.lambda * dt;
  const double result = y_minus + model.jump_coeff(y_minus) * compensated;
  if (!(result > 0.0)) throw PositivityViolation(y_minus, dt, jump_flag, result);
  return result;
}

double Trajectory::min_value() const {
  return std::min(*std::min_element(pre_jump.begin(), pre_jump.end()),
                  *std::min_element(post_jump.begin(), post_jump.end()));
}

std::size_t Trajectory::negative_count() const {
  const auto negative = [](double v) { return v < 0.0; };
  return static_cast<std::size_t>(std::count_if(pre_jump.begin(), pre_jump.end(), negative) +
                                  std::count_if(post_jump.begin(), post_jump.end(), negative));
}

double delay_lookup(const Trajectory& traj, double t, const ModelSpec& model,
                    DelayValue which) {
  return delay_lookup(traj, t, model, which, traj.grid.size() - 1);
}

double delay_lookup(const Trajectory& traj, double t, const ModelSpec& model,
                    DelayValue which, std::size_t frontier) {
  const double tol = lookup_tolerance(model);
  if (t < -model.tau - tol) throw std::out_of_range("delay lookup before -tau");
  if (frontier >= traj.grid.size() || t > traj.grid.time(frontier) + tol) {
    std::ostringstream os;
    os << "delay lookup at t=" << t << " beyond the simulated frontier";
    throw std::out_of_range(os.str());
  }
  if (t <= tol) return model.initial_segment(std::min(t, 0.0));
  const auto nodes = traj.grid.nodes().subspan(0, frontier + 1);
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), t + tol,
                                   [](double v, const GridNode& n) { return v < n.time; });
  const auto idx = static_cast<std::size_t>(std::distance(nodes.begin(), it)) - 1;
  if (which == DelayValue::pre_jump && traj.grid.is_jump(idx)) return traj.pre_jump[idx];
  return traj.post_jump[idx];
}

Trajectory simulate_path(const ModelSpec& model, const SchemeConfig& config,
                         const JumpAdaptedGrid& grid, std::span<const double> increments) {
  Trajectory traj = init_trajectory(model, grid, increments);
  DelayCursor cursor(traj, model, config.delay_value);
  const std::size_t origin = grid.origin();
  for (std::size_t k = 0; k < increments.size(); ++k) {
    const std::size_t i = origin + k;
    StepInputs in;
    in.y_current = traj.post_jump[i];
    in.y_delayed = cursor.at(grid.time(i) - model.tau, i);
    in.dt = grid.time(i + 1) - grid.time(i);
    in.dW = increments[k];
    in.jump_flag = grid.is_jump(i + 1);

    const double y_minus = jasdm_diffusion_step(in, model, config, &traj.clamp_count);
    traj.pre_jump[i + 1] = y_minus;
    traj.post_jump[i + 1] = jasdm_jump_update(y_minus, in.dt, in.jump_flag, model);
  }
  return traj;
}

Trajectory euler_maruyama_path(const ModelSpec& model, const JumpAdaptedGrid& grid,
                               std::span<const double> increments) {
  Trajectory traj = init_trajectory(model, grid, increments);
  DelayCursor cursor(traj, model, DelayValue::post_jump);
  const std::size_t origin = grid.origin();
  for (std::size_t k = 0; k < increments.size(); ++k) {
    const std::size_t i = origin + k;
    const double x = traj.post_jump[i];
    const double x_del = std::abs(cursor.at(grid.time(i) - model.tau, i));
    const double dt = grid.time(i + 1) - grid.time(i);
    const double x_minus = x + (model.k1 - model.k2 * x) * dt +
                           model.k3 * model.delay_coeff(x_del) *
                               std::pow(std::abs(x), model.alpha) * increments[k];
    const double compensated = (grid.is_jump(i + 1) ? 1.0 : 0.0) - model.lambda * dt;
    traj.pre_jump[i + 1] = x_minus;
    traj.post_jump[i + 1] = x_minus + model.jump_coeff(x_minus) * compensated;
  }
  return traj;
}

std::string to_string(SchemeKind kind) {
  return kind == SchemeKind::jasdm ? "jasdm" : "euler-maruyama";
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,y_pre,y_post,is_jump\n";
  char line[128];
  for (std::size_t i = traj.grid.origin(); i < traj.grid.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d\n", traj.grid.time(i),
                  traj.pre_jump[i], traj.post_jump[i], traj.grid.is_jump(i) ? 1 : 0);
    out << line;
  }
}

}  // namespace jasdm
