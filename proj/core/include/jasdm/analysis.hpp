#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jasdm/model.hpp"
#include "jasdm/parallel.hpp"
#include "jasdm/scheme.hpp"

namespace jasdm {

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of the log2 fit.
  double residual = 0.0;
  std::size_t points_used = 0;
  std::vector<std::string> warnings;
};

/// Ordinary least squares of log2(error) on log2(delta). Nonpositive errors
/// are dropped with a warning; throws std::invalid_argument when fewer than
/// two usable points remain.
RateFit fit_rate(std::span<const double> deltas, std::span<const double> errors);

/// Lower bound on the L2 rate: min(alpha - 1/2, gamma)/2 for alpha > 1/2 and
/// min(1/2, gamma)/2 for alpha = 1/2.
double theoretical_slope_lower_bound(const ModelSpec& model);

struct ConvergenceOptions {
  int batches = 50;
  int paths_per_batch = 100;
  /// Reference resolution l_ref (delta_ref = tau / l_ref); every compared l
  /// must divide it.
  int ref_steps_per_delay = 4096;
  std::uint64_t master_seed = 0;
  unsigned threads = default_thread_count();
  /// Use sup over the coarse nodes of |y - y_ref| instead of the endpoint.
  bool sup_error = false;
  /// Rungs with error below floor_factor times the error at 2 * delta_ref are
  /// left out of the slope fit. Zero disables the exclusion. If fewer than
  /// two rungs survive, the fit falls back to every rung and warns.
  double floor_factor = 10.0;
};

struct ConvergenceReport {
  std::vector<int> steps_per_delay;
  std::vector<double> deltas;
  std::vector<double> errors;
  std::vector<double> error_stderr;
  /// [rung][batch] batch mean squared error.
  std::vector<std::vector<double>> per_batch_errors;
  /// log2(error_k / error_{k+1}) between neighbouring rungs.
  std::vector<double> rung_rates;
  std::vector<bool> used_in_fit;
  std::optional<RateFit> fit;
  /// Fit over every rung with a positive error, ignoring the floor rule.
  std::optional<RateFit> fit_all;
  /// Error at 2 * delta_ref; NaN when that level does not exist.
  double floor_error = 0.0;
  double theoretical_slope_lower_bound = 0.0;
  int batches = 0;
  int paths_per_batch = 0;
  int ref_steps_per_delay = 0;
  double ref_delta = 0.0;
  double tau = 1.0;
  std::uint64_t master_seed = 0;
  bool sup_error = false;
  std::vector<std::string> warnings;

  std::optional<double> fitted_slope() const {
    return fit ? std::optional<double>(fit->slope) : std::nullopt;
  }
};

/// Strong L2 error of the scheme at each l in `steps_per_delay` against a
/// reference run at l_ref, over batches * paths_per_batch coupled paths.
/// Every path draws one jump-time list and one fine Wiener path shared by all
/// resolutions.
ConvergenceReport strong_error_study(const ModelSpec& model, const SchemeConfig& base,
                                     std::span<const int> steps_per_delay,
                                     const ConvergenceOptions& options);

struct MeanReversionReport {
  std::vector<double> times;
  std::vector<double> estimated_means;
  std::vector<double> standard_errors;
  std::vector<double> closed_form_means;
  /// k1 / (k2 theta); +inf for theta = 0.
  double theta_bound = 0.0;
  double initial_mean = 0.0;
  std::size_t paths = 0;
  std::vector<std::string> warnings;
};

/// k1/k2 + (x0 - k1/k2) exp(-k2 t).
double closed_form_mean(const ModelSpec& model, double x0, double t);

/// Monte Carlo mean of the scheme at every deterministic node on
/// [0, horizon], against the closed-form mean of the exact solution.
MeanReversionReport mean_reversion_study(const ModelSpec& model, const SchemeConfig& config,
                                         double horizon, std::size_t paths,
                                         std::uint64_t master_seed,
                                         unsigned threads = default_thread_count());

struct MomentRow {
  double p = 0.0;
  /// E[y_t^p] per deterministic node.
  std::vector<double> moments;
  std::vector<double> standard_errors;
  double sup_moment = 0.0;
  double sup_moment_stderr = 0.0;
  double argmax_time = 0.0;
  /// E[sup_t y_t^p] over the deterministic nodes.
  double mean_sup = 0.0;
  double mean_sup_stderr = 0.0;
};

struct MomentReport {
  std::vector<double> times;
  std::vector<MomentRow> rows;
  std::size_t paths = 0;
};

MomentReport moment_study(const ModelSpec& model, const SchemeConfig& config,
                          std::span<const double> p_list, std::size_t paths,
                          std::uint64_t master_seed,
                          unsigned threads = default_thread_count());

struct PositivityReport {
  SchemeKind scheme = SchemeKind::jasdm;
  std::size_t paths = 0;
  double min_value = 0.0;
  /// Node values (pre- and post-jump) below zero.
  std::size_t negative_count = 0;
  std::size_t paths_with_negative = 0;
  /// Paths stopped by a nonpositive jump update.
  std::size_t jump_violations = 0;
  std::size_t clamp_total = 0;
  bool guaranteed_regime = false;

  bool clean() const noexcept {
    return negative_count == 0 && jump_violations == 0 && clamp_total == 0 && min_value > 0.0;
  }
};

PositivityReport positivity_audit(const ModelSpec& model, const SchemeConfig& config,
                                  std::size_t paths, std::uint64_t master_seed,
                                  SchemeKind scheme = SchemeKind::jasdm,
                                  unsigned threads = default_thread_count());

}  // namespace jasdm
