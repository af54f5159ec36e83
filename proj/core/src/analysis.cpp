#include "jasdm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace jasdm {

namespace {

constexpr std::size_t kBlockPaths = 64;

/// Running mean and centred sum of squares of a fixed-length observation
/// vector over paths (Welford updates, pairwise merge).
struct Moments {
  std::vector<double> avg;
  std::vector<double> m2;
  std::size_t count = 0;

  explicit Moments(std::size_t dim = 0) : avg(dim, 0.0), m2(dim, 0.0) {}

  void add(std::span<const double> x) {
    ++count;
    const auto n = static_cast<double>(count);
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double delta = x[d] - avg[d];
      avg[d] += delta / n;
      m2[d] += delta * (x[d] - avg[d]);
    }
  }

  void merge(const Moments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const auto na = static_cast<double>(count);
    const auto nb = static_cast<double>(other.count);
    const double n = na + nb;
    for (std::size_t d = 0; d < avg.size(); ++d) {
      const double delta = other.avg[d] - avg[d];
      avg[d] += delta * nb / n;
      m2[d] += other.m2[d] + delta * delta * na * nb / n;
    }
    count += other.count;
  }

  double mean(std::size_t d) const { return avg[d]; }

  /// Standard error of the mean; zero for fewer than two samples.
  double stderr_of_mean(std::size_t d) const {
    if (count < 2) return 0.0;
    const auto n = static_cast<double>(count);
    return std::sqrt(std::max(0.0, m2[d] / (n - 1.0)) / n);
  }
};

/// Paths are grouped into fixed blocks; each block is accumulated in path
/// order and blocks are merged in block order, so the result is independent
/// of the thread count.
template <class Observe>
Moments accumulate_paths(std::size_t paths, std::size_t dim, unsigned threads,
                         Observe&& observe) {
  const std::size_t blocks = (paths + kBlockPaths - 1) / kBlockPaths;
  std::vector<Moments> partial(blocks, Moments(dim));
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<double> x(dim);
    const std::size_t end = std::min(paths, (b + 1) * kBlockPaths);
    for (std::size_t p = b * kBlockPaths; p < end; ++p) {
      observe(p, std::span<double>(x));
      partial[b].add(x);
    }
  });
  Moments total(dim);
  for (const auto& block : partial) total.merge(block);
  return total;
}

/// Origin-relative indices of the deterministic nodes on [0, T].
std::vector<std::size_t> deterministic_nodes(const JumpAdaptedGrid& grid) {
  std::vector<std::size_t> idx;
  for (std::size_t i = grid.origin(); i < grid.size(); ++i)
    if (grid.node(i).is_deterministic()) idx.push_back(i);
  return idx;
}

double deterministic_time(const ModelSpec& model, int l, std::size_t n) {
  return static_cast<double>(n) * model.tau / l;
}

Trajectory run_single(const ModelSpec& model, const SchemeConfig& config,
                      std::uint64_t seed, std::uint64_t path, SchemeKind scheme) {
  const NoiseBundle noise = make_noise_bundle(model, config.steps_per_delay, seed, path);
  if (scheme == SchemeKind::euler_maruyama)
    return euler_maruyama_path(model, noise.fine_grid, noise.wiener_fine);
  return simulate_path(model, config, noise.fine_grid, noise.wiener_fine);
}

}  // namespace

RateFit fit_rate(std::span<const double> deltas, std::span<const double> errors) {
  if (deltas.size() != errors.size())
    throw std::invalid_argument("fit_rate: deltas and errors differ in length");
  RateFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(errors[i] > 0.0) || !(deltas[i] > 0.0)) {
      std::ostringstream os;
      os << "dropped point delta=" << deltas[i] << " error=" << errors[i]
         << " (log undefined)";
      fit.warnings.push_back(os.str());
      continue;
    }
    xs.push_back(std::log2(deltas[i]));
    ys.push_back(std::log2(errors[i]));
  }
  if (xs.size() < 2) throw std::invalid_argument("fit_rate: fewer than two usable points");

  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_rate: all deltas coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.points_used = xs.size();
  return fit;
}

double theoretical_slope_lower_bound(const ModelSpec& model) {
  const double gamma = model.holder_gamma();
  if (model.alpha > 0.5) return std::min(model.alpha - 0.5, gamma) / 2.0;
  return std::min(0.5, gamma) / 2.0;
}

ConvergenceReport strong_error_study(const ModelSpec& model, const SchemeConfig& base,
                                     std::span<const int> steps_per_delay,
                                     const ConvergenceOptions& options) {
  model.validate();
  base.validate();
  if (options.batches < 1 || options.paths_per_batch < 1)
    throw std::invalid_argument("strong_error_study needs at least one batch and one path");
  if (steps_per_delay.empty()) throw std::invalid_argument("empty step ladder");
  const int l_ref = options.ref_steps_per_delay;
  if (l_ref < 2) throw std::invalid_argument("reference l must be >= 2");
  for (std::size_t r = 0; r < steps_per_delay.size(); ++r) {
    const int l = steps_per_delay[r];
    if (l < 2 || l_ref % l != 0) {
      std::ostringstream os;
      os << "l=" << l << " does not divide the reference l=" << l_ref;
      throw std::invalid_argument(os.str());
    }
    if (r > 0 && l <= steps_per_delay[r - 1])
      throw std::invalid_argument("step ladder must be strictly refining");
  }

  ConvergenceReport report;
  report.steps_per_delay.assign(steps_per_delay.begin(), steps_per_delay.end());
  report.batches = options.batches;
  report.paths_per_batch = options.paths_per_batch;
  report.ref_steps_per_delay = l_ref;
  report.ref_delta = model.tau / l_ref;
  report.tau = model.tau;
  report.master_seed = options.master_seed;
  report.sup_error = options.sup_error;
  report.theoretical_slope_lower_bound = theoretical_slope_lower_bound(model);

  // The floor level 2 * delta_ref rides along as an extra rung when needed.
  std::vector<int> levels = report.steps_per_delay;
  const bool floor_available = l_ref % 2 == 0 && l_ref / 2 >= 2;
  std::size_t floor_rung = levels.size();
  if (floor_available) {
    const auto it = std::find(levels.begin(), levels.end(), l_ref / 2);
    if (it != levels.end()) {
      floor_rung = static_cast<std::size_t>(it - levels.begin());
    } else {
      levels.push_back(l_ref / 2);
    }
  }

  const std::size_t rungs = levels.size();
  const auto total_paths =
      static_cast<std::size_t>(options.batches) * static_cast<std::size_t>(options.paths_per_batch);
  std::vector<double> sq(total_paths * rungs, 0.0);

  parallel_for(total_paths, options.threads, [&](std::size_t p) {
    const NoiseBundle noise = make_noise_bundle(model, l_ref, options.master_seed, p);
    SchemeConfig ref_config = base;
    ref_config.steps_per_delay = l_ref;
    const Trajectory ref =
        simulate_path(model, ref_config, noise.fine_grid, noise.wiener_fine);
    for (std::size_t r = 0; r < rungs; ++r) {
      SchemeConfig rung_config = base;
      rung_config.steps_per_delay = levels[r];
      const JumpAdaptedGrid grid =
          build_grid(model.tau, model.horizon, levels[r], noise.jump_times);
      const std::vector<double> dw = wiener_increments_for_grid(noise, grid);
      const Trajectory coarse = simulate_path(model, rung_config, grid, dw);
      double err = 0.0;
      if (options.sup_error) {
        const auto map = embed_grid(grid, noise.fine_grid);
        for (std::size_t c = 0; c < map.size(); ++c) {
          const double d = coarse.post_jump[grid.origin() + c] -
                           ref.post_jump[noise.fine_grid.origin() + map[c]];
          err = std::max(err, d * d);
        }
      } else {
        const double d = coarse.terminal() - ref.terminal();
        err = d * d;
      }
      sq[p * rungs + r] = err;
    }
  });

  std::vector<double> all_errors(rungs);
  std::vector<double> all_stderr(rungs);
  std::vector<std::vector<double>> all_batches(rungs);
  const auto L = static_cast<std::size_t>(options.paths_per_batch);
  const auto M = static_cast<std::size_t>(options.batches);
  for (std::size_t r = 0; r < rungs; ++r) {
    auto& batch = all_batches[r];
    batch.resize(M);
    for (std::size_t j = 0; j < M; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < L; ++i) s += sq[(j * L + i) * rungs + r];
      batch[j] = s / static_cast<double>(L);
    }
    const double mse = std::accumulate(batch.begin(), batch.end(), 0.0) / static_cast<double>(M);
    all_errors[r] = std::sqrt(mse);
    if (M > 1 && mse > 0.0) {
      double v = 0.0;
      for (double b : batch) v += (b - mse) * (b - mse);
      const double se_mse = std::sqrt(v / static_cast<double>(M - 1) / static_cast<double>(M));
      all_stderr[r] = se_mse / (2.0 * all_errors[r]);
    }
  }

  const std::size_t shown = report.steps_per_delay.size();
  report.floor_error = floor_available ? all_errors[floor_rung]
                                       : std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < shown; ++r) {
    report.deltas.push_back(model.tau / levels[r]);
    report.errors.push_back(all_errors[r]);
    report.error_stderr.push_back(all_stderr[r]);
    report.per_batch_errors.push_back(std::move(all_batches[r]));
  }
  for (std::size_t r = 0; r + 1 < shown; ++r) {
    const double a = report.errors[r];
    const double b = report.errors[r + 1];
    report.rung_rates.push_back(a > 0.0 && b > 0.0 ? std::log2(a / b)
                                                   : std::numeric_limits<double>::quiet_NaN());
  }

  std::vector<double> fit_deltas, fit_errors;
  report.used_in_fit.assign(shown, false);
  for (std::size_t r = 0; r < shown; ++r) {
    const bool above_floor = options.floor_factor <= 0.0 || !floor_available ||
                             report.errors[r] >= options.floor_factor * report.floor_error;
    if (above_floor && report.errors[r] > 0.0) {
      report.used_in_fit[r] = true;
      fit_deltas.push_back(report.deltas[r]);
      fit_errors.push_back(report.errors[r]);
    } else if (report.errors[r] > 0.0) {
      std::ostringstream os;
      os << "rung delta=" << report.deltas[r] << " excluded: error " << report.errors[r]
         << " below " << options.floor_factor << " x reference floor " << report.floor_error;
      report.warnings.push_back(os.str());
    }
  }
  std::size_t positive = 0;
  for (double e : report.errors) positive += e > 0.0 ? 1 : 0;
  if (positive >= 2) report.fit_all = fit_rate(report.deltas, report.errors);
  if (fit_deltas.size() >= 2) {
    report.fit = fit_rate(fit_deltas, fit_errors);
  } else if (report.fit_all) {
    report.fit = report.fit_all;
    for (std::size_t r = 0; r < shown; ++r) report.used_in_fit[r] = report.errors[r] > 0.0;
    report.warnings.push_back(
        "fewer than two rungs clear the reference floor; slope fitted over all rungs");
  } else {
    report.warnings.push_back("fewer than two rungs usable for the rate fit; no slope reported");
  }
  return report;
}

double closed_form_mean(const ModelSpec& model, double x0, double t) {
  const double level = model.k1 / model.k2;
  return level + (x0 - level) * std::exp(-model.k2 * t);
}

MeanReversionReport mean_reversion_study(const ModelSpec& model, const SchemeConfig& config,
                                         double horizon, std::size_t paths,
                                         std::uint64_t master_seed, unsigned threads) {
  const ModelSpec long_model = model.with_horizon(horizon);
  long_model.validate();
  config.validate();
  if (paths == 0) throw std::invalid_argument("mean_reversion_study needs paths >= 1");

  MeanReversionReport report;
  report.paths = paths;
  report.initial_mean = long_model.initial_segment(0.0);
  report.theta_bound = config.theta > 0.0 ? model.k1 / (model.k2 * config.theta)
                                          : std::numeric_limits<double>::infinity();
  const double delta = config.delta(model.tau);
  if (!(delta * (1.0 - config.theta) < 1.0 / model.k2)) {
    std::ostringstream os;
    os << "delta (1 - theta) = " << delta * (1.0 - config.theta) << " is not below 1/k2 = "
       << 1.0 / model.k2 << "; the scheme's mean-reversion bound does not apply";
    report.warnings.push_back(os.str());
  }

  const int l = config.steps_per_delay;
  const auto nodes = static_cast<std::size_t>(long_model.delay_periods()) * l + 1;
  const Moments stats = accumulate_paths(paths, nodes, threads, [&](std::size_t p, std::span<double> out) {
    const Trajectory traj = run_single(long_model, config, master_seed, p, SchemeKind::jasdm);
    const auto idx = deterministic_nodes(traj.grid);
    for (std::size_t n = 0; n < nodes; ++n) out[n] = traj.post_jump[idx[n]];
  });

  for (std::size_t n = 0; n < nodes; ++n) {
    const double t = deterministic_time(long_model, l, n);
    report.times.push_back(t);
    report.estimated_means.push_back(stats.mean(n));
    report.standard_errors.push_back(stats.stderr_of_mean(n));
    report.closed_form_means.push_back(closed_form_mean(long_model, report.initial_mean, t));
  }
  return report;
}

MomentReport moment_study(const ModelSpec& model, const SchemeConfig& config,
                          std::span<const double> p_list, std::size_t paths,
                          std::uint64_t master_seed, unsigned threads) {
  model.validate();
  config.validate();
  if (paths == 0) throw std::invalid_argument("moment_study needs paths >= 1");
  for (double p : p_list)
    if (!(p > 0.0)) throw std::invalid_argument("moment orders must be > 0");

  const int l = config.steps_per_delay;
  const auto nodes = static_cast<std::size_t>(model.delay_periods()) * l + 1;
  const std::size_t stride = nodes + 1;  // per-node moments, then the path sup
  const Moments stats =
      accumulate_paths(paths, stride * p_list.size(), threads, [&](std::size_t path, std::span<double> out) {
        const Trajectory traj = run_single(model, config, master_seed, path, SchemeKind::jasdm);
        const auto idx = deterministic_nodes(traj.grid);
        for (std::size_t q = 0; q < p_list.size(); ++q) {
          double sup = 0.0;
          for (std::size_t n = 0; n < nodes; ++n) {
            const double v = p_list[q] == 1.0 ? traj.post_jump[idx[n]]
                                              : std::pow(traj.post_jump[idx[n]], p_list[q]);
            out[q * stride + n] = v;
            sup = std::max(sup, v);
          }
          out[q * stride + nodes] = sup;
        }
      });

  MomentReport report;
  report.paths = paths;
  for (std::size_t n = 0; n < nodes; ++n) report.times.push_back(deterministic_time(model, l, n));
  for (std::size_t q = 0; q < p_list.size(); ++q) {
    MomentRow row;
    row.p = p_list[q];
    for (std::size_t n = 0; n < nodes; ++n) {
      row.moments.push_back(stats.mean(q * stride + n));
      row.standard_errors.push_back(stats.stderr_of_mean(q * stride + n));
    }
    const auto best = static_cast<std::size_t>(
        std::max_element(row.moments.begin(), row.moments.end()) - row.moments.begin());
    row.sup_moment = row.moments[best];
    row.sup_moment_stderr = row.standard_errors[best];
    row.argmax_time = report.times[best];
    row.mean_sup = stats.mean(q * stride + nodes);
    row.mean_sup_stderr = stats.stderr_of_mean(q * stride + nodes);
    report.rows.push_back(std::move(row));
  }
  return report;
}

PositivityReport positivity_audit(const ModelSpec& model, const SchemeConfig& config,
                                  std::size_t paths, std::uint64_t master_seed,
                                  SchemeKind scheme, unsigned threads) {
  model.validate();
  config.validate();

  struct PathOutcome {
    double min_value = std::numeric_limits<double>::infinity();
    std::size_t negatives = 0;
    std::size_t clamps = 0;
    bool violated = false;
  };
  std::vector<PathOutcome> outcomes(paths);
  parallel_for(paths, threads, [&](std::size_t p) {
    PathOutcome& out = outcomes[p];
    try {
      const Trajectory traj = run_single(model, config, master_seed, p, scheme);
      out.min_value = traj.min_value();
      out.negatives = traj.negative_count();
      out.clamps = traj.clamp_count;
    } catch (const PositivityViolation& v) {
      out.violated = true;
      out.min_value = v.result();
    }
  });

  PositivityReport report;
  report.scheme = scheme;
  report.paths = paths;
  report.guaranteed_regime = scheme == SchemeKind::jasdm && in_positivity_regime(model, config);
  report.min_value = std::numeric_limits<double>::infinity();
  for (const auto& out : outcomes) {
    report.min_value = std::min(report.min_value, out.min_value);
    report.negative_count += out.negatives;
    report.paths_with_negative += out.negatives > 0 || out.violated ? 1 : 0;
    report.jump_violations += out.violated ? 1 : 0;
    report.clamp_total += out.clamps;
  }
  return report;
}

}  // namespace jasdm
