#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "jasdm/model.hpp"

namespace jasdm {

class NoiseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using RngStream = std::mt19937_64;

enum class StreamPurpose : std::uint64_t { wiener = 1, poisson = 2 };

/// Independent, reproducible stream for one (path, purpose) pair. The seed
/// words go through std::seed_seq, whose mixing is fixed by the standard,
/// so a stream is bit-identical across runs and platforms.
RngStream derive_path_stream(std::uint64_t master_seed, std::uint64_t path_index,
                             StreamPurpose purpose);

/// Event times of a homogeneous Poisson process on (0, horizon], built from
/// cumulative exponential(lambda) inter-arrival times. Empty for lambda = 0.
std::vector<double> sample_jump_times(double lambda, double horizon,
                                      RngStream& stream);

struct GridNode {
  static constexpr std::int64_t kNoIndex = std::numeric_limits<std::int64_t>::min();

  double time = 0.0;
  /// n for deterministic nodes t = n * tau / l (negative on the history),
  /// kNoIndex for pure jump nodes.
  std::int64_t det_index = kNoIndex;
  /// Ordinal of the Poisson event placed on this node, -1 if none.
  std::int32_t jump_index = -1;

  bool is_jump() const noexcept { return jump_index >= 0; }
  bool is_deterministic() const noexcept { return det_index != kNoIndex; }
};

/// Equidistant history prefix on [-tau, 0] followed by the superposition of
/// the multiples of delta = tau / l and the Poisson jump times on (0, T].
class JumpAdaptedGrid {
 public:
  JumpAdaptedGrid() = default;

  std::span<const GridNode> nodes() const noexcept { return nodes_; }
  const GridNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Index of t = 0; equals steps_per_delay().
  std::size_t origin() const noexcept { return static_cast<std::size_t>(l_); }
  /// Number of intervals on [0, T].
  std::size_t interval_count() const noexcept { return nodes_.size() - origin() - 1; }

  int steps_per_delay() const noexcept { return l_; }
  double tau() const noexcept { return tau_; }
  double horizon() const noexcept { return horizon_; }
  double max_step() const noexcept { return tau_ / l_; }
  std::span<const double> jump_times() const noexcept { return jump_times_; }

  double time(std::size_t i) const { return nodes_[i].time; }
  bool is_jump(std::size_t i) const { return nodes_[i].is_jump(); }

 private:
  friend JumpAdaptedGrid build_grid(double, double, int, std::span<const double>);

  std::vector<GridNode> nodes_;
  std::vector<double> jump_times_;
  int l_ = 0;
  double tau_ = 0.0;
  double horizon_ = 0.0;
};

/// Rejects unsorted, duplicated, or out-of-range jump times. A jump within
/// 1e-15 * T of a deterministic node is merged into that node.
JumpAdaptedGrid build_grid(double tau, double horizon, int l,
                           std::span<const double> jump_times);

/// Driving noise of one Monte Carlo path at the finest resolution used by a
/// study: the shared jump times plus one Gaussian increment per interval of
/// the fine jump-adapted grid.
struct NoiseBundle {
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
  int fine_steps_per_delay = 0;
  std::vector<double> jump_times;
  JumpAdaptedGrid fine_grid;
  std::vector<double> wiener_fine;
};

/// Pure function of its arguments; regenerating gives bit-identical output.
NoiseBundle make_noise_bundle(const ModelSpec& model, int fine_steps_per_delay,
                              std::uint64_t master_seed, std::uint64_t path_index);

/// Wiener increments over the intervals of `grid` on [0, T], each the
/// left-to-right sum of the fine increments it spans. Requires l | l_ref and
/// the same jump times.
std::vector<double> wiener_increments_for_grid(const NoiseBundle& bundle,
                                               const JumpAdaptedGrid& grid);

/// For every node of `coarse` on [0, T], the index of the same node in
/// `fine` (origin-relative indices, so entry 0 is t = 0 in both).
std::vector<std::size_t> embed_grid(const JumpAdaptedGrid& coarse,
                                    const JumpAdaptedGrid& fine);

/// Debug dump: seed, index, jump count, jump times, increment count,
/// increments; u64 / f64 little-endian. Not a stable format.
void write_noise_bundle(std::ostream& out, const NoiseBundle& bundle);

struct NoiseDump {
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
  std::vector<double> jump_times;
  std::vector<double> increments;
};

NoiseDump read_noise_bundle(std::istream& in);

}  // namespace jasdm
