#include "jasdm/noise.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace jasdm {

namespace {

constexpr double kMergeTolerance = 1e-15;

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw NoiseError("truncated noise bundle dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

RngStream derive_path_stream(std::uint64_t master_seed, std::uint64_t path_index,
                             StreamPurpose purpose) {
  const auto tag = static_cast<std::uint64_t>(purpose);
  // The constant word separates this stream family from any other use of
  // seed_seq with the same master seed.
  std::seed_seq seq{lo32(master_seed), hi32(master_seed), lo32(path_index),
                    hi32(path_index),  lo32(tag),         0x4a415344u};
  return RngStream(seq);
}

std::vector<double> sample_jump_times(double lambda, double horizon,
                                      RngStream& stream) {
  if (!(horizon > 0.0)) throw NoiseError("horizon must be > 0");
  if (!(lambda >= 0.0)) throw NoiseError("lambda must be >= 0");
  std::vector<double> times;
  if (lambda == 0.0) return times;
  std::exponential_distribution<double> gap(lambda);
  double t = gap(stream);
  while (t <= horizon) {
    // Equal consecutive times would need a zero exponential draw.
    if (times.empty() || t > times.back()) times.push_back(t);
    t += gap(stream);
  }
  return times;
}

JumpAdaptedGrid build_grid(double tau, double horizon, int l,
                           std::span<const double> jump_times) {
  if (l < 2) throw NoiseError("steps per delay must be >= 2");
  if (!(tau > 0.0) || !(horizon > 0.0)) throw NoiseError("tau and horizon must be > 0");
  const double periods = std::round(horizon / tau);
  if (periods < 1.0 || std::abs(horizon / tau - periods) > 1e-12 * periods)
    throw NoiseError("horizon must be an integer multiple of tau");

  for (std::size_t i = 0; i < jump_times.size(); ++i) {
    const double t = jump_times[i];
    if (!(t > 0.0 && t <= horizon)) {
      std::ostringstream os;
      os << "jump time " << t << " outside (0, " << horizon << "]";
      throw NoiseError(os.str());
    }
    if (i > 0 && !(t > jump_times[i - 1]))
      throw NoiseError("jump times must be strictly increasing");
  }

  const auto n_det = static_cast<std::int64_t>(periods) * l;
  const double tol = kMergeTolerance * horizon;

  JumpAdaptedGrid grid;
  grid.l_ = l;
  grid.tau_ = tau;
  grid.horizon_ = horizon;
  grid.jump_times_.assign(jump_times.begin(), jump_times.end());
  grid.nodes_.reserve(static_cast<std::size_t>(n_det + l + 1) + jump_times.size());

  auto det_time = [&](std::int64_t n) {
    if (n == -l) return -tau;
    if (n == n_det) return horizon;
    return static_cast<double>(n) * tau / l;
  };

  for (std::int64_t n = -l; n <= 0; ++n) {
    GridNode node;
    node.time = det_time(n);
    node.det_index = n;
    grid.nodes_.push_back(node);
  }

  std::size_t next_jump = 0;
  for (std::int64_t n = 1; n <= n_det; ++n) {
    const double t_det = det_time(n);
    while (next_jump < jump_times.size() && jump_times[next_jump] < t_det - tol) {
      GridNode node;
      node.time = jump_times[next_jump];
      node.jump_index = static_cast<std::int32_t>(next_jump);
      // A jump just above the previous deterministic node merges there.
      GridNode& prev = grid.nodes_.back();
      if (prev.is_deterministic() && !prev.is_jump() && prev.time > 0.0 &&
          node.time - prev.time <= tol) {
        prev.jump_index = node.jump_index;
      } else {
        grid.nodes_.push_back(node);
      }
      ++next_jump;
    }
    GridNode node;
    node.time = t_det;
    node.det_index = n;
    if (next_jump < jump_times.size() && std::abs(jump_times[next_jump] - t_det) <= tol) {
      node.jump_index = static_cast<std::int32_t>(next_jump);
      ++next_jump;
    }
    grid.nodes_.push_back(node);
  }
  return grid;
}

NoiseBundle make_noise_bundle(const ModelSpec& model, int fine_steps_per_delay,
                              std::uint64_t master_seed, std::uint64_t path_index) {
  NoiseBundle bundle;
  bundle.master_seed = master_seed;
  bundle.path_index = path_index;
  bundle.fine_steps_per_delay = fine_steps_per_delay;

  RngStream poisson = derive_path_stream(master_seed, path_index, StreamPurpose::poisson);
  bundle.jump_times = sample_jump_times(model.lambda, model.horizon, poisson);
  bundle.fine_grid =
      build_grid(model.tau, model.horizon, fine_steps_per_delay, bundle.jump_times);

  RngStream wiener = derive_path_stream(master_seed, path_index, StreamPurpose::wiener);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto nodes = bundle.fine_grid.nodes();
  const std::size_t origin = bundle.fine_grid.origin();
  bundle.wiener_fine.resize(bundle.fine_grid.interval_count());
  for (std::size_t k = 0; k < bundle.wiener_fine.size(); ++k) {
    const double dt = nodes[origin + k + 1].time - nodes[origin + k].time;
    bundle.wiener_fine[k] = std::sqrt(dt) * normal(wiener);
  }
  return bundle;
}

std::vector<std::size_t> embed_grid(const JumpAdaptedGrid& coarse,
                                    const JumpAdaptedGrid& fine) {
  const int l_c = coarse.steps_per_delay();
  const int l_f = fine.steps_per_delay();
  if (l_c <= 0 || l_f % l_c != 0) {
    std::ostringstream os;
    os << "grid with l=" << l_c << " does not embed into fine grid with l=" << l_f;
    throw NoiseError(os.str());
  }
  if (coarse.tau() != fine.tau() || coarse.horizon() != fine.horizon())
    throw NoiseError("grids cover different intervals");
  const auto cj = coarse.jump_times();
  const auto fj = fine.jump_times();
  if (!std::equal(cj.begin(), cj.end(), fj.begin(), fj.end()))
    throw NoiseError("grids carry different jump times");

  const std::int64_t ratio = l_f / l_c;
  const auto cn = coarse.nodes().subspan(coarse.origin());
  const auto fn = fine.nodes().subspan(fine.origin());

  std::vector<std::size_t> map(cn.size());
  std::size_t f = 0;
  for (std::size_t c = 0; c < cn.size(); ++c) {
    const GridNode& target = cn[c];
    auto matches = [&](const GridNode& node) {
      if (target.is_deterministic() && node.det_index == target.det_index * ratio)
        return true;
      return target.is_jump() && node.jump_index == target.jump_index;
    };
    while (f < fn.size() && !matches(fn[f])) ++f;
    if (f == fn.size()) throw NoiseError("coarse node missing from fine grid");
    map[c] = f;
  }
  return map;
}

std::vector<double> wiener_increments_for_grid(const NoiseBundle& bundle,
                                               const JumpAdaptedGrid& grid) {
  const auto map = embed_grid(grid, bundle.fine_grid);
  std::vector<double> increments(map.size() - 1);
  for (std::size_t j = 0; j + 1 < map.size(); ++j) {
    double sum = 0.0;
    for (std::size_t k = map[j]; k < map[j + 1]; ++k) sum += bundle.wiener_fine[k];
    increments[j] = sum;
  }
  return increments;
}

void write_noise_bundle(std::ostream& out, const NoiseBundle& bundle) {
  put_u64(out, bundle.master_seed);
  put_u64(out, bundle.path_index);
  put_u64(out, bundle.jump_times.size());
  for (double t : bundle.jump_times) put_f64(out, t);
  put_u64(out, bundle.wiener_fine.size());
  for (double w : bundle.wiener_fine) put_f64(out, w);
}

NoiseDump read_noise_bundle(std::istream& in) {
  NoiseDump dump;
  dump.master_seed = get_u64(in);
  dump.path_index = get_u64(in);
  dump.jump_times.resize(get_u64(in));
  for (double& t : dump.jump_times) t = get_f64(in);
  dump.increments.resize(get_u64(in));
  for (double& w : dump.increments) w = get_f64(in);
  return dump;
}

}  // namespace jasdm
