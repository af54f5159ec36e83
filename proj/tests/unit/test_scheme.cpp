#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "jasdm/noise.hpp"
#include "jasdm/report_io.hpp"
#include "jasdm/scheme.hpp"

using namespace jasdm;

namespace {

// Golden values from a 30-digit mpmath evaluation of the scheme formulas.
constexpr double kInnerRef = 0.917046652580881380836;
constexpr double kCoeffRef = 0.134496122486987033596;
constexpr double kStepUpRef = 0.942986928722514376652;
constexpr double kStepDownRef = 0.891468160578529077405;
constexpr double kInnerCev = 0.34356805821666490111;
constexpr double kCoeffCev = 0.15056821593261985585;
constexpr double kStepCev = 0.35245024281473160079;

SchemeConfig half_implicit(int l = 32) {
  SchemeConfig c;
  c.theta = 0.5;
  c.steps_per_delay = l;
  return c;
}

ModelSpec deterministic_model(double x0) {
  ModelSpec m = reference_model(0.5, 1.0);
  m.k3 = 0.0;
  m.lambda = 0.0;
  m.jump_coeff = JumpCoefficient::zero();
  m.initial_segment = InitialSegment::constant(x0);
  return m;
}

// Written out in the expanded form of the theta = 1/2 scheme with b(x) = x^gamma
// and m = 1/4, independently of the library code.
double transcribed_half_theta_step(double y, double y_lag, double dt, double dW, double k1,
                                   double k2, double k3, double alpha, double gamma) {
  const double bg = std::pow(y_lag, gamma);
  const double damp = 1.0 + bg * std::pow(dt, 0.25);
  const double under = y * (1.0 - 2.0 * k2 * dt / (2.0 + k2 * dt)) + 2.0 * k1 * dt / (2.0 + k2 * dt) -
                       k3 * k3 / ((2.0 + k2 * dt) * (2.0 + k2 * dt)) * std::pow(y_lag, 2.0 * gamma) /
                           (damp * damp) * std::pow(y, 2.0 * alpha - 1.0) * dt;
  const double z = std::sqrt(under) +
                   k3 / (2.0 + k2 * dt) * bg / damp * std::pow(y, alpha - 0.5) * dW;
  return z * z;
}

Trajectory run(const ModelSpec& m, const SchemeConfig& c, std::uint64_t seed, std::uint64_t path) {
  const NoiseBundle b = make_noise_bundle(m, c.steps_per_delay, seed, path);
  return simulate_path(m, c, b.fine_grid, b.wiener_fine);
}

}  // namespace

TEST(Inner, GoldenReferenceModel) {
  const ModelSpec m = reference_model(0.5, 1.0);
  EXPECT_NEAR(jasdm_inner(1.0, 1.0, 1.0 / 32, m, half_implicit()), kInnerRef, 1e-14);
  const DiffusionTerms t = jasdm_terms(1.0, 1.0, 1.0 / 32, m, half_implicit());
  EXPECT_NEAR(t.noise_coeff, kCoeffRef, 1e-15);
  EXPECT_FALSE(t.clamped);
}

TEST(Inner, GoldenCevModel) {
  const ModelSpec m = reference_model(0.7, 0.5);
  const DiffusionTerms t = jasdm_terms(0.35, 1.7, 1.0 / 128, m, half_implicit(128));
  EXPECT_NEAR(t.inner, kInnerCev, 1e-14);
  EXPECT_NEAR(t.noise_coeff, kCoeffCev, 1e-15);
  StepInputs in{0.35, 1.7, 1.0 / 128, 0.05, false};
  EXPECT_NEAR(jasdm_diffusion_step(in, m, half_implicit(128)), kStepCev, 1e-14);
}

TEST(Inner, DeterministicFixedPoint) {
  const ModelSpec m = deterministic_model(0.08);
  const double level = m.k1 / m.k2;
  for (double theta : {0.0, 0.5, 1.0}) {
    SchemeConfig c = half_implicit();
    c.theta = theta;
    for (double dt : {0.5, 1.0 / 32, 1e-4}) {
      EXPECT_NEAR(jasdm_inner(level, 1.0, dt, m, c), level, 1e-15 * level);
    }
  }
}

TEST(Inner, ZeroStateReduction) {
  const ModelSpec m = reference_model(0.7, 0.5);
  for (double dt : {1.0 / 32, 1.0 / 512}) {
    for (double y_del : {0.1, 1.0, 3.0}) {
      const double expected = m.k1 * dt / (1.0 + m.k2 * 0.5 * dt);
      EXPECT_DOUBLE_EQ(jasdm_inner(0.0, y_del, dt, m, half_implicit()), expected);
      EXPECT_DOUBLE_EQ(jasdm_terms(0.0, y_del, dt, m, half_implicit()).noise_coeff, 0.0);
    }
  }
}

TEST(Inner, ZeroStateSquareRootCase) {
  const ModelSpec m = reference_model(0.5, 1.0);
  const DiffusionTerms t = jasdm_terms(0.0, 1.0, 1.0 / 32, m, half_implicit());
  EXPECT_GT(t.noise_coeff, 0.0);
}

TEST(Inner, ClampsAndCounts) {
  ModelSpec m = reference_model(0.5, 1.0);
  m.k3 = 1.9;
  m.k1 = 1e-6;
  SchemeConfig c = half_implicit(2);
  c.theta = 0.0;
  const DiffusionTerms t = jasdm_terms(1e-3, 5.0, 0.5, m, c);
  EXPECT_TRUE(t.clamped);
  EXPECT_EQ(t.inner, 0.0);
  std::size_t clamps = 0;
  StepInputs in{1e-3, 5.0, 0.5, 0.0, false};
  EXPECT_EQ(jasdm_diffusion_step(in, m, c, &clamps), 0.0);
  EXPECT_EQ(clamps, 1u);
}

TEST(DiffusionStep, GoldenSteps) {
  const ModelSpec m = reference_model(0.5, 1.0);
  StepInputs in{1.0, 1.0, 1.0 / 32, 0.1, false};
  EXPECT_NEAR(jasdm_diffusion_step(in, m, half_implicit()), kStepUpRef, 1e-14);
  in.dW = -0.1;
  EXPECT_NEAR(jasdm_diffusion_step(in, m, half_implicit()), kStepDownRef, 1e-14);
}

TEST(DiffusionStep, NoNoiseIsThetaMethod) {
  const ModelSpec m = deterministic_model(1.0);
  for (double theta : {0.0, 0.5, 1.0}) {
    SchemeConfig c = half_implicit();
    c.theta = theta;
    const double dt = 1.0 / 16;
    const double y = 0.7;
    StepInputs in{y, 1.0, dt, 0.0, false};
    const double d = 1.0 + m.k2 * theta * dt;
    EXPECT_NEAR(jasdm_diffusion_step(in, m, c), y * (1.0 - m.k2 * dt / d) + m.k1 * dt / d, 1e-15);
  }
}

TEST(DiffusionStep, MatchesExpandedHalfThetaForm) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> y_dist(0.01, 3.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double alpha : {0.5, 0.7, 0.9}) {
    for (double gamma : {0.5, 1.0}) {
      const ModelSpec m = reference_model(alpha, gamma);
      for (int l : {32, 128, 512}) {
        const double dt = 1.0 / l;
        for (int i = 0; i < 200; ++i) {
          const double y = y_dist(rng);
          const double y_lag = y_dist(rng);
          const double dW = std::sqrt(dt) * n(rng);
          StepInputs in{y, y_lag, dt, dW, false};
          const double got = jasdm_diffusion_step(in, m, half_implicit(l));
          const double want =
              transcribed_half_theta_step(y, y_lag, dt, dW, m.k1, m.k2, m.k3, alpha, gamma);
          ASSERT_NEAR(got, want, 1e-13 * std::max(1.0, want));
        }
      }
    }
  }
}

TEST(DiffusionStep, SymmetricNoiseIdentity) {
  const ModelSpec m = reference_model(0.5, 1.0);
  const double h = 0.1;
  StepInputs in{1.0, 1.0, 1.0 / 32, h, false};
  const double up = jasdm_diffusion_step(in, m, half_implicit());
  in.dW = -h;
  const double down = jasdm_diffusion_step(in, m, half_implicit());
  in.dW = 0.0;
  const double flat = jasdm_diffusion_step(in, m, half_implicit());
  const double c = jasdm_terms(1.0, 1.0, 1.0 / 32, m, half_implicit()).noise_coeff;
  EXPECT_NE(up, down);
  EXPECT_NEAR(0.5 * (up + down) - flat, c * c * h * h, 1e-15);
}

TEST(DiffusionStep, SquareFormRecomputed) {
  const ModelSpec m = reference_model(0.9, 0.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double y = u(rng), y_del = u(rng), dW = u(rng) - 1.0;
    const DiffusionTerms t = jasdm_terms(y, y_del, 1.0 / 64, m, half_implicit(64));
    const double z = std::sqrt(t.inner) + t.noise_coeff * dW;
    StepInputs in{y, y_del, 1.0 / 64, dW, false};
    ASSERT_EQ(jasdm_diffusion_step(in, m, half_implicit(64)), z * z);
  }
}

TEST(DiffusionStep, ConstantDelayCoefficientIgnoresLag) {
  ModelSpec m = reference_model(0.7, 0.5);
  m.delay_coeff = DelayCoefficient::constant();
  StepInputs a{0.4, 0.01, 1.0 / 64, 0.03, false};
  StepInputs b = a;
  b.y_delayed = 9.0;
  EXPECT_EQ(jasdm_diffusion_step(a, m, half_implicit(64)),
            jasdm_diffusion_step(b, m, half_implicit(64)));
}

TEST(JumpUpdate, MultiplicativeJump) {
  const ModelSpec m = reference_model(0.5, 1.0);
  const double dt = 1.0 / 32;
  EXPECT_DOUBLE_EQ(jasdm_jump_update(0.3, dt, true, m), 0.3 * (1.0 + 2.0 * (1.0 - dt)));
  EXPECT_DOUBLE_EQ(jasdm_jump_update(1.0, 0.1, false, m), 0.8);
}

TEST(JumpUpdate, ZeroCoefficientIsIdentity) {
  ModelSpec m = reference_model(0.5, 1.0);
  m.jump_coeff = JumpCoefficient::zero();
  EXPECT_EQ(jasdm_jump_update(0.42, 0.1, true, m), 0.42);
  EXPECT_EQ(jasdm_jump_update(0.42, 0.1, false, m), 0.42);
}

TEST(JumpUpdate, ViolationCarriesInputs) {
  ModelSpec m = reference_model(0.5, 1.0);
  m.lambda = 4.0;
  try {
    jasdm_jump_update(0.5, 0.25, false, m);
    FAIL() << "expected PositivityViolation";
  } catch (const PositivityViolation& e) {
    EXPECT_EQ(e.y_minus(), 0.5);
    EXPECT_EQ(e.dt(), 0.25);
    EXPECT_FALSE(e.jump_flag());
    EXPECT_LE(e.result(), 0.0);
  }
}

TEST(Trajectory, HistoryReproducesSegment) {
  ModelSpec m = reference_model(0.5, 1.0);
  m.initial_segment = InitialSegment::function([](double t) { return 1.0 + 0.5 * t * t; });
  const Trajectory traj = run(m, half_implicit(16), 4, 0);
  for (std::size_t i = 0; i <= traj.grid.origin(); ++i) {
    const double xi = 1.0 + 0.5 * traj.grid.time(i) * traj.grid.time(i);
    EXPECT_EQ(traj.post_jump[i], xi);
    EXPECT_EQ(traj.pre_jump[i], xi);
  }
}

TEST(Trajectory, CompensatorAtNonJumpNodes) {
  const ModelSpec m = reference_model(0.5, 1.0);
  const Trajectory traj = run(m, half_implicit(32), 8, 2);
  const auto& g = traj.grid;
  for (std::size_t i = g.origin() + 1; i < g.size(); ++i) {
    const double dt = g.time(i) - g.time(i - 1);
    const double factor = g.is_jump(i) ? 1.0 + 2.0 * (1.0 - dt) : 1.0 - 2.0 * dt;
    EXPECT_NEAR(traj.post_jump[i], traj.pre_jump[i] * factor, 1e-15 * traj.post_jump[i]);
  }
}

TEST(Trajectory, NoJumpModelHasEqualPreAndPost) {
  ModelSpec m = reference_model(0.7, 0.5);
  m.lambda = 0.0;
  const Trajectory traj = run(m, half_implicit(64), 8, 2);
  EXPECT_EQ(traj.pre_jump, traj.post_jump);
}

TEST(Trajectory, SingleJumpDecomposition) {
  ModelSpec m = reference_model(0.5, 1.0);
  m.lambda = 1e-3;
  const std::vector<double> jumps{0.3};
  const JumpAdaptedGrid g = build_grid(1.0, 1.0, 8, jumps);
  std::vector<double> inc(g.interval_count(), 0.01);
  const Trajectory traj = simulate_path(m, half_implicit(8), g, inc);
  std::size_t jumps_seen = 0;
  for (std::size_t i = g.origin() + 1; i < g.size(); ++i) {
    const double dt = g.time(i) - g.time(i - 1);
    if (g.is_jump(i)) {
      ++jumps_seen;
      EXPECT_DOUBLE_EQ(g.time(i), 0.3);
      EXPECT_NEAR(traj.post_jump[i] / traj.pre_jump[i], 1.0 + 2.0 * (1.0 - m.lambda * dt), 1e-14);
    } else {
      EXPECT_NEAR(traj.post_jump[i] / traj.pre_jump[i], 1.0 - 2.0 * m.lambda * dt, 1e-14);
    }
  }
  EXPECT_EQ(jumps_seen, 1u);
}

TEST(Trajectory, ReferenceModelStaysPositive) {
  for (double alpha : {0.5, 0.7, 0.9}) {
    const ModelSpec m = reference_model(alpha, alpha == 0.5 ? 1.0 : 0.5);
    for (std::uint64_t p = 0; p < 200; ++p) {
      const Trajectory traj = run(m, half_implicit(128), 2025, p);
      ASSERT_GT(traj.min_value(), 0.0);
      ASSERT_EQ(traj.clamp_count, 0u);
      ASSERT_EQ(traj.negative_count(), 0u);
    }
  }
}

TEST(Trajectory, DeterministicFixedPointHolds) {
  const ModelSpec m = deterministic_model(0.08);
  const Trajectory traj = run(m, half_implicit(128), 1, 0);
  for (double v : traj.post_jump) ASSERT_NEAR(v, 0.08, 1e-12 * 0.08);
}

TEST(Trajectory, DeterministicTrapezoidOrder) {
  const ModelSpec m = deterministic_model(1.0);
  const double exact = m.k1 / m.k2 + (1.0 - m.k1 / m.k2) * std::exp(-m.k2);
  std::vector<double> err;
  for (int l = 32; l <= 512; l *= 2) err.push_back(std::abs(run(m, half_implicit(l), 1, 0).terminal() - exact));
  for (std::size_t i = 0; i + 1 < err.size(); ++i) EXPECT_GE(std::log2(err[i] / err[i + 1]), 1.9);
  EXPECT_LT(std::abs(run(m, half_implicit(128), 1, 0).terminal() - exact) / exact, 1e-4);
}

TEST(Trajectory, ExplicitEulerFirstOrderOnLinearOde) {
  const ModelSpec m = deterministic_model(1.0);
  const double exact = m.k1 / m.k2 + (1.0 - m.k1 / m.k2) * std::exp(-m.k2);
  std::vector<double> err;
  for (int l = 64; l <= 1024; l *= 2) {
    const NoiseBundle b = make_noise_bundle(m, l, 1, 0);
    err.push_back(std::abs(euler_maruyama_path(m, b.fine_grid, b.wiener_fine).terminal() - exact));
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double rate = std::log2(err[i] / err[i + 1]);
    EXPECT_GT(rate, 0.9);
    EXPECT_LT(rate, 1.1);
  }
}

TEST(Trajectory, EulerMaruyamaGoesNegativeAtCoarseStep) {
  const ModelSpec m = reference_model(0.5, 1.0);
  std::size_t negative_paths = 0;
  for (std::uint64_t p = 0; p < 10000; ++p) {
    const NoiseBundle b = make_noise_bundle(m, 32, 77, p);
    negative_paths += euler_maruyama_path(m, b.fine_grid, b.wiener_fine).negative_count() > 0;
  }
  EXPECT_GT(negative_paths, 0u);
}

TEST(Trajectory, EulerMaruyamaSelfConsistency) {
  const ModelSpec m = reference_model(0.7, 0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (int l : {32, 64, 128}) {
    double sq = 0.0;
    constexpr int paths = 400;
    for (std::uint64_t p = 0; p < paths; ++p) {
      const NoiseBundle b = make_noise_bundle(m, 4 * l, 5, p);
      const JumpAdaptedGrid c1 = build_grid(1.0, 1.0, l, b.jump_times);
      const JumpAdaptedGrid c2 = build_grid(1.0, 1.0, 2 * l, b.jump_times);
      const double y1 = euler_maruyama_path(m, c1, wiener_increments_for_grid(b, c1)).terminal();
      const double y2 = euler_maruyama_path(m, c2, wiener_increments_for_grid(b, c2)).terminal();
      sq += (y1 - y2) * (y1 - y2);
    }
    const double rms = std::sqrt(sq / paths);
    EXPECT_LT(rms, prev) << "l=" << l;
    prev = rms;
  }
}

TEST(DelayLookup, SegmentNodesAndIntervals) {
  const ModelSpec m = reference_model(0.5, 1.0);
  const std::vector<double> jumps{0.3};
  const JumpAdaptedGrid g = build_grid(1.0, 2.0, 4, jumps);
  ModelSpec m2 = m.with_horizon(2.0);
  std::vector<double> inc(g.interval_count(), 0.02);
  const Trajectory traj = simulate_path(m2, half_implicit(4), g, inc);

  EXPECT_EQ(delay_lookup(traj, -0.5, m2), 1.0);
  const std::size_t half = g.origin() + 3;  // nodes 0, 0.25, 0.3, 0.5
  ASSERT_DOUBLE_EQ(g.time(half), 0.5);
  EXPECT_EQ(delay_lookup(traj, 0.5, m2), traj.post_jump[half]);
  EXPECT_EQ(delay_lookup(traj, 0.6, m2), traj.post_jump[half]);
  EXPECT_EQ(delay_lookup(traj, 0.3, m2), traj.post_jump[g.origin() + 2]);
  EXPECT_EQ(delay_lookup(traj, 0.3, m2, DelayValue::pre_jump), traj.pre_jump[g.origin() + 2]);
  EXPECT_THROW(delay_lookup(traj, 0.6, m2, DelayValue::post_jump, g.origin() + 1), std::out_of_range);
  EXPECT_THROW(delay_lookup(traj, -1.5, m2), std::out_of_range);
}

TEST(TrajectoryCsv, RoundTripsExactly) {
  const ModelSpec m = reference_model(0.7, 0.5);
  const Trajectory traj = run(m, half_implicit(32), 6, 1);
  std::stringstream buf;
  write_trajectory_csv(buf, traj);
  const CsvTable t = read_csv(buf);
  ASSERT_EQ(t.header, (std::vector<std::string>{"t", "y_pre", "y_post", "is_jump"}));
  ASSERT_EQ(t.rows.size(), traj.grid.size() - traj.grid.origin());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t i = traj.grid.origin() + r;
    EXPECT_EQ(t.number(r, "t"), traj.grid.time(i));
    EXPECT_EQ(t.number(r, "y_pre"), traj.pre_jump[i]);
    EXPECT_EQ(t.number(r, "y_post"), traj.post_jump[i]);
    EXPECT_EQ(t.number(r, "is_jump"), traj.grid.is_jump(i) ? 1.0 : 0.0);
  }
}
