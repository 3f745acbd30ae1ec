#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include <adapted_mech/integrate.hpp>
#include <adapted_mech/lagrangian.hpp>

#include "oracles.hpp"

using namespace adapted_mech;

namespace {

BundlePoint pt(double x, double y) { return BundlePoint(Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, y)); }

const Rhs rotation = [](const BundlePoint& p) { return Eigen::Vector2d(p.y(1), -p.x(1)).eval(); };
const Rhs growth = [](const BundlePoint& p) { return Eigen::Vector2d(p.x(1), -p.y(1)).eval(); };

IntegratorConfig rk4(double t1, double step = 1e-3) {
  IntegratorConfig cfg;
  cfg.t1 = t1;
  cfg.step = step;
  return cfg;
}

IntegratorConfig rk45(double t1, double rtol, double atol) {
  IntegratorConfig cfg;
  cfg.method = Method::rk45;
  cfg.t1 = t1;
  cfg.rtol = rtol;
  cfg.atol = atol;
  return cfg;
}

double final_error(const Rhs& f, const IntegratorConfig& cfg) {
  const Trajectory t = integrate(f, pt(1, 0), cfg);
  return (t.states.back().natural() - oracle::rotation(1, 0, cfg.t1)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Rk4, OscillatorOrbitCloses) {
  const Trajectory t = integrate(rotation, pt(1, 0), rk4(2 * std::numbers::pi));
  ASSERT_TRUE(t.termination.completed);
  // 2*pi / 1e-3 is not an integer: 6283 full steps plus a truncated one, and the initial sample.
  EXPECT_EQ(t.size(), 6285u);
  EXPECT_EQ(t.accepted_steps, 6284u);
  EXPECT_EQ(t.times.front(), 0.0);
  EXPECT_EQ(t.times.back(), 2 * std::numbers::pi);
  for (std::size_t s = 1; s < t.size(); ++s) EXPECT_LT(t.times[s - 1], t.times[s]);
  EXPECT_NEAR(t.states.back().x(1), 1.0, 1e-6);
  EXPECT_NEAR(t.states.back().y(1), 0.0, 1e-6);
}

TEST(Rk4, ExponentialFlow) {
  const Trajectory t = integrate(growth, pt(1, 1), rk4(1.0));
  EXPECT_EQ(t.size(), 1001u);
  const Eigen::Vector2d exact = oracle::hyperbolic(1, 1, 1.0);
  EXPECT_NEAR(t.states.back().x(1), exact(0), 1e-6);
  EXPECT_NEAR(t.states.back().y(1), exact(1), 1e-6);
}

TEST(Rk4, ZeroFieldKeepsStateBitExact) {
  const Rhs zero = [](const BundlePoint& p) { return Eigen::VectorXd::Zero(p.natural().size()).eval(); };
  const Trajectory t = integrate(zero, pt(0.1, -0.3), rk4(1.0, 0.1));
  for (const auto& s : t.states) EXPECT_EQ(s.natural(), pt(0.1, -0.3).natural());
}

TEST(Rk4, FourthOrderConvergence) {
  const double T = 2 * std::numbers::pi;
  const double coarse = final_error(rotation, rk4(T, T / 50));
  const double fine = final_error(rotation, rk4(T, T / 100));
  EXPECT_GE(coarse / fine, 12.0) << coarse << " / " << fine;
}

TEST(Rk4, SampleStride) {
  IntegratorConfig cfg = rk4(1.0, 0.1);
  cfg.sample_stride = 3;
  const Trajectory t = integrate(rotation, pt(1, 0), cfg);
  // steps 3, 6, 9 and the final step 10
  ASSERT_EQ(t.size(), 5u);
  EXPECT_NEAR(t.times[1], 0.3, 1e-15);
  EXPECT_NEAR(t.times[3], 0.9, 1e-15);
  EXPECT_EQ(t.times[4], 1.0);
}

TEST(Rk45, MeetsTolerance) {
  const double T = 2 * std::numbers::pi;
  for (double rtol : {1e-6, 1e-8, 1e-10}) {
    const double err = final_error(rotation, rk45(T, rtol, rtol * 1e-2));
    EXPECT_LE(err, 100 * rtol) << "rtol=" << rtol;
  }
}

TEST(Rk45, EndsExactlyAtFinalTime) {
  const Trajectory t = integrate(growth, pt(1, 1), rk45(1.0, 1e-9, 1e-12));
  ASSERT_TRUE(t.termination.completed);
  EXPECT_EQ(t.times.back(), 1.0);
  EXPECT_NEAR(t.states.back().x(1), std::exp(1.0), 1e-7);
  EXPECT_GT(t.accepted_steps, 1u);
}

TEST(Integrate, Deterministic) {
  for (const IntegratorConfig& cfg : {rk4(3.0), rk45(3.0, 1e-8, 1e-10)}) {
    const Trajectory a = integrate(rotation, pt(0.3, 0.7), cfg);
    const Trajectory b = integrate(rotation, pt(0.3, 0.7), cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
      EXPECT_EQ(a.times[s], b.times[s]);
      EXPECT_EQ(a.states[s].natural(), b.states[s].natural());
    }
  }
}

TEST(Integrate, EmptySpanGivesSingleSample) {
  IntegratorConfig cfg = rk4(0.0);
  const Trajectory t = integrate(rotation, pt(1, 0), cfg);
  EXPECT_TRUE(t.termination.completed);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.states[0].natural(), pt(1, 0).natural());
}

TEST(Integrate, InvalidConfigThrows) {
  IntegratorConfig cfg = rk4(-1.0);
  EXPECT_THROW(integrate(rotation, pt(1, 0), cfg), std::invalid_argument);
  cfg = rk4(1.0, 0.0);
  EXPECT_THROW(integrate(rotation, pt(1, 0), cfg), std::invalid_argument);
  cfg = rk45(1.0, -1.0, 1.0);
  EXPECT_THROW(integrate(rotation, pt(1, 0), cfg), std::invalid_argument);
  cfg = rk4(1.0);
  cfg.sample_stride = 0;
  EXPECT_THROW(integrate(rotation, pt(1, 0), cfg), std::invalid_argument);
}

TEST(Integrate, FailingRhsAtStartRecordsNothing) {
  const Rhs bad = [](const BundlePoint&) -> Eigen::VectorXd { throw std::runtime_error("boom"); };
  const Trajectory t = integrate(bad, pt(1, 0), rk4(1.0));
  EXPECT_FALSE(t.termination.completed);
  EXPECT_EQ(t.termination.reason, "boom");
  EXPECT_EQ(t.termination.time, 0.0);
  EXPECT_EQ(t.size(), 0u);
}

TEST(Integrate, AbortMidRunKeepsFiniteSamples) {
  // Throws once x passes 0.5; the samples before that are kept.
  const Rhs bounded = [](const BundlePoint& p) -> Eigen::VectorXd {
    if (p.x(1) > 0.5) throw std::domain_error("left the chart");
    return Eigen::Vector2d(1.0, 0.0);
  };
  const Trajectory t = integrate(bounded, pt(0, 0), rk4(1.0, 0.01));
  EXPECT_FALSE(t.termination.completed);
  EXPECT_EQ(t.termination.reason, "left the chart");
  EXPECT_NEAR(t.termination.time, 0.5, 0.02);
  ASSERT_GT(t.size(), 10u);
  for (const auto& s : t.states) EXPECT_TRUE(s.finite());
}

TEST(Integrate, NonFiniteRhsAborts) {
  const Rhs nan_rhs = [](const BundlePoint& p) {
    return Eigen::Vector2d(p.x(1) > 0.3 ? std::numeric_limits<double>::quiet_NaN() : 1.0, 0.0).eval();
  };
  const Trajectory t = integrate(nan_rhs, pt(0, 0), rk4(1.0, 0.01));
  EXPECT_FALSE(t.termination.completed);
  EXPECT_NE(t.termination.reason.find("non-finite"), std::string::npos);
  for (const auto& s : t.states) EXPECT_TRUE(s.finite());
}

TEST(Integrate, BlowUpStopsAdaptiveRun) {
  // x' = x^2 from x = 1 blows up at t = 1.
  const Rhs blow = [](const BundlePoint& p) { return Eigen::Vector2d(p.x(1) * p.x(1), 0.0).eval(); };
  const Trajectory t = integrate(blow, pt(1, 0), rk45(2.0, 1e-8, 1e-10));
  EXPECT_FALSE(t.termination.completed);
  EXPECT_LE(t.termination.time, 1.0 + 1e-6);
  for (const auto& s : t.states) EXPECT_TRUE(s.finite());
}

TEST(Integrate, NonFiniteInitialState) {
  const Trajectory t = integrate(rotation, pt(std::nan(""), 0), rk4(1.0));
  EXPECT_FALSE(t.termination.completed);
  EXPECT_EQ(t.size(), 0u);
}

TEST(Diagnostics, EvaluatedAtSamplesOnlyAndNaNOnFailure) {
  std::atomic<int> calls{0};
  const Diagnostic counted{"count", [&](const BundlePoint&) { return static_cast<double>(++calls); }};
  const Diagnostic failing{"fails", [](const BundlePoint& p) -> double {
                             if (p.x(1) < 0.9) throw std::runtime_error("nope");
                             return p.x(1);
                           }};
  const Diagnostic diags[] = {counted, failing};
  IntegratorConfig cfg = rk4(1.0, 0.1);
  cfg.sample_stride = 2;
  const Trajectory t = integrate(rotation, pt(1, 0), cfg, diags);
  EXPECT_EQ(static_cast<std::size_t>(calls.load()), t.size());
  EXPECT_EQ(t.diagnostic_names, (std::vector<std::string>{"count", "fails"}));
  EXPECT_EQ(t.diagnostic("fails", 0), 1.0);
  EXPECT_TRUE(std::isnan(t.diagnostic("fails", t.size() - 1)));
  EXPECT_THROW(t.diagnostic("missing", 0), std::out_of_range);
}

TEST(Sweep, PreservesOrderAndMatchesSingleRuns) {
  std::vector<SweepItem> items;
  for (int k = 0; k < 8; ++k) items.push_back({pt(0.1 * k, 0.5), {}});
  const IntegratorConfig cfg = rk4(1.0, 0.01);
  const auto results = sweep(std::span<const SweepItem>(items), cfg,
                             [](const SweepItem&) { return SweepJob{rotation, {}}; }, 4);
  ASSERT_EQ(results.size(), items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Trajectory single = integrate(rotation, items[k].initial, cfg);
    EXPECT_EQ(results[k].states.back().natural(), single.states.back().natural());
  }
}

TEST(Sweep, EmptyItemList) {
  const auto results = sweep(std::span<const SweepItem>(), rk4(1.0), [](const SweepItem&) { return SweepJob{rotation, {}}; });
  EXPECT_TRUE(results.empty());
}

TEST(Sweep, DegenerateItemDoesNotAffectOthers) {
  std::vector<SweepItem> items{{pt(1, 0), {{"k", 1.0}}}, {pt(1, 0), {{"k", 0.0}}}, {pt(0.5, 0), {{"k", 2.0}}}};
  const Expression L = parse("0.5*y1^2 - 0.5*k*x1^2", 1, {"k"});
  auto factory = [&](const SweepItem& item) {
    return SweepJob{rhs_euler_lagrange({1, L, Connection(1), item.overrides}), {}};
  };
  const auto results = sweep(std::span<const SweepItem>(items), rk4(1.0, 0.01), factory, 3);
  EXPECT_TRUE(results[0].termination.completed);
  EXPECT_FALSE(results[1].termination.completed);
  EXPECT_NE(results[1].termination.reason.find("DegenerateEulerLagrange"), std::string::npos);
  EXPECT_EQ(results[1].size(), 0u);
  EXPECT_TRUE(results[2].termination.completed);
}

TEST(Sweep, FactoryFailureIsRecorded) {
  std::vector<SweepItem> items{{pt(1, 0), {}}, {pt(2, 0), {}}};
  auto factory = [](const SweepItem& item) -> SweepJob {
    if (item.initial.x(1) > 1.5) throw std::runtime_error("bad item");
    return SweepJob{rotation, {}};
  };
  const auto results = sweep(std::span<const SweepItem>(items), rk4(1.0, 0.1), factory, 2);
  EXPECT_TRUE(results[0].termination.completed);
  EXPECT_FALSE(results[1].termination.completed);
  EXPECT_EQ(results[1].termination.reason, "bad item");
}
