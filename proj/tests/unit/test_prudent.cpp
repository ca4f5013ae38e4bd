#include <gtest/gtest.h>

#include <cmath>

#include "pbandit/prudent.hpp"

using namespace pbandit;

namespace {

ThresholdFunctions large_thresholds() {
  const Regularizer r(RegularizerKind::NegativeEntropy, 100, 0.001);
  return ThresholdFunctions(50000, r.constants(), 0.001);
}

}  // namespace

TEST(Thresholds, RhatWithoutDelay) {
  const auto tf = large_thresholds();
  EXPECT_NEAR(tf.rhat(0), 3.0 * std::sqrt(1000.0 * std::log(100.0)) * std::sqrt(50000.0), 1e-8);
  const ThresholdFunctions small(16, {2.0, 8.0}, 0.25);
  EXPECT_NEAR(small.rhat(0), 3.0 * std::sqrt(2.0 * 8.0 * 16.0), 1e-12);
}

TEST(Thresholds, RhatIncrement) {
  const auto tf = large_thresholds();
  EXPECT_NEAR(tf.rhat(1) - tf.rhat(0), tf.scale() * 7.0 * std::sqrt(2.0 * std::log(2.0)), 1e-8);
  EXPECT_GT(tf.rhat(1), tf.rhat(0));
}

TEST(Thresholds, Xi) {
  EXPECT_EQ(large_thresholds().xi(0), 0.0);
  EXPECT_NEAR(large_thresholds().xi(1), 2000.0, 1e-9);
  const ThresholdFunctions tf(10, {1.0, 1.0}, 0.5);
  EXPECT_NEAR(tf.xi(3), 8.0, 1e-12);
  EXPECT_THROW(tf.xi(-1), PreconditionError);
}

TEST(Thresholds, RestartThreshold) {
  const auto tf = large_thresholds();
  EXPECT_NEAR(tf.restart_threshold(0), 2.0 * tf.rhat(0), 1e-9);
  EXPECT_NEAR(tf.restart_threshold(1), 2.0 * tf.rhat(1) + 2000.0, 1e-9);
  for (std::int64_t d = 1; d < (1 << 20); d *= 2) EXPECT_GE(tf.restart_threshold(2 * d), tf.restart_threshold(d));
}

TEST(Thresholds, AlphaDoublesAndCaps) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.5);
  const double a1 = tf.alpha(1, 4);
  EXPECT_NEAR(tf.alpha(2, 4), std::min(2.0 * a1, 1.0), 1e-15);
  EXPECT_EQ(tf.alpha(60, 4), 1.0);
}

TEST(GapStatistic, Examples) {
  const auto xc3 = SimplexPoint::uniform(3);
  EXPECT_EQ(gap_statistic(std::vector<double>{0, 0, 0}, xc3).value, 0.0);
  EXPECT_NEAR(gap_statistic(std::vector<double>{1, 0, 0}, xc3).value, 1.0 / 3.0, 1e-15);
}

TEST(GapStatistic, VertexBruteForce) {
  Rng rng(2);
  for (int k = 0; k < 2000; ++k) {
    const std::size_t A = 2 + k % 5;
    const auto xc = build_comparator(A, 0.5 / static_cast<double>(A), k % A);
    std::vector<double> g(A);
    for (auto& v : g) v = 10.0 * uniform01(rng);
    double brute = -1e300;
    for (Arm i = 0; i < A; ++i) brute = std::max(brute, dot(g, xc.values()) - g[i]);
    ASSERT_EQ(gap_statistic(g, xc).value, brute);
  }
}

TEST(Comparator, Examples) {
  EXPECT_NEAR(build_comparator(100, 0.001, 7)[7], 0.901, 1e-12);
  const auto u = build_comparator(4, 0.25, 2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(u[i], 0.25);
  const auto two = build_comparator(2, 0.25, 0);
  EXPECT_EQ(two[0], 0.75);
  EXPECT_EQ(two[1], 0.25);
  EXPECT_THROW(build_comparator(4, 0.3, 0), ConfigError);
  EXPECT_THROW(build_comparator(4, 0.1, 4), ConfigError);
}

TEST(DelayEstimate, PowerOfTwoCeiling) {
  EXPECT_EQ(next_delay_estimate(3), 4);
  EXPECT_EQ(next_delay_estimate(4), 4);
  EXPECT_EQ(next_delay_estimate(5), 8);
  EXPECT_EQ(next_delay_estimate(0), 1);
}

TEST(HardRestart, TriggersAndDoubles) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.25);
  StagePhaseState s(tf, build_comparator(2, 0.25, 0));
  s.stage_delay = 3;
  const auto r = check_hard_restart(s, tf, 10);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->new_estimate, 4);
  EXPECT_LT(r->new_estimate, 2 * r->trigger_delay);
  EXPECT_EQ(s.stage, 2);
  EXPECT_EQ(s.stage_start, 11);
  EXPECT_EQ(s.phase, 1);
  EXPECT_EQ(s.stage_delay, 0);
  EXPECT_EQ(s.alpha, tf.alpha(1, 4));
}

TEST(HardRestart, ExactPowerOfTwo) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.25);
  StagePhaseState s(tf, build_comparator(2, 0.25, 0));
  s.stage_delay = 4;
  EXPECT_EQ(check_hard_restart(s, tf, 2)->new_estimate, 4);
}

TEST(HardRestart, NoTriggerLeavesState) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.25);
  StagePhaseState s(tf, build_comparator(2, 0.25, 0));
  s.delay_estimate = 8;
  s.stage_delay = 8;
  EXPECT_FALSE(check_hard_restart(s, tf, 5));
  EXPECT_EQ(s.stage, 1);
  EXPECT_EQ(s.stage_delay, 8);
}

TEST(SoftRestart, BelowThresholdNoTransition) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.25);
  StagePhaseState s(tf, build_comparator(2, 0.25, 0));
  s.gap.add(1, 1.0);
  EXPECT_FALSE(check_soft_restart(s, tf, 3));
  EXPECT_EQ(s.phase, 1);
}

TEST(SoftRestart, AboveThresholdDoublesAlpha) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.25);
  StagePhaseState s(tf, build_comparator(2, 0.25, 0));
  const double a1 = s.alpha;
  s.gap.add(1, 10.0 * tf.restart_threshold(1));
  const auto r = check_soft_restart(s, tf, 3);
  ASSERT_TRUE(r);
  EXPECT_EQ(s.phase, 2);
  EXPECT_EQ(s.phase_start, 4);
  EXPECT_NEAR(s.alpha, std::min(2.0 * a1, 1.0), 1e-15);
  EXPECT_EQ(s.gap.values()[1], 0.0);
}

TEST(SoftRestart, AlphaOneNeverTransitions) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.25);
  StagePhaseState s(tf, build_comparator(2, 0.25, 0));
  s.alpha = 1.0;
  s.gap.add(1, 1e12);
  EXPECT_FALSE(check_soft_restart(s, tf, 3));
}

TEST(Act, Mixtures) {
  const ThresholdFunctions tf(100, {1.0, 1.0}, 0.5);
  StagePhaseState s(tf, SimplexPoint::uniform(2));
  const auto e1 = SimplexPoint::vertex(2, 0);
  s.alpha = 0.5;
  EXPECT_EQ(act(s, e1, 0.1).distribution, SimplexPoint({0.75, 0.25}));
  s.alpha = 1.0;
  EXPECT_EQ(act(s, e1, 0.9).distribution, e1);
  s.alpha = 0.0;
  EXPECT_EQ(act(s, e1, 0.1).distribution, SimplexPoint::uniform(2));
}

namespace {

struct Run {
  std::vector<double> alphas;
  std::vector<int> stages;
  std::vector<double> min_prob;
};

Run drive(PrudentBanker& pb, const DelaySequence& d, const LossTable& losses, std::uint64_t seed) {
  Run out;
  Rng rng(seed);
  FeedbackQueue q(d.horizon());
  for (Round t = 1; t <= d.horizon(); ++t) {
    const auto dec = pb.act(t, uniform01(rng));
    out.alphas.push_back(pb.alpha());
    out.stages.push_back(pb.stage());
    out.min_prob.push_back(dec.distribution.min());
    q.push({t, dec.arm, losses(t, dec.arm), t + d[t]});
    pb.observe(t, q.step(t));
  }
  return out;
}

LossTable random_table(Round T, std::size_t A, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(T) * A);
  for (auto& x : v) x = uniform01(rng);
  return LossTable(T, A, std::move(v));
}

}  // namespace

TEST(PrudentBanker, NoDelaySingleStageAuditClean) {
  const Round T = 2000;
  const std::size_t A = 4;
  PrudentConfig pc{RegularizerKind::NegativeEntropy, 0.05, T, build_comparator(A, 0.05, 0)};
  PrudentBanker pb(pc);
  const DelaySequence d(std::vector<std::int64_t>(T, 0));
  const auto losses = random_table(T, A, 1);
  pb.enable_audit(&d, &losses);
  const auto r = drive(pb, d, losses, 2);
  for (std::size_t i = 1; i < r.alphas.size(); ++i) EXPECT_GE(r.alphas[i], r.alphas[i - 1]);
  EXPECT_EQ(pb.stage(), 1);
  EXPECT_TRUE(pb.hard_restarts().empty());
  EXPECT_TRUE(pb.audit()->ok()) << pb.audit()->violations.front();
  EXPECT_GT(pb.audit()->stability_checks, 0);
}

TEST(PrudentBanker, DelaysTriggerRestartsAndAuditHolds) {
  const Round T = 3000;
  const std::size_t A = 3;
  Rng rng(5);
  std::vector<std::int64_t> dv(T);
  for (auto& x : dv) x = uniform01(rng) < 0.2 ? std::uniform_int_distribution<std::int64_t>(1, 40)(rng) : 0;
  const DelaySequence d(dv);
  const auto losses = random_table(T, A, 6);
  PrudentConfig pc{RegularizerKind::TsallisHalf, 0.1, T, build_comparator(A, 0.1, 1)};
  PrudentBanker pb(pc);
  pb.enable_audit(&d, &losses);
  const auto r = drive(pb, d, losses, 7);
  ASSERT_FALSE(pb.hard_restarts().empty());
  for (const auto& h : pb.hard_restarts()) {
    EXPECT_LT(h.new_estimate, 2 * h.trigger_delay);
    EXPECT_GE(h.new_estimate, h.old_estimate);
    // the restart round is played from the mixture with the base point
    EXPECT_EQ(pb.ledger().phase_start() >= h.round + 1, true);
  }
  EXPECT_TRUE(pb.audit()->ok()) << pb.audit()->violations.front();
  EXPECT_GT(pb.audit()->missing_count_checks, 0);
  for (std::size_t i = 0; i < r.alphas.size(); ++i)
    if (r.alphas[i] <= 0.5) ASSERT_GE(r.min_prob[i], 0.1 / 2.0);
}

TEST(PrudentBanker, RejectsThinComparator) {
  PrudentConfig pc{RegularizerKind::NegativeEntropy, 0.2, 10, SimplexPoint({0.9, 0.1})};
  EXPECT_THROW(PrudentBanker{pc}, ConfigError);
}
