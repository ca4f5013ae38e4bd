#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>

#include "pbandit/baselines.hpp"
#include "pbandit/prudent.hpp"

using namespace pbandit;

TEST(Cucb, UnobservedAndDefaultArms) {
  ConservativeUcb c(4, {2, 0.6, 0.1}, 0.01);
  const auto b = c.bounds(0);
  EXPECT_EQ(b[0].lcb, 0.0);
  EXPECT_EQ(b[0].ucb, 1.0);
  EXPECT_EQ(b[2].lcb, 0.6);
  EXPECT_EQ(b[2].ucb, 0.6);
}

TEST(Cucb, ConfidenceRadiusFormula) {
  ConservativeUcb c(100, {0, 0.5, 0.1}, 2e-5);
  std::vector<FeedbackEvent> ev;
  for (Round u = 1; u <= 8; ++u) ev.push_back({u, 1, 0.5, 10});
  c.observe(10, ev);
  const double r = std::sqrt(2.0 * std::log(2.0 * 100.0 * 100.0 * 100.0 / 2e-5) / 8.0);
  const auto b = c.bounds(99);
  EXPECT_NEAR(b[1].lcb, std::max(0.0, 0.5 - r), 1e-15);
  EXPECT_NEAR(b[1].ucb, std::min(1.0, 0.5 + r), 1e-15);
}

TEST(Cucb, FirstRoundPlaysDefault) {
  ConservativeUcb c(4, {3, 0.5, 0.1}, 0.01);
  EXPECT_EQ(c.choose(0), 3u);
  EXPECT_EQ(c.act(1, 0.0).arm, 3u);
}

TEST(Cucb, AlphaOneAlwaysPlaysCandidate) {
  ConservativeUcb c(4, {3, 0.5, 1.0}, 0.01);
  for (Round t = 1; t <= 20; ++t) EXPECT_EQ(c.act(t, 0.0).arm, 0u);
}

TEST(Cucb, CandidateTiesToLowestIndex) {
  ConservativeUcb c(5, {4, 0.0, 0.1}, 0.01);
  EXPECT_EQ(c.choose(0), 0u);
}

TEST(Cucb, DefaultCandidateBudget) {
  // every other arm observed with reward 0: the default arm is the UCB pick
  ConservativeUcb c(2, {1, 0.8, 0.1}, 0.5);
  std::vector<FeedbackEvent> ev;
  for (Round u = 1; u <= 5000; ++u) ev.push_back({u, 0, 1.0, 5000});
  c.observe(5000, ev);
  const auto b = c.bounds(0);
  ASSERT_LT(b[0].ucb, 0.8);
  EXPECT_TRUE(c.budget_allows(b, 1, 0));  // 0.8 >= 0.9 * 0.8
  EXPECT_EQ(c.choose(0), 1u);
}

TEST(Exp3Ix, LearningRate) {
  EXPECT_NEAR(exp3ix_learning_rate(100, 50000), std::sqrt(std::log(100.0) / 5e6), 1e-15);
  EXPECT_NEAR(exp3ix_learning_rate(100, 50000), 9.6e-4, 1e-5);
  EXPECT_EQ(exp3ix_learning_rate(2, 1), 0.5);
}

TEST(Exp3Ix, ZeroLossNoChange) {
  SafeExp3Ix l(3, 100, {0, 0.5, 1.0});
  const auto d = l.act(1, 0.5);
  const std::vector<FeedbackEvent> ev{{1, d.arm, 0.0, 1}};
  l.observe(1, ev);
  for (double w : l.log_weights()) EXPECT_EQ(w, 0.0);
}

TEST(Exp3Ix, IxEstimator) {
  SafeExp3Ix l(2, 100, {0, 0.5, 1.0});
  const auto d = l.act(1, 0.9);  // uniform base, arm 1 with q = 0.5
  ASSERT_EQ(d.arm, 1u);
  const std::vector<FeedbackEvent> ev{{1, 1, 1.0, 1}};
  l.observe(1, ev);
  EXPECT_NEAR(l.log_weights()[1], -l.eta() * 1.0 / (0.5 + l.gamma()), 1e-15);
  EXPECT_EQ(l.gamma(), l.eta() / 2.0);
}

TEST(Exp3Ix, BudgetGate) {
  SafeExp3Ix strict(3, 100, {2, 0.5, 0.1});
  EXPECT_FALSE(strict.base_may_act(0));
  EXPECT_EQ(strict.act(1, 0.0).arm, 2u);
  EXPECT_EQ(strict.budget(), 0.5);

  SafeExp3Ix loose(3, 100, {2, 0.5, 1.0});
  EXPECT_TRUE(loose.base_may_act(0));
  SafeExp3Ix zero(3, 100, {2, 0.0, 0.1});
  EXPECT_TRUE(zero.base_may_act(0));
}

TEST(Exp3Ix, DefaultRoundsDoNotUpdateWeights) {
  SafeExp3Ix l(3, 100, {2, 0.5, 0.1});
  l.act(1, 0.0);
  const std::vector<FeedbackEvent> ev{{1, 2, 0.7, 1}};
  l.observe(1, ev);
  for (double w : l.log_weights()) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(l.budget(), 0.5);
}

TEST(FixedPolicies, Names) {
  EXPECT_EQ(play_fixed_arm(3, 1).name(), "play-fixed-arm(1)");
  EXPECT_EQ(play_comparator(SimplexPoint::uniform(2)).name(), "play-comparator");
  EXPECT_THROW(play_fixed_arm(3, 3), ConfigError);
}

namespace {

using Factory = std::function<std::unique_ptr<Learner>()>;

std::vector<Arm> actions(const Factory& make, const LossTable& losses, const DelaySequence& d,
                         const std::vector<double>& tape) {
  auto l = make();
  FeedbackQueue q(d.horizon());
  std::vector<Arm> out;
  for (Round t = 1; t <= d.horizon(); ++t) {
    const auto dec = l->act(t, tape[static_cast<std::size_t>(t - 1)]);
    out.push_back(dec.arm);
    q.push({t, dec.arm, losses(t, dec.arm), t + d[t]});
    l->observe(t, q.step(t));
  }
  return out;
}

// Losses of rounds whose feedback has not arrived by the end of t0 are
// replaced; actions through t0 + 1 must not change.
void expect_no_peeking(const Factory& make, std::size_t A, std::uint64_t seed) {
  const Round T = 300;
  Rng rng(seed);
  std::vector<std::int64_t> dv(T);
  for (auto& x : dv) x = std::uniform_int_distribution<std::int64_t>(0, 30)(rng);
  const DelaySequence d(dv);
  std::vector<double> base(static_cast<std::size_t>(T) * A), tape(static_cast<std::size_t>(T));
  for (auto& x : base) x = uniform01(rng);
  for (auto& x : tape) x = uniform01(rng);
  for (Round t0 : {10, 77, 150, 260}) {
    auto other = base;
    for (Round u = 1; u <= T; ++u) {
      if (u + d[u] <= t0) continue;
      for (std::size_t a = 0; a < A; ++a) other[static_cast<std::size_t>(u - 1) * A + a] = uniform01(rng);
    }
    const auto x = actions(make, LossTable(T, A, base), d, tape);
    const auto y = actions(make, LossTable(T, A, other), d, tape);
    for (Round t = 1; t <= t0 + 1; ++t)
      ASSERT_EQ(x[static_cast<std::size_t>(t - 1)], y[static_cast<std::size_t>(t - 1)]) << "t0=" << t0 << " t=" << t;
  }
}

}  // namespace

TEST(NoPeeking, ConservativeUcb) {
  expect_no_peeking([] { return std::make_unique<ConservativeUcb>(4, SafetyParams{1, 0.4, 0.3}, 0.01); }, 4, 1);
}

TEST(NoPeeking, SafeExp3Ix) {
  expect_no_peeking([] { return std::make_unique<SafeExp3Ix>(4, 300, SafetyParams{1, 0.4, 0.3}); }, 4, 2);
}

TEST(NoPeeking, BankerOmd) {
  expect_no_peeking(
      [] { return std::make_unique<BankerOmdLearner>(Regularizer(RegularizerKind::TsallisHalf, 3, 0.1)); }, 3, 3);
}

TEST(NoPeeking, PrudentBanker) {
  expect_no_peeking(
      [] {
        PrudentConfig pc{RegularizerKind::NegativeEntropy, 0.1, 300, build_comparator(3, 0.1, 2)};
        return std::make_unique<PrudentBanker>(pc);
      },
      3, 4);
}
