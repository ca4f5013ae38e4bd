#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pbandit/banker.hpp"

using namespace pbandit;

namespace {

const Regularizer kEntropy2(RegularizerKind::NegativeEntropy, 2, 0.5);

// Plays round t with step sigma and pulls `arm` from the base point.
void play(BankerLedger& l, Round t, double sigma, Arm arm, double prob) {
  l.open_round(t);
  l.allocate_credits(t, sigma);
  l.record_action(t, sigma, grad_psi(kEntropy2, kEntropy2.base_point()), arm, prob);
}

}  // namespace

TEST(StepSize, NoDelayGrowsWithSqrtT) {
  const RegularityConstants c{2.0, 8.0};
  for (Round t = 1; t <= 50; ++t) EXPECT_NEAR(step_size(c, t, 1, 0, 0), 2.0 * std::sqrt(static_cast<double>(t)), 1e-12);
  EXPECT_NEAR(step_size(c, 11, 11, 0, 0), 2.0, 1e-15);
}

TEST(StepSize, WithOutstanding) {
  const RegularityConstants c{std::log(10.0), 100.0};
  const double expected = std::sqrt(100.0 / std::log(10.0)) / (0.5 + 2.0 * std::sqrt(std::log(4.0) / 3.0));
  EXPECT_NEAR(step_size(c, 4, 1, 2, 3), expected, 1e-12);
}

TEST(StepSize, Preconditions) {
  const RegularityConstants c{1.0, 1.0};
  EXPECT_THROW(step_size(c, 1, 2, 0, 0), PreconditionError);
  EXPECT_THROW(step_size(c, 3, 1, 2, 1), PreconditionError);
}

TEST(Credits, FirstRoundBorrowsEverything) {
  BankerLedger l(1);
  l.open_round(1);
  const auto a = l.allocate_credits(1, 2.5);
  EXPECT_TRUE(a.shares.empty());
  EXPECT_EQ(a.borrow, 2.5);
  EXPECT_EQ(l.cumulative_borrow(), 2.5);
}

TEST(Credits, MinRuleSingleDonor) {
  BankerLedger l(1);
  play(l, 1, 5.0, 0, 0.5);
  ASSERT_TRUE(l.ingest_feedback(kEntropy2, {1, 0, 0.2, 1}));
  l.open_round(2);
  const auto a = l.allocate_credits(2, 3.0);
  ASSERT_EQ(a.shares.size(), 1u);
  EXPECT_EQ(a.shares[0].donor, 1);
  EXPECT_EQ(a.shares[0].amount, 3.0);
  EXPECT_EQ(a.borrow, 0.0);
  EXPECT_EQ(l.record(1).credit, 2.0);
}

TEST(Credits, GreedyDrainInOrder) {
  BankerLedger l(1);
  play(l, 1, 1.0, 0, 0.5);
  play(l, 2, 1.0, 1, 0.5);
  l.ingest_feedback(kEntropy2, {2, 1, 0.3, 2});
  l.ingest_feedback(kEntropy2, {1, 0, 0.7, 2});
  l.open_round(3);
  const auto a = l.allocate_credits(3, 3.0);
  ASSERT_EQ(a.shares.size(), 2u);
  EXPECT_EQ(a.shares[0].donor, 1);
  EXPECT_EQ(a.shares[1].donor, 2);
  EXPECT_EQ(a.shares[0].amount, 1.0);
  EXPECT_EQ(a.shares[1].amount, 1.0);
  EXPECT_EQ(a.borrow, 1.0);
  EXPECT_LE(a.conservation_residual(), 1e-15);
}

TEST(Credits, MissingRoundsDoNotDonate) {
  BankerLedger l(1);
  play(l, 1, 4.0, 0, 0.5);
  l.open_round(2);
  const auto a = l.allocate_credits(2, 1.0);
  EXPECT_TRUE(a.shares.empty());
  EXPECT_EQ(l.missing_count(), 1u);
  EXPECT_EQ(l.missing_sigma(), 4.0);
}

TEST(Ingest, ZeroLossLeavesPointInPlace) {
  BankerLedger l(1);
  play(l, 1, 2.0, 1, 0.5);
  l.ingest_feedback(kEntropy2, {1, 1, 0.0, 1});
  const auto& r = l.record(1);
  EXPECT_EQ(*r.loss_estimate, 0.0);
  const auto z = *r.z(kEntropy2);
  EXPECT_NEAR(z[0], 0.5, 1e-15);
  EXPECT_NEAR(z[1], 0.5, 1e-15);
}

TEST(Ingest, ImportanceWeightedEstimate) {
  BankerLedger l(1);
  play(l, 1, 2.0, 1, 0.25);
  l.ingest_feedback(kEntropy2, {1, 1, 0.5, 3});
  const auto est = *l.record(1).estimator(2);
  EXPECT_EQ(est[0], 0.0);
  EXPECT_EQ(est[1], 2.0);
}

TEST(Ingest, RejectsDuplicatesAndMismatches) {
  BankerLedger l(1);
  play(l, 1, 2.0, 1, 0.25);
  EXPECT_THROW(l.ingest_feedback(kEntropy2, {1, 0, 0.5, 3}), ProtocolError);
  l.ingest_feedback(kEntropy2, {1, 1, 0.5, 3});
  EXPECT_THROW(l.ingest_feedback(kEntropy2, {1, 1, 0.5, 3}), ProtocolError);
}

TEST(Ingest, PrePhaseFeedbackDropped) {
  BankerLedger l(5);
  EXPECT_FALSE(l.ingest_feedback(kEntropy2, {3, 0, 0.5, 5}));
}

TEST(Predict, NoFeedbackIsBasePoint) {
  BankerCore core(kEntropy2);
  const auto p = core.predict(1);
  EXPECT_NEAR(p.iterate.primal[0], 0.5, 1e-15);
}

TEST(Predict, SingleDonorConsumingAllGivesItsPoint) {
  BankerLedger l(1);
  play(l, 1, 5.0, 0, 0.5);
  l.ingest_feedback(kEntropy2, {1, 0, 0.8, 1});
  l.open_round(2);
  const auto a = l.allocate_credits(2, 3.0);
  const auto x = predict(l, kEntropy2, a);
  const auto z = *l.record(1).z(kEntropy2);
  EXPECT_NEAR(x.primal[0], z[0], 1e-14);
  EXPECT_NEAR(x.primal[1], z[1], 1e-14);
}

TEST(Predict, EqualDonorsEntropyGeometricMean) {
  BankerLedger l(1);
  play(l, 1, 1.0, 0, 0.5);
  play(l, 2, 1.0, 1, 0.5);
  l.ingest_feedback(kEntropy2, {1, 0, 0.9, 2});
  l.ingest_feedback(kEntropy2, {2, 1, 0.4, 2});
  l.open_round(3);
  const auto a = l.allocate_credits(3, 2.0);
  ASSERT_EQ(a.borrow, 0.0);
  const auto x = predict(l, kEntropy2, a);
  const auto z1 = *l.record(1).z(kEntropy2);
  const auto z2 = *l.record(2).z(kEntropy2);
  const double g0 = std::sqrt(z1[0] * z2[0]), g1 = std::sqrt(z1[1] * z2[1]);
  EXPECT_NEAR(x.primal[0], g0 / (g0 + g1), 1e-14);
  EXPECT_NEAR(x.primal[1], g1 / (g0 + g1), 1e-14);
}

TEST(Core, ConservationOverRandomPlay) {
  const Regularizer reg(RegularizerKind::TsallisHalf, 4, 0.1);
  BankerCore core(reg);
  Rng rng(4);
  FeedbackQueue q(400);
  for (Round t = 1; t <= 400; ++t) {
    const auto p = core.predict(t);
    EXPECT_LE(p.allocation.conservation_residual(), 1e-12);
    const Arm arm = p.iterate.primal.sample(uniform01(rng));
    core.commit(p, arm, p.iterate.primal[arm]);
    q.push({t, arm, uniform01(rng), t + std::uniform_int_distribution<Round>(0, 6)(rng)});
    for (const auto& e : q.step(t)) core.ingest(e);
    for (Round u = 1; u <= t; ++u) ASSERT_GE(core.ledger().record(u).credit, 0.0);
  }
}

TEST(Core, ResetStartsNewPhase) {
  BankerCore core(kEntropy2);
  core.commit(core.predict(1), 0, 0.5);
  core.reset(3);
  EXPECT_EQ(core.ledger().phase_start(), 3);
  EXPECT_THROW(core.predict(2), ProtocolError);
  const auto p = core.predict(3);
  EXPECT_NEAR(p.sigma, std::sqrt(kEntropy2.constants().c2 / kEntropy2.constants().c1), 1e-12);
}

TEST(Stability, ExpectedTermMatchesEnumeration) {
  const Regularizer reg(RegularizerKind::NegativeEntropy, 3, 0.1);
  const SimplexPoint x({0.2, 0.3, 0.5});
  const std::vector<double> loss{0.4, 0.0, 0.9};
  const double sigma = 7.0;
  double direct = 0.0;
  for (Arm a = 0; a < 3; ++a) {
    auto theta = grad_psi(reg, x);
    theta[a] -= loss[a] / (x[a] * sigma);
    direct += x[a] * sigma * bregman(reg, x, grad_psi_star_constrained(reg, theta));
  }
  EXPECT_NEAR(*expected_stability_term(reg, x, loss, sigma), direct, 1e-12);
  EXPECT_LE(*expected_stability_term(reg, x, loss, sigma), reg.constants().c2 / sigma);
}

TEST(Ledger, DumpListsRecords) {
  BankerLedger l(1);
  play(l, 1, 2.0, 1, 0.25);
  std::ostringstream os;
  l.dump(os, kEntropy2);
  EXPECT_NE(os.str().find("1 missing 2"), std::string::npos);
}
