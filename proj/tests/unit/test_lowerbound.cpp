#include <gtest/gtest.h>

#include <cmath>

#include "pbandit/lowerbound.hpp"
#include "pbandit/prudent.hpp"

using namespace pbandit;

TEST(Buckets, UnitDelays) {
  const auto b = greedy_buckets(DelaySequence({1, 1, 1}));
  EXPECT_EQ(b.boundaries, (std::vector<Round>{1, 2, 3, 4}));
  EXPECT_EQ(b.lengths(), (std::vector<std::int64_t>{1, 1, 1}));
}

TEST(Buckets, CorollaryQ2) {
  const auto d = corollary_delays(2, 2);
  EXPECT_EQ(std::vector<std::int64_t>(d.values().begin(), d.values().end()),
            (std::vector<std::int64_t>{2, 2, 2, 2, 2, 1}));
  const auto b = greedy_buckets(d);
  EXPECT_EQ(b.boundaries, (std::vector<Round>{1, 3, 5, 7}));
  EXPECT_EQ(b.suffix_complexity(1), 12);
  EXPECT_EQ(b.suffix_complexity(3), 4);
}

TEST(Buckets, Preconditions) {
  EXPECT_THROW(greedy_buckets(DelaySequence({1, 2, 1})), PreconditionError);
  EXPECT_THROW(greedy_buckets(DelaySequence({0, 0})), PreconditionError);
  EXPECT_THROW(greedy_buckets(DelaySequence({3, 1})), PreconditionError);
}

TEST(Buckets, RandomAdmissibleInequalities) {
  Rng rng(21);
  for (int k = 0; k < 300; ++k) {
    const auto d = random_admissible_delays(std::uniform_int_distribution<Round>(1, 150)(rng),
                                            std::uniform_int_distribution<std::int64_t>(1, 40)(rng), rng);
    const auto b = greedy_buckets(d);
    const auto c = check_buckets(d, b);
    ASSERT_TRUE(c.ok()) << c.first_failure;
    const auto L = b.lengths();
    for (std::size_t m = 0; m + 1 < L.size(); ++m) {
      std::int64_t next = 0;
      for (Round t = b.begin(m + 2); t < b.end(m + 2); ++t) next += d[t];
      ASSERT_GE(L[m] * L[m], next);
    }
  }
}

TEST(Buckets, CheckFlagsBrokenDecomposition) {
  const auto d = corollary_delays(2, 2);
  BucketDecomposition bad{{1, 2, 5, 7}};
  EXPECT_FALSE(check_buckets(d, bad).ok());
}

TEST(Corollary, TotalDelay) {
  EXPECT_EQ(corollary_delays(1, 3).total(), 4);
  EXPECT_EQ(corollary_total_delay(1, 3), 4);
  EXPECT_EQ(corollary_delays(2, 2).total(), 11);
  for (std::int64_t q : {1, 2, 5})
    for (std::int64_t n = 1; n <= 10; ++n) {
      const auto d = corollary_delays(q, n);
      EXPECT_EQ(d.total(), corollary_total_delay(q, n));
      for (auto l : greedy_buckets(d).lengths()) EXPECT_EQ(l, q);
    }
}

TEST(HardInstance, WorkedExample) {
  const auto inst = make_hard_instance({2, 2, 2}, 0.25, 2);
  EXPECT_EQ(inst.complexity(), 12);
  EXPECT_NEAR(inst.gamma(), 1.0 / (32.0 * std::sqrt(0.5)), 1e-15);
  EXPECT_NEAR(inst.gamma(), 0.04419, 1e-5);
  for (double e : inst.eps()) {
    EXPECT_NEAR(e, 0.02552, 1e-5);
    EXPECT_LE(e, 0.25);
  }
  EXPECT_EQ(inst.comparator(), SimplexPoint({0.75, 0.25}));
}

TEST(HardInstance, SignsDifferOnlyInSecondArm) {
  const auto inst = make_hard_instance({3, 2}, 0.25, 3);
  for (std::size_t m = 0; m < 2; ++m)
    EXPECT_NEAR(inst.arm2_mean(m, InstanceSign::Plus) - inst.arm2_mean(m, InstanceSign::Minus), 2 * inst.eps()[m],
                1e-15);
  Rng a(4), b(4);
  const auto plus = inst.sample(InstanceSign::Plus, a);
  const auto minus = inst.sample(InstanceSign::Minus, b);
  for (Round t = 1; t <= plus.horizon(); ++t) {
    EXPECT_EQ(plus(t, 0), 0.5);
    EXPECT_EQ(minus(t, 2), 0.5);
  }
}

TEST(HardInstance, BoundaryDeltaAccepted) {
  // L1 / (64 V) with L = (2, 2, 2) is 2/768, exactly representable
  EXPECT_NO_THROW(make_hard_instance({2, 2, 2}, 2.0 / 768.0, 2));
  try {
    make_hard_instance({2, 2, 2}, 1.0 / 768.0, 2);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("L1/(64 V)"), std::string::npos);
  }
  EXPECT_THROW(make_hard_instance({2}, 0.6, 2), PreconditionError);
}

namespace {

LearnerFactory prudent_factory(Round T, std::size_t A, double delta) {
  return [=] {
    PrudentConfig pc{RegularizerKind::NegativeEntropy, delta, T, build_comparator(A, delta, 0)};
    return std::unique_ptr<Learner>(std::make_unique<PrudentBanker>(pc));
  };
}

LossTable random_table(Round T, std::size_t A, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(T) * A);
  for (auto& x : v) x = uniform01(rng);
  return LossTable(T, A, std::move(v));
}

// Always plays arm 0.
class AnchorPlayer : public Learner {
 public:
  explicit AnchorPlayer(std::size_t arms) : arms_(arms) {}
  std::string name() const override { return "anchor"; }
  Decision act(Round, double) override { return {SimplexPoint::vertex(arms_, 0), 0}; }
  void observe(Round, std::span<const FeedbackEvent>) override {}

 private:
  std::size_t arms_;
};

}  // namespace

TEST(Batched, IdentityOnCoupledSeeds) {
  const auto d = corollary_delays(2, 2);
  for (std::uint64_t s = 1; s <= 100; ++s) {
    Rng rng(s);
    const auto g = random_table(d.horizon(), 2, rng);
    std::vector<double> tape(static_cast<std::size_t>(d.horizon()));
    for (auto& u : tape) u = uniform01(rng);
    const auto r = batched_simulate(prudent_factory(d.horizon(), 2, 0.25), d, 1, g, tape, build_comparator(2, 0.25, 0));
    ASSERT_TRUE(r.identical()) << "seed " << s;
  }
}

TEST(Batched, SuffixStartAndZeroPrefix) {
  const auto d = corollary_delays(3, 4);
  const auto b = greedy_buckets(d);
  Rng rng(9);
  const Round suffix = b.begin(3);
  const auto g = random_table(d.horizon() - suffix + 1, 3, rng);
  std::vector<double> tape(static_cast<std::size_t>(d.horizon()));
  for (auto& u : tape) u = uniform01(rng);
  const auto xc = build_comparator(3, 0.2, 0);
  const auto r = batched_simulate(prudent_factory(d.horizon(), 3, 0.2), d, b.boundaries, 3, g, tape, xc);
  EXPECT_TRUE(r.identical());
  // zero-loss prefix: a learner that always plays the comparator's anchor
  // accrues regret only on the suffix
  const auto all_suffix = batched_simulate([] { return std::unique_ptr<Learner>(std::make_unique<AnchorPlayer>(3)); },
                                           d, b.boundaries, 3, g, tape, xc);
  double expected = 0.0;
  for (Round t = 1; t <= g.horizon(); ++t) expected += g(t, 0) - dot(xc.values(), g.row(t));
  EXPECT_NEAR(all_suffix.native_regret, expected, 1e-12);
}

TEST(Batched, DueBeforeBucketCloseIsIntegrityError) {
  // explicit boundaries that put a bucket end after feedback is due
  const DelaySequence d({1, 1, 1, 1});
  Rng rng(1);
  const auto g = random_table(4, 2, rng);
  const std::vector<double> tape(4, 0.3);
  EXPECT_THROW(batched_simulate([] { return std::unique_ptr<Learner>(std::make_unique<AnchorPlayer>(2)); }, d,
                                std::vector<Round>{1, 5}, 1, g, tape, SimplexPoint::uniform(2)),
               IntegrityError);
}

TEST(Probe, FixedPolicies) {
  const auto inst = make_hard_instance({2, 2, 2}, 0.25, 2);
  const double scale = inst.gamma() * std::sqrt(static_cast<double>(inst.complexity()));
  const auto a1 = safety_gap_probe(inst, always_arm(0), 20000, 1);
  EXPECT_EQ(a1.mean_weight, 0.0);
  EXPECT_NEAR(a1.predicted, -scale * 0.25, 1e-12);
  EXPECT_TRUE(a1.within_3se);
  const auto a2 = safety_gap_probe(inst, always_arm(1), 20000, 2);
  EXPECT_EQ(a2.mean_weight, 1.0);
  EXPECT_NEAR(a2.predicted, scale * 0.75, 1e-12);
  EXPECT_TRUE(a2.within_3se);
  const auto c = safety_gap_probe(inst, sample_from(inst.comparator()), 20000, 3);
  EXPECT_NEAR(c.mean_weight, 0.25, 0.02);
  EXPECT_TRUE(c.within_3se);
  EXPECT_THROW(safety_gap_probe(inst, always_arm(0), 100, 1), PreconditionError);
}
