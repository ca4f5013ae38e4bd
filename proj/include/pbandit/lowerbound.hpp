#pragma once

// Lower-bound machinery: greedy bucket decomposition of a delay sequence,
// the structured corollary delays, the batched hard-instance pair, the
// delayed-to-batched simulation wrapper and a Monte-Carlo probe of the
// safety-regret identity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbandit/error.hpp"
#include "pbandit/learner.hpp"
#include "pbandit/mirror.hpp"
#include "pbandit/numeric.hpp"
#include "pbandit/protocol.hpp"
#include "pbandit/rng.hpp"

namespace pbandit {

struct BucketDecomposition {
  std::vector<Round> boundaries;  // b_1 = 1 < b_2 < ... < b_{M+1} = T + 1

  std::size_t count() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  // m is 1-based.
  Round begin(std::size_t m) const { return boundaries[m - 1]; }
  Round end(std::size_t m) const { return boundaries[m]; }  // exclusive
  std::int64_t length(std::size_t m) const { return end(m) - begin(m); }

  std::vector<std::int64_t> lengths() const {
    std::vector<std::int64_t> out(count());
    for (std::size_t m = 1; m <= count(); ++m) out[m - 1] = length(m);
    return out;
  }

  // V_j = sum_{m >= j} L_m^2.
  std::int64_t suffix_complexity(std::size_t j) const {
    std::int64_t v = 0;
    for (std::size_t m = j; m <= count(); ++m) v += length(m) * length(m);
    return v;
  }
};

// d_t >= 1, non-increasing, and t + d_t <= T + 1.
inline void check_bucket_preconditions(const DelaySequence& delays) {
  const Round T = delays.horizon();
  for (Round t = 1; t <= T; ++t) {
    if (delays[t] < 1) throw PreconditionError("greedy buckets: d_" + std::to_string(t) + " < 1");
    if (delays[t] > T + 1 - t) throw PreconditionError("greedy buckets: d_" + std::to_string(t) + " > T + 1 - t");
    if (t > 1 && delays[t] > delays[t - 1]) {
      throw PreconditionError("greedy buckets: delays increase at t = " + std::to_string(t));
    }
  }
}

// b_1 = 1, b_{m+1} = min_{t >= b_m} (t + d_t), until b_{m+1} > T.
inline BucketDecomposition greedy_buckets(const DelaySequence& delays) {
  check_bucket_preconditions(delays);
  const Round T = delays.horizon();
  BucketDecomposition out;
  if (T == 0) return out;
  std::vector<Round> suffix_min(static_cast<std::size_t>(T) + 2, T + 2);
  for (Round t = T; t >= 1; --t) {
    suffix_min[static_cast<std::size_t>(t)] = std::min(suffix_min[static_cast<std::size_t>(t) + 1], t + delays[t]);
  }
  Round b = 1;
  out.boundaries.push_back(b);
  while (b <= T) {
    b = suffix_min[static_cast<std::size_t>(b)];
    out.boundaries.push_back(b);
  }
  return out;
}

// d_t = min{q, T + 1 - t} with T = (N + 1) q.
inline DelaySequence corollary_delays(std::int64_t q, std::int64_t n) {
  if (q < 1 || n < 1) throw PreconditionError("corollary delays need q >= 1 and N >= 1");
  const Round T = (n + 1) * q;
  std::vector<std::int64_t> d(static_cast<std::size_t>(T));
  for (Round t = 1; t <= T; ++t) d[static_cast<std::size_t>(t - 1)] = std::min<std::int64_t>(q, T + 1 - t);
  return DelaySequence(std::move(d));
}

inline std::int64_t corollary_total_delay(std::int64_t q, std::int64_t n) { return n * q * q + q * (q + 1) / 2; }

struct BucketCheck {
  bool monotone = true;               // L_1 >= ... >= L_M
  bool quadratic_dominance = true;    // L_m^2 >= sum_{t in B_{m+1}} d_t
  bool suffix_dominance = true;       // V_j >= sum of d_t outside the first j buckets
  bool bucket_property = true;        // no feedback lands inside its own bucket; some lands exactly at its end
  std::string first_failure;

  bool ok() const { return monotone && quadratic_dominance && suffix_dominance && bucket_property; }
};

// Exact integer check of the bucket inequalities.
inline BucketCheck check_buckets(const DelaySequence& delays, const BucketDecomposition& b) {
  BucketCheck c;
  auto note = [&](const std::string& s) {
    if (c.first_failure.empty()) c.first_failure = s;
  };
  const std::size_t M = b.count();
  std::vector<std::int64_t> mass(M + 1, 0);
  for (std::size_t m = 1; m <= M; ++m) {
    bool hits_end = false;
    for (Round t = b.begin(m); t < b.end(m); ++t) {
      mass[m] += delays[t];
      if (t + delays[t] < b.end(m)) {
        c.bucket_property = false;
        note("feedback of round " + std::to_string(t) + " lands inside bucket " + std::to_string(m));
      }
      if (t + delays[t] == b.end(m)) hits_end = true;
    }
    if (!hits_end) {
      c.bucket_property = false;
      note("bucket " + std::to_string(m) + " has no round arriving exactly at its end");
    }
  }
  for (std::size_t m = 1; m < M; ++m) {
    if (b.length(m) < b.length(m + 1)) {
      c.monotone = false;
      note("L_" + std::to_string(m) + " < L_" + std::to_string(m + 1));
    }
    if (b.length(m) * b.length(m) < mass[m + 1]) {
      c.quadratic_dominance = false;
      note("L_" + std::to_string(m) + "^2 < delay mass of bucket " + std::to_string(m + 1));
    }
  }
  for (std::size_t j = 1; j <= M; ++j) {
    std::int64_t rest = 0;
    for (std::size_t m = j + 1; m <= M; ++m) rest += mass[m];
    if (b.suffix_complexity(j) < rest) {
      c.suffix_dominance = false;
      note("V_" + std::to_string(j) + " < delay outside the first " + std::to_string(j) + " buckets");
    }
  }
  return c;
}

// Random admissible sequence: non-increasing, 1 <= d_t <= T + 1 - t.
inline DelaySequence random_admissible_delays(Round horizon, std::int64_t max_delay, Rng& rng) {
  std::vector<std::int64_t> d(static_cast<std::size_t>(horizon));
  std::int64_t prev = std::max<std::int64_t>(1, max_delay);
  for (Round t = 1; t <= horizon; ++t) {
    const std::int64_t cap = std::min<std::int64_t>(prev, horizon + 1 - t);
    std::uniform_int_distribution<std::int64_t> pick(std::max<std::int64_t>(1, cap - 2), cap);
    prev = pick(rng);
    d[static_cast<std::size_t>(t - 1)] = prev;
  }
  return DelaySequence(std::move(d));
}

enum class InstanceSign { Plus, Minus };

// Batched instance pair: arm index 1 (the second arm) is Bernoulli(1/2 +- eps_m)
// in block m, every other arm is fixed at 1/2.
class HardInstance {
 public:
  HardInstance(std::vector<std::int64_t> lengths, double delta, std::size_t arms)
      : lengths_(std::move(lengths)), delta_(delta), arms_(arms) {
    if (lengths_.empty()) throw PreconditionError("hard instance: no blocks");
    for (auto l : lengths_)
      if (l < 1) throw PreconditionError("hard instance: block lengths must be >= 1");
    if (arms_ < 2) throw PreconditionError("hard instance: need A >= 2");
    for (auto l : lengths_) v_ += l * l;
    const double l1 = static_cast<double>(lengths_[0]);
    const double v = static_cast<double>(v_);
    if (!(delta_ > 0.0)) throw PreconditionError("hard instance: delta > 0 failed");
    if (!(delta_ <= 1.0 / static_cast<double>(arms_))) throw PreconditionError("hard instance: delta <= 1/A failed");
    if (!(delta_ >= l1 / (64.0 * v))) throw PreconditionError("hard instance: delta >= L1/(64 V) failed");
    gamma_ = 1.0 / (32.0 * std::sqrt(l1 * delta_));
    for (auto l : lengths_) eps_.push_back(gamma_ * static_cast<double>(l) / std::sqrt(v));
    std::vector<double> xc(arms_, delta_);
    xc[0] = 1.0 - static_cast<double>(arms_ - 1) * delta_;
    comparator_ = SimplexPoint(std::move(xc));
  }

  const std::vector<std::int64_t>& lengths() const { return lengths_; }
  std::int64_t complexity() const { return v_; }  // V
  double gamma() const { return gamma_; }
  double delta() const { return delta_; }
  std::size_t arms() const { return arms_; }
  const std::vector<double>& eps() const { return eps_; }
  const SimplexPoint& comparator() const { return comparator_; }
  Round slots() const {
    Round s = 0;
    for (auto l : lengths_) s += l;
    return s;
  }

  double arm2_mean(std::size_t block, InstanceSign sign) const {
    return sign == InstanceSign::Plus ? 0.5 + eps_[block] : 0.5 - eps_[block];
  }

  // Pre-tabulated losses, one row per (block, slot) in order. The same
  // uniforms drive both signs, so the pair is coupled.
  LossTable sample(InstanceSign sign, Rng& rng) const {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(slots()) * arms_);
    for (std::size_t m = 0; m < lengths_.size(); ++m) {
      for (std::int64_t s = 0; s < lengths_[m]; ++s) {
        const double u = uniform01(rng);
        for (std::size_t a = 0; a < arms_; ++a) v.push_back(a == 1 ? (u < arm2_mean(m, sign) ? 1.0 : 0.0) : 0.5);
      }
    }
    return LossTable(slots(), arms_, std::move(v));
  }

 private:
  std::vector<std::int64_t> lengths_;
  double delta_;
  std::size_t arms_;
  std::int64_t v_ = 0;
  double gamma_ = 0.0;
  std::vector<double> eps_;
  SimplexPoint comparator_;
};

inline HardInstance make_hard_instance(std::vector<std::int64_t> lengths, double delta, std::size_t arms) {
  return HardInstance(std::move(lengths), delta, arms);
}

using LearnerFactory = std::function<std::unique_ptr<Learner>()>;

struct BatchedTranscript {
  std::vector<Arm> native_actions;
  std::vector<Arm> wrapped_actions;
  double native_regret = 0.0;
  double wrapped_regret = 0.0;

  bool identical() const { return native_actions == wrapped_actions && native_regret == wrapped_regret; }
};

namespace detail {

inline double transcript_regret(const LossTable& losses, const std::vector<Arm>& actions, const SimplexPoint& x) {
  double r = 0.0;
  for (Round t = 1; t <= losses.horizon(); ++t) {
    const auto row = losses.row(t);
    r += row[actions[static_cast<std::size_t>(t - 1)]] - dot(x.values(), row);
  }
  return r;
}

}  // namespace detail

// Runs a delayed learner natively on l(g) and inside the batched wrapper
// with boundaries b_1..b_{M+1}. Rounds before b_j carry zero losses; g holds
// one row per suffix round. Both runs share the uniform tape.
inline BatchedTranscript batched_simulate(const LearnerFactory& make_learner, const DelaySequence& delays,
                                          const std::vector<Round>& boundaries, std::size_t j, const LossTable& g,
                                          std::span<const double> tape, const SimplexPoint& comparator) {
  const Round T = delays.horizon();
  if (j < 1 || j + 1 > boundaries.size()) throw PreconditionError("batched simulation: suffix bucket out of range");
  const Round suffix_start = boundaries[j - 1];
  if (g.horizon() != T - suffix_start + 1) throw PreconditionError("batched simulation: g must cover the suffix");
  if (static_cast<Round>(tape.size()) < T) throw PreconditionError("batched simulation: tape shorter than T");
  const std::size_t A = g.arms();

  std::vector<double> full(static_cast<std::size_t>(T) * A, 0.0);
  for (Round t = suffix_start; t <= T; ++t) {
    const auto row = g.row(t - suffix_start + 1);
    std::copy(row.begin(), row.end(), full.begin() + static_cast<std::ptrdiff_t>((t - 1) * static_cast<Round>(A)));
  }
  const LossTable losses(T, A, std::move(full));

  BatchedTranscript out;

  // Native delayed run.
  {
    auto learner = make_learner();
    FeedbackQueue queue(T);
    for (Round t = 1; t <= T; ++t) {
      const auto d = learner->act(t, tape[static_cast<std::size_t>(t - 1)]);
      out.native_actions.push_back(d.arm);
      queue.push({t, d.arm, losses(t, d.arm), t + delays[t]});
      const auto arrivals = queue.step(t);
      learner->observe(t, arrivals);
    }
  }

  // Wrapped run: the simulator only learns a suffix round's loss once its
  // bucket has closed.
  {
    auto learner = make_learner();
    struct Pending {
      Round origin;
      Arm arm;
      std::optional<double> loss;
    };
    std::vector<std::vector<Pending>> due(static_cast<std::size_t>(T) + 2);
    std::vector<std::pair<Round, Arm>> open_block;
    std::size_t m = j;
    for (Round t = 1; t <= T; ++t) {
      const auto d = learner->act(t, tape[static_cast<std::size_t>(t - 1)]);
      out.wrapped_actions.push_back(d.arm);
      const Round arrival = t + delays[t];
      if (t < suffix_start) {
        if (arrival <= T) due[static_cast<std::size_t>(arrival)].push_back({t, d.arm, 0.0});
      } else {
        if (arrival <= T) due[static_cast<std::size_t>(arrival)].push_back({t, d.arm, std::nullopt});
        open_block.emplace_back(t, d.arm);
      }
      std::vector<FeedbackEvent> arrivals;
      for (const auto& p : due[static_cast<std::size_t>(t)]) {
        if (!p.loss) {
          throw IntegrityError("batched simulation: feedback of round " + std::to_string(p.origin) + " is due at round " +
                               std::to_string(t) + " before its bucket closed");
        }
        arrivals.push_back({p.origin, p.arm, *p.loss, t});
      }
      learner->observe(t, arrivals);
      if (m < boundaries.size() && t + 1 == boundaries[m]) {
        // Block closes: reveal its chosen losses to the simulator.
        for (auto [u, arm] : open_block) {
          const Round au = u + delays[u];
          if (au > T) continue;
          for (auto& p : due[static_cast<std::size_t>(au)])
            if (p.origin == u) p.loss = g(u - suffix_start + 1, arm);
        }
        open_block.clear();
        ++m;
      }
    }
  }

  out.native_regret = detail::transcript_regret(losses, out.native_actions, comparator);
  out.wrapped_regret = detail::transcript_regret(losses, out.wrapped_actions, comparator);
  return out;
}

inline BatchedTranscript batched_simulate(const LearnerFactory& make_learner, const DelaySequence& delays,
                                          std::size_t j, const LossTable& g, std::span<const double> tape,
                                          const SimplexPoint& comparator) {
  return batched_simulate(make_learner, delays, greedy_buckets(delays).boundaries, j, g, tape, comparator);
}

// A batched policy picks an arm for (block, slot) from its own randomness.
using BatchedPolicy = std::function<Arm(std::size_t block, std::int64_t slot, Rng& rng)>;

inline BatchedPolicy always_arm(Arm a) {
  return [a](std::size_t, std::int64_t, Rng&) { return a; };
}

inline BatchedPolicy sample_from(SimplexPoint p) {
  return [p = std::move(p)](std::size_t, std::int64_t, Rng& rng) { return p.sample(uniform01(rng)); };
}

struct ProbeResult {
  std::int64_t trials = 0;
  double mean_regret = 0.0;
  double mean_weight = 0.0;  // E[W]
  double predicted = 0.0;    // gamma sqrt(V) (E[W] - delta)
  double mean_difference = 0.0;
  double difference_se = 0.0;
  bool within_3se = false;
};

// Comparator regret of a batched policy under E+, against the identity
// R = gamma sqrt(V) (E[W] - delta), tested on the paired per-trial difference.
inline ProbeResult safety_gap_probe(const HardInstance& inst, const BatchedPolicy& policy, std::int64_t trials,
                                    std::uint64_t seed) {
  if (trials < 10000) throw PreconditionError("safety gap probe needs at least 1e4 trials");
  StreamFactory streams(seed);
  Rng env_rng = streams.stream("hard-instance");
  Rng policy_rng = streams.stream("policy");
  const double scale = inst.gamma() * std::sqrt(static_cast<double>(inst.complexity()));
  const double v = static_cast<double>(inst.complexity());
  double sum_r = 0.0, sum_w = 0.0, sum_diff = 0.0, sum_diff2 = 0.0;
  const auto& xc = inst.comparator();
  for (std::int64_t k = 0; k < trials; ++k) {
    const auto g = inst.sample(InstanceSign::Plus, env_rng);
    double r = 0.0, w = 0.0;
    Round row = 1;
    for (std::size_t m = 0; m < inst.lengths().size(); ++m) {
      std::int64_t plays = 0;
      for (std::int64_t s = 0; s < inst.lengths()[m]; ++s, ++row) {
        const Arm a = policy(m, s, policy_rng);
        const auto l = g.row(row);
        r += l[a] - dot(xc.values(), l);
        if (a == 1) ++plays;
      }
      w += static_cast<double>(inst.lengths()[m] * plays) / v;
    }
    const double diff = r - scale * (w - inst.delta());
    sum_r += r;
    sum_w += w;
    sum_diff += diff;
    sum_diff2 += diff * diff;
  }
  const double n = static_cast<double>(trials);
  ProbeResult p;
  p.trials = trials;
  p.mean_regret = sum_r / n;
  p.mean_weight = sum_w / n;
  p.predicted = scale * (p.mean_weight - inst.delta());
  p.mean_difference = sum_diff / n;
  const double var = std::max(0.0, (sum_diff2 - n * p.mean_difference * p.mean_difference) / (n - 1.0));
  p.difference_se = std::sqrt(var / n);
  p.within_3se = std::abs(p.mean_difference) <= 3.0 * p.difference_se + 1e-12;
  return p;
}

}  // namespace pbandit
