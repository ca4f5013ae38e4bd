#pragma once

// Executable invariant suites. Each returns one CheckResult; the `verify`
// subcommand and the acceptance binary both run them.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pbandit/banker.hpp"
#include "pbandit/harness.hpp"
#include "pbandit/lowerbound.hpp"
#include "pbandit/mirror.hpp"
#include "pbandit/protocol.hpp"
#include "pbandit/prudent.hpp"
#include "pbandit/rng.hpp"

namespace pbandit::verify {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

template <typename F>
CheckResult timed(int id, std::string name, F&& body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

inline SimplexPoint random_interior(std::size_t arms, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(arms);
  double s = 0.0;
  for (auto& v : p) s += v = e(rng) + 1e-6;
  for (auto& v : p) v /= s;
  return SimplexPoint(std::move(p));
}

}  // namespace detail

// Credit conservation and nonnegative credits on a geometric-delay run.
inline CheckResult credit_conservation(std::uint64_t seed = 1) {
  return detail::timed(1, "credit conservation", [&](CheckResult& r) {
    auto c = scale_defaults(Scale::Desk);
    c.env.delay_model = GeometricDelay{};
    c.learners = {LearnerSpec{}};
    c.audit = true;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run(c, seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& a = res.traces[0].summary.audit;
    r.passed = a.rounds > 0 && a.max_conservation_residual <= 1e-9 && a.min_credit >= -1e-12 && secs < 10.0;
    r.detail = "rounds=" + std::to_string(a.rounds) + " max_residual=" + detail::fmt(a.max_conservation_residual) +
               " min_credit=" + detail::fmt(a.min_credit) + " run=" + detail::fmt(secs) + "s";
  });
}

// Delay-mass conservation: the running outstanding sum never exceeds the
// total delay and equals the truncated delay mass.
inline CheckResult delay_mass(std::uint64_t seed = 2, int sequences = 1000) {
  return detail::timed(2, "delay-mass conservation", [&](CheckResult& r) {
    Rng rng = StreamFactory(seed).stream("delay-mass");
    std::int64_t checks = 0, failures = 0;
    for (int k = 0; k < sequences; ++k) {
      const Round T = std::uniform_int_distribution<Round>(1, 200)(rng);
      const std::int64_t dmax = std::uniform_int_distribution<std::int64_t>(0, 40)(rng);
      std::vector<std::int64_t> d(static_cast<std::size_t>(T));
      for (auto& v : d) v = std::uniform_int_distribution<std::int64_t>(0, dmax)(rng);
      const DelaySequence delays(std::move(d));
      for (Round end = 1; end <= T; ++end) {
        const auto counts = outstanding_counters(delays, 1, end);
        ++checks;
        if (counts.cumulative > delays.window_total(1, end) ||
            counts.cumulative != truncated_delay_mass(delays, 1, end)) {
          ++failures;
        }
      }
    }
    r.passed = failures == 0 && r.seconds < 5.0;
    r.detail = std::to_string(checks) + " checkpoints, " + std::to_string(failures) + " failures";
  });
}

namespace detail {

inline std::vector<RunSummary> restart_runs() {
  std::vector<RunSummary> out;
  auto c = scale_defaults(Scale::Desk);
  c.env.horizon = 5000;
  c.env.blocks = 50;
  c.learners = {LearnerSpec{}};
  c.audit = true;
  for (const DelayModel& dm : {DelayModel{GeometricDelay{}}, DelayModel{LomaxDelay{}}, DelayModel{GeometricDelay{0.2, 0.2}}}) {
    c.env.delay_model = dm;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) out.push_back(run(c, seed).traces[0].summary);
  }
  return out;
}

}  // namespace detail

// Doubling bound at every hard restart and the stage-count bound.
inline CheckResult doubling_bound() {
  return detail::timed(3, "delay doubling bound", [&](CheckResult& r) {
    int runs = 0, restarts = 0, bad = 0;
    for (const auto& s : detail::restart_runs()) {
      if (s.hard_restarts.empty()) continue;
      ++runs;
      for (const auto& h : s.hard_restarts) {
        ++restarts;
        if (!(h.new_estimate < 2 * h.trigger_delay && h.new_estimate >= h.old_estimate)) ++bad;
      }
      const auto D = static_cast<std::uint64_t>(s.total_delay);
      const int bound = static_cast<int>(std::bit_width(D - 1)) + 1;  // ceil(log2 D) + 1
      if (D >= 1 && s.stages > bound) ++bad;
    }
    r.passed = runs > 0 && bad == 0;
    r.detail = std::to_string(runs) + " runs, " + std::to_string(restarts) + " restarts, " + std::to_string(bad) +
               " violations";
  });
}

// m(m+1)/2 <= realized delay of the m missing rounds, at every checkpoint.
inline CheckResult missing_count_bound() {
  return detail::timed(4, "missing-feedback count bound", [&](CheckResult& r) {
    std::int64_t checks = 0, violations = 0;
    for (const auto& s : detail::restart_runs()) {
      checks += s.audit.missing_count_checks;
      violations += s.audit.violations;
    }
    r.passed = checks > 0 && violations == 0;
    r.detail = std::to_string(checks) + " checkpoints, " + std::to_string(violations) + " audit violations";
  });
}

// Monte-Carlo mean of the importance-weighted estimator at a fixed x.
inline CheckResult estimator_unbiased(std::uint64_t seed = 5, int samples = 100000) {
  return detail::timed(5, "estimator unbiasedness", [&](CheckResult& r) {
    Rng rng = StreamFactory(seed).stream("estimator");
    const std::size_t A = 6;
    const double delta = 0.05;
    std::vector<double> p(A);
    double s = 0.0;
    for (auto& v : p) s += v = uniform01(rng);
    for (auto& v : p) v = delta / 2.0 + (1.0 - static_cast<double>(A) * delta / 2.0) * v / s;
    const SimplexPoint x(p);
    std::vector<double> loss(A);
    for (auto& v : loss) v = uniform01(rng);
    std::vector<double> sum(A, 0.0), sum2(A, 0.0);
    for (int k = 0; k < samples; ++k) {
      const Arm a = x.sample(uniform01(rng));
      const double est = loss[a] / x[a];
      sum[a] += est;
      sum2[a] += est * est;
    }
    const double n = samples;
    double worst = 0.0;
    bool ok = x.min() >= delta / 2.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double mean = sum[a] / n;
      const double var = (sum2[a] - n * mean * mean) / (n - 1.0);
      const double se = std::sqrt(var / n);
      const double z = se > 0.0 ? std::abs(mean - loss[a]) / se : (mean == loss[a] ? 0.0 : 1e9);
      worst = std::max(worst, z);
      if (z > 3.0) ok = false;
    }
    r.passed = ok;
    r.detail = "max |z| = " + detail::fmt(worst) + " over " + std::to_string(A) + " arms";
  });
}

// Conjugate of the gradient recovers the point; Bregman diameter <= C1.
inline CheckResult mirror_round_trip(std::uint64_t seed = 6, int points = 1000) {
  return detail::timed(6, "mirror round trip", [&](CheckResult& r) {
    Rng rng = StreamFactory(seed).stream("mirror");
    double worst_err = 0.0, worst_excess = -1e300;
    bool ok = true;
    for (auto kind : {RegularizerKind::NegativeEntropy, RegularizerKind::TsallisHalf}) {
      for (int k = 0; k < points; ++k) {
        const std::size_t A = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
        const Regularizer reg(kind, A, 1.0 / static_cast<double>(A));
        const auto x = detail::random_interior(A, rng);
        const auto y = conjugate_point(reg, grad_psi(reg, x)).primal;
        for (std::size_t i = 0; i < A; ++i) worst_err = std::max(worst_err, std::abs(x[i] - y[i]));
        const double excess = bregman(reg, x, reg.base_point()) - reg.constants().c1;
        worst_excess = std::max(worst_excess, excess);
        if (excess > 1e-12) ok = false;
      }
    }
    r.passed = ok && worst_err <= 1e-8;
    r.detail = "max round-trip error=" + detail::fmt(worst_err) + " max(D - C1)=" + detail::fmt(worst_excess);
  });
}

// Closed-form gap statistic against brute force over vertices.
inline CheckResult gap_oracle(std::uint64_t seed = 7, int vectors = 10000) {
  return detail::timed(7, "gap statistic oracle", [&](CheckResult& r) {
    Rng rng = StreamFactory(seed).stream("gap");
    int mismatches = 0;
    for (int k = 0; k < vectors; ++k) {
      const std::size_t A = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
      const double delta = uniform01(rng) / static_cast<double>(A) + 1e-9;
      const auto xc = build_comparator(A, std::min(delta, 1.0 / static_cast<double>(A)),
                                       std::uniform_int_distribution<Arm>(0, A - 1)(rng));
      std::vector<double> g(A);
      for (auto& v : g) v = 100.0 * uniform01(rng) * (uniform01(rng) < 0.1 ? 0.0 : 1.0);
      double brute = -1e300;
      for (Arm i = 0; i < A; ++i) {
        brute = std::max(brute, dot(g, xc.values()) - g[i]);
      }
      if (gap_statistic(g, xc).value != brute) ++mismatches;
    }
    r.passed = mismatches == 0;
    r.detail = std::to_string(vectors) + " vectors, " + std::to_string(mismatches) + " mismatches";
  });
}

// Bucket inequalities on random admissible and corollary sequences.
inline CheckResult bucket_suite(std::uint64_t seed = 8, int sequences = 500) {
  return detail::timed(8, "greedy bucket inequalities", [&](CheckResult& r) {
    Rng rng = StreamFactory(seed).stream("buckets");
    int failures = 0;
    std::string first;
    auto check = [&](const DelaySequence& d, const std::string& label) {
      const auto b = greedy_buckets(d);
      const auto c = check_buckets(d, b);
      if (!c.ok()) {
        ++failures;
        if (first.empty()) first = label + ": " + c.first_failure;
      }
      return b;
    };
    for (int k = 0; k < sequences; ++k) {
      const Round T = std::uniform_int_distribution<Round>(1, 300)(rng);
      const std::int64_t dmax = std::uniform_int_distribution<std::int64_t>(1, 60)(rng);
      check(random_admissible_delays(T, dmax, rng), "random #" + std::to_string(k));
    }
    for (std::int64_t q : {1, 2, 5}) {
      for (std::int64_t n = 1; n <= 20; ++n) {
        const auto d = corollary_delays(q, n);
        const auto b = check(d, "corollary q=" + std::to_string(q));
        for (auto l : b.lengths())
          if (l != q) ++failures;
        if (d.total() != corollary_total_delay(q, n)) ++failures;
      }
    }
    r.passed = failures == 0;
    r.detail = std::to_string(sequences) + " random + 60 corollary sequences, " + std::to_string(failures) +
               " failures" + (first.empty() ? "" : " (" + first + ")");
  });
}

// Native and batched-wrapper transcripts of Prudent-Banker coincide.
inline CheckResult batched_identity(int seeds = 100) {
  return detail::timed(9, "batched reduction identity", [&](CheckResult& r) {
    const auto delays = corollary_delays(2, 2);  // T = 6
    const std::size_t A = 2;
    int identical = 0;
    for (int s = 1; s <= seeds; ++s) {
      StreamFactory streams(static_cast<std::uint64_t>(s));
      Rng env_rng = streams.stream("losses");
      Rng tape_rng = streams.stream("tape");
      std::vector<double> g(static_cast<std::size_t>(delays.horizon()) * A);
      for (auto& v : g) v = uniform01(env_rng);
      const LossTable table(delays.horizon(), A, std::move(g));
      std::vector<double> tape(static_cast<std::size_t>(delays.horizon()));
      for (auto& u : tape) u = uniform01(tape_rng);
      const auto xc = build_comparator(A, 0.25, 0);
      LearnerFactory make = [&] {
        PrudentConfig pc;
        pc.delta = 0.25;
        pc.horizon = delays.horizon();
        pc.comparator = xc;
        return std::unique_ptr<Learner>(std::make_unique<PrudentBanker>(pc));
      };
      if (batched_simulate(make, delays, 1, table, tape, xc).identical()) ++identical;
    }
    r.passed = identical == seeds;
    r.detail = std::to_string(identical) + "/" + std::to_string(seeds) + " seeds identical";
  });
}

// R+ = gamma sqrt(V) (E[W] - delta) for three fixed batched policies.
inline CheckResult hard_instance_identity(std::int64_t trials = 100000) {
  return detail::timed(10, "hard-instance identity", [&](CheckResult& r) {
    const auto inst = make_hard_instance({2, 2, 2}, 0.25, 2);
    const std::vector<std::pair<std::string, BatchedPolicy>> policies{
        {"arm1", always_arm(0)}, {"arm2", always_arm(1)}, {"comparator", sample_from(inst.comparator())}};
    bool ok = true;
    std::uint64_t seed = 10;
    for (const auto& [name, policy] : policies) {
      const auto p = safety_gap_probe(inst, policy, trials, seed++);
      ok = ok && p.within_3se;
      r.detail += name + ": R=" + detail::fmt(p.mean_regret) + " predicted=" + detail::fmt(p.predicted) +
                  " diff/se=" + detail::fmt(p.difference_se > 0 ? p.mean_difference / p.difference_se : 0.0) + "; ";
    }
    r.passed = ok;
  });
}

struct StructuralReport {
  bool single_stage_no_delay = true;
  bool alpha_monotone_no_delay = true;
  bool alpha_reaches_one = true;
  bool hard_restart_each_geometric = true;
  bool alpha_resets = true;
  bool comparator_bound = true;
  int exp3ix_worse = 0;
  int comparisons = 0;
  double max_final_alpha_no_delay = 0.0;
};

// Desk-scale structural reproduction: no-delay and geometric runs of
// Prudent-Banker against Safe-EXP3-IX.
inline CheckResult structural(int seeds = 5) {
  return detail::timed(11, "desk-scale structural reproduction", [&](CheckResult& r) {
    StructuralReport rep;
    auto c = scale_defaults(Scale::Desk);
    c.learners = {LearnerSpec{}, parse_learner("safe-exp3ix")};
    for (const DelayModel& dm : {DelayModel{NoDelay{}}, DelayModel{GeometricDelay{}}}) {
      const bool no_delay = std::holds_alternative<NoDelay>(dm);
      c.env.delay_model = dm;
      for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(seeds); ++seed) {
        const auto res = run(c, seed);
        const auto& pb = res.traces[0];
        const auto& ex = res.traces[1];
        const auto& s = pb.summary;
        if (no_delay) {
          if (s.stages != 1) rep.single_stage_no_delay = false;
          bool hit = false;
          for (std::size_t i = 0; i < pb.rows.size(); ++i) {
            if (i > 0 && pb.rows[i].alpha < pb.rows[i - 1].alpha) rep.alpha_monotone_no_delay = false;
            if (pb.rows[i].alpha == 1.0) hit = true;
            if (hit && pb.rows[i].alpha != 1.0) rep.alpha_monotone_no_delay = false;
          }
          if (!hit) rep.alpha_reaches_one = false;
          rep.max_final_alpha_no_delay = std::max(rep.max_final_alpha_no_delay, s.final_alpha);
        } else {
          if (s.hard_restarts.empty()) rep.hard_restart_each_geometric = false;
          const ThresholdFunctions tf(s.horizon, Regularizer(c.regularizer, s.arms, c.delta).constants(), c.delta);
          for (const auto& h : s.hard_restarts) {
            const auto& row = pb.rows[static_cast<std::size_t>(h.round - 1)];
            if (row.phase != 1 || row.alpha != tf.alpha(1, h.new_estimate)) rep.alpha_resets = false;
          }
        }
        const ThresholdFunctions tf(s.horizon, Regularizer(c.regularizer, s.arms, c.delta).constants(), c.delta);
        const std::int64_t d_final = s.hard_restarts.empty() ? 1 : s.hard_restarts.back().new_estimate;
        const double bound = s.stages * (tf.restart_threshold(d_final) + 2.0);
        for (const auto& row : pb.rows)
          if (!(row.comparator_gap() < bound)) rep.comparator_bound = false;
        ++rep.comparisons;
        if (ex.summary.regret_best > s.regret_best) ++rep.exp3ix_worse;
      }
    }
    const bool a = rep.single_stage_no_delay && rep.alpha_monotone_no_delay && rep.alpha_reaches_one;
    const bool b = rep.hard_restart_each_geometric && rep.alpha_resets;
    const bool cc = rep.comparator_bound && 2 * rep.exp3ix_worse > rep.comparisons;
    r.passed = a && b && cc && r.seconds < 120.0;
    r.detail = std::string("(a) ") + (a ? "pass" : "FAIL") + " [single stage " +
               (rep.single_stage_no_delay ? "yes" : "no") + ", alpha monotone " +
               (rep.alpha_monotone_no_delay ? "yes" : "no") + ", reaches 1 " + (rep.alpha_reaches_one ? "yes" : "no") +
               ", max final alpha " + detail::fmt(rep.max_final_alpha_no_delay) + "]; (b) " + (b ? "pass" : "FAIL") +
               "; (c) " + (cc ? "pass" : "FAIL") + " [exp3ix worse on " + std::to_string(rep.exp3ix_worse) + "/" +
               std::to_string(rep.comparisons) + "]";
  });
}

// Two in-process runs of one config give byte-identical CSV.
inline CheckResult determinism_in_process(std::uint64_t seed = 12) {
  return detail::timed(12, "determinism", [&](CheckResult& r) {
    auto c = scale_defaults(Scale::Desk);
    c.env.horizon = 5000;
    c.env.blocks = 50;
    c.env.delay_model = GeometricDelay{};
    auto csv = [&] {
      std::ostringstream os;
      write_trace_csv(os, run(c, seed).traces[0].rows);
      return os.str();
    };
    const auto a = csv();
    const auto b = csv();
    r.passed = a == b && !a.empty();
    r.detail = std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different");
  });
}

inline std::vector<std::function<CheckResult()>> all_checks() {
  return {[] { return credit_conservation(); }, [] { return delay_mass(); },
          [] { return doubling_bound(); },      [] { return missing_count_bound(); },
          [] { return estimator_unbiased(); },  [] { return mirror_round_trip(); },
          [] { return gap_oracle(); },          [] { return bucket_suite(); },
          [] { return batched_identity(); },    [] { return hard_instance_identity(); },
          [] { return structural(); },          [] { return determinism_in_process(); }};
}

inline std::string format(const CheckResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << "  " << r.id << ". " << r.name << " (" << detail::fmt(r.seconds) << "s): "
     << r.detail;
  return os.str();
}

}  // namespace pbandit::verify
