#pragma once

// Prudent-Banker: a Banker-OMD learner mixed with a safe comparator,
//   x_t = alpha * xhat_t + (1 - alpha) * x^c,
// where alpha only grows after arrived feedback certifies that the
// comparator is beaten by more than a delay-calibrated threshold (soft
// restart), and the delay guess D_hat is doubled whenever the observed stage
// delay exceeds it (hard restart).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbandit/banker.hpp"
#include "pbandit/error.hpp"
#include "pbandit/learner.hpp"
#include "pbandit/mirror.hpp"
#include "pbandit/numeric.hpp"
#include "pbandit/protocol.hpp"

namespace pbandit {

class ThresholdFunctions {
 public:
  ThresholdFunctions(Round horizon, RegularityConstants constants, double delta)
      : horizon_(horizon), constants_(constants), delta_(delta) {
    if (horizon_ < 1) throw ConfigError("threshold functions need T >= 1");
    if (!(delta_ > 0.0)) throw ConfigError("threshold functions need delta > 0");
  }

  double scale() const { return std::sqrt(constants_.c1 * constants_.c2); }

  // sqrt(C1 C2) * (3 sqrt(T) + 7 sqrt(2 D ln(D + 1)))
  double rhat(std::int64_t d) const {
    if (d < 0) throw PreconditionError("rhat: negative delay");
    const double dd = static_cast<double>(d);
    return scale() * (3.0 * std::sqrt(static_cast<double>(horizon_)) + 7.0 * std::sqrt(2.0 * dd * std::log(dd + 1.0)));
  }

  // (sqrt(8 D + 1) - 1) / delta
  double xi(std::int64_t d) const {
    if (d < 0) throw PreconditionError("xi: negative delay");
    return (std::sqrt(8.0 * static_cast<double>(d) + 1.0) - 1.0) / delta_;
  }

  double restart_threshold(std::int64_t d) const { return 2.0 * rhat(d) + xi(d); }

  double alpha(int phase, std::int64_t d) const {
    return std::min(std::ldexp(1.0, phase - 1) / rhat(d), 1.0);
  }

 private:
  Round horizon_;
  RegularityConstants constants_;
  double delta_;
};

struct GapStatistic {
  double value = 0.0;
  Arm argmin = 0;
};

// max over the simplex of <g, x^c - x> = <g, x^c> - min_a g_a. Ties go to the
// lowest arm index.
inline GapStatistic gap_statistic(std::span<const double> g, const SimplexPoint& comparator) {
  GapStatistic out;
  double best = g[0];
  for (Arm a = 1; a < g.size(); ++a) {
    if (g[a] < best) {
      best = g[a];
      out.argmin = a;
    }
  }
  out.value = dot(g, comparator.values()) - best;
  return out;
}

// x^c(anchor) = 1 - (A-1) delta, every other arm delta.
inline SimplexPoint build_comparator(std::size_t arms, double delta, Arm anchor) {
  if (arms == 0) throw ConfigError("comparator needs at least one arm");
  if (!(delta > 0.0 && delta <= 1.0 / static_cast<double>(arms))) {
    throw ConfigError("comparator margin delta must lie in (0, 1/A]");
  }
  if (anchor >= arms) throw ConfigError("comparator anchor out of range");
  std::vector<double> p(arms, delta);
  p[anchor] = 1.0 - static_cast<double>(arms - 1) * delta;
  return SimplexPoint(std::move(p));
}

// Smallest power of two >= d.
inline std::int64_t next_delay_estimate(std::int64_t d) {
  if (d < 1) return 1;
  return static_cast<std::int64_t>(std::bit_ceil(static_cast<std::uint64_t>(d)));
}

struct StagePhaseState {
  int stage = 1;
  std::int64_t delay_estimate = 1;  // D_hat_s
  int phase = 1;
  Round stage_start = 1;
  Round phase_start = 1;
  double alpha = 1.0;
  std::int64_t stage_delay = 0;  // realized delays of arrived feedback from rounds >= stage_start
  CompensatedVector gap;         // sum of arrived estimators in the current phase
  SimplexPoint comparator;

  StagePhaseState(const ThresholdFunctions& tf, SimplexPoint xc)
      : alpha(tf.alpha(1, 1)), gap(xc.size()), comparator(std::move(xc)) {}
};

struct HardRestart {
  Round round = 0;
  int new_stage = 0;
  std::int64_t trigger_delay = 0;
  std::int64_t old_estimate = 0;
  std::int64_t new_estimate = 0;
  double alpha_before = 0.0;
  double alpha_after = 0.0;
};

struct SoftRestart {
  Round round = 0;
  int stage = 0;
  int new_phase = 0;
  double gap = 0.0;
  double threshold = 0.0;
  double alpha_before = 0.0;
  double alpha_after = 0.0;
};

// Doubling check on the observed stage delay, at the start of round t. On
// restart the new stage and phase begin at t + 1; round t itself is played
// from the reset base point and belongs to neither.
inline std::optional<HardRestart> check_hard_restart(StagePhaseState& s, const ThresholdFunctions& tf, Round t) {
  if (s.stage_delay <= s.delay_estimate) return std::nullopt;
  HardRestart r;
  r.round = t;
  r.trigger_delay = s.stage_delay;
  r.old_estimate = s.delay_estimate;
  r.new_estimate = next_delay_estimate(s.stage_delay);
  r.alpha_before = s.alpha;
  s.stage += 1;
  s.delay_estimate = r.new_estimate;
  s.phase = 1;
  s.stage_start = s.phase_start = t + 1;
  s.alpha = tf.alpha(1, s.delay_estimate);
  s.stage_delay = 0;
  s.gap.reset();
  r.new_stage = s.stage;
  r.alpha_after = s.alpha;
  return r;
}

// Phase transition at the end of round t when the arrived-feedback gap
// exceeds B(D_hat) while alpha < 1.
inline std::optional<SoftRestart> check_soft_restart(StagePhaseState& s, const ThresholdFunctions& tf, Round t) {
  if (s.alpha >= 1.0) return std::nullopt;
  const auto g = s.gap.values();
  const double gap = gap_statistic(g, s.comparator).value;
  const double threshold = tf.restart_threshold(s.delay_estimate);
  if (!(gap > threshold)) return std::nullopt;
  SoftRestart r;
  r.round = t;
  r.stage = s.stage;
  r.gap = gap;
  r.threshold = threshold;
  r.alpha_before = s.alpha;
  s.phase += 1;
  s.alpha = tf.alpha(s.phase, s.delay_estimate);
  s.phase_start = t + 1;
  s.gap.reset();
  r.new_phase = s.phase;
  r.alpha_after = s.alpha;
  return r;
}

// Safe mixture and arm draw.
inline Decision act(const StagePhaseState& s, const SimplexPoint& xhat, double u) {
  Decision d;
  d.distribution = SimplexPoint::mix(s.alpha, xhat, s.comparator);
  d.arm = d.distribution.sample(u);
  return d;
}

struct PrudentConfig {
  RegularizerKind kind = RegularizerKind::NegativeEntropy;
  double delta = 0.01;
  Round horizon = 1;
  SimplexPoint comparator;
};

// Runtime checks of the algorithm's structural guarantees. Needs oracle
// access to the realized delays (and losses, for the stability check).
struct PrudentAudit {
  static constexpr double kConservationTolerance = 1e-9;
  static constexpr double kCreditFloor = -1e-12;
  static constexpr double kStabilitySlack = 1e-6;
  static constexpr std::size_t kMaxViolationsKept = 50;

  const DelaySequence* delays = nullptr;
  const LossTable* losses = nullptr;
  bool check_stability = true;

  std::int64_t rounds = 0;
  double max_conservation_residual = 0.0;
  double min_credit = 0.0;
  std::int64_t borrow_checks = 0;
  double max_borrow_residual = 0.0;
  std::int64_t stability_checks = 0;
  double max_stability_excess = -1e300;  // max of lhs - rhs
  std::int64_t missing_count_checks = 0;
  std::int64_t gap_checks = 0;
  std::int64_t weight_checks = 0;
  double max_weight = 0.0;
  std::int64_t restart_checks = 0;
  std::int64_t violation_count = 0;
  std::vector<std::string> violations;

  bool ok() const { return violation_count == 0; }

  void fail(Round t, const std::string& what) {
    ++violation_count;
    if (violations.size() < kMaxViolationsKept) violations.push_back("round " + std::to_string(t) + ": " + what);
  }
};

class PrudentBanker : public Learner {
 public:
  explicit PrudentBanker(const PrudentConfig& cfg)
      : reg_(cfg.kind, cfg.comparator.size(), cfg.delta),
        tf_(cfg.horizon, reg_.constants(), cfg.delta),
        state_(tf_, cfg.comparator),
        core_(reg_, 1) {
    for (double v : cfg.comparator.values()) {
      if (v < cfg.delta) throw ConfigError("comparator must put at least delta on every arm");
    }
  }

  std::string name() const override { return "prudent-banker"; }

  void enable_audit(const DelaySequence* delays, const LossTable* losses, bool check_stability = true) {
    audit_.emplace();
    audit_->delays = delays;
    audit_->losses = losses;
    audit_->check_stability = check_stability;
  }
  const std::optional<PrudentAudit>& audit() const { return audit_; }

  Decision act(Round t, double u) override {
    if (auto r = check_hard_restart(state_, tf_, t)) {
      if (audit_) audit_restart(*r);
      hard_restarts_.push_back(*r);
      core_.reset(state_.phase_start);
      last_sigma_.reset();
      auto d = pbandit::act(state_, reg_.base_point(), u);
      last_alpha_ = state_.alpha;
      return d;
    }
    auto pred = core_.predict(t);
    auto d = pbandit::act(state_, pred.iterate.primal, u);
    core_.commit(pred, d.arm, d.distribution[d.arm]);
    last_alpha_ = state_.alpha;
    last_sigma_ = pred.sigma;
    if (audit_) audit_round(t, pred, d);
    return d;
  }

  void observe(Round t, std::span<const FeedbackEvent> arrivals) override {
    for (const auto& e : arrivals) {
      if (e.origin_round >= state_.stage_start) state_.stage_delay += e.delay();
      if (!core_.ingest(e)) continue;
      const double estimate = *core_.ledger().record(e.origin_round).loss_estimate;
      state_.gap.add(e.arm, estimate);
      if (audit_ && state_.alpha <= 0.5) {
        ++audit_->weight_checks;
        audit_->max_weight = std::max(audit_->max_weight, estimate);
        if (estimate > 2.0 / reg_.delta()) audit_->fail(t, "importance weight above 2/delta");
      }
    }
    const double threshold = tf_.restart_threshold(state_.delay_estimate);
    const double alpha_before = state_.alpha;
    if (auto r = check_soft_restart(state_, tf_, t)) {
      soft_restarts_.push_back(*r);
      core_.reset(state_.phase_start);
    } else if (audit_ && alpha_before < 1.0) {
      ++audit_->gap_checks;
      const double gap = gap_statistic(state_.gap.values(), state_.comparator).value;
      if (gap > threshold) audit_->fail(t, "gap statistic above threshold without a phase transition");
    }
  }

  double alpha() const override { return last_alpha_; }
  int stage() const override { return state_.stage; }
  int phase() const override { return state_.phase; }

  const StagePhaseState& state() const { return state_; }
  const ThresholdFunctions& thresholds() const { return tf_; }
  const Regularizer& regularizer() const { return reg_; }
  const BankerLedger& ledger() const { return core_.ledger(); }
  const std::vector<HardRestart>& hard_restarts() const { return hard_restarts_; }
  const std::vector<SoftRestart>& soft_restarts() const { return soft_restarts_; }
  std::optional<double> last_sigma() const { return last_sigma_; }

 private:
  void audit_restart(const HardRestart& r) {
    auto& a = *audit_;
    ++a.restart_checks;
    if (!(r.old_estimate <= r.new_estimate)) a.fail(r.round, "delay estimate decreased at hard restart");
    if (!(r.new_estimate < 2 * r.trigger_delay)) a.fail(r.round, "new delay estimate not below twice the trigger");
    if (!(r.new_estimate >= r.trigger_delay)) a.fail(r.round, "new delay estimate below the trigger");
  }

  void audit_round(Round t, const BankerCore::Prediction& pred, const Decision& d) {
    auto& a = *audit_;
    const auto& ledger = core_.ledger();
    ++a.rounds;

    const double residual = pred.allocation.conservation_residual();
    a.max_conservation_residual = std::max(a.max_conservation_residual, residual);
    if (residual > PrudentAudit::kConservationTolerance) a.fail(t, "credit conservation residual");
    for (const auto& share : pred.allocation.shares) {
      const double v = ledger.record(share.donor).credit;
      a.min_credit = std::min(a.min_credit, v);
      if (v < PrudentAudit::kCreditFloor) a.fail(t, "negative credit");
    }

    // Whenever something is borrowed every arrived credit is spent, so the
    // cumulative borrow equals sigma_t plus the sigmas of missing rounds.
    if (pred.allocation.borrow > 0.0) {
      ++a.borrow_checks;
      CompensatedSum expected;
      expected += pred.sigma;
      for (Round u : ledger.missing_rounds()) {
        if (u < t) expected += ledger.record(u).sigma;
      }
      const double b = ledger.cumulative_borrow();
      const double rel = std::abs(b - expected.value()) / std::max(1.0, b);
      a.max_borrow_residual = std::max(a.max_borrow_residual, rel);
      if (rel > PrudentAudit::kConservationTolerance) a.fail(t, "borrow characterization");
    }

    if (a.delays) {
      // m(m+1)/2 <= sum of realized delays of the m missing rounds.
      ++a.missing_count_checks;
      std::int64_t m = 0, mass = 0;
      for (Round u : ledger.missing_rounds()) {
        if (u >= t) continue;
        ++m;
        mass += (*a.delays)[u];
      }
      if (m * (m + 1) / 2 > mass) a.fail(t, "missing-feedback count bound");
      if (mass > a.delays->window_total(ledger.phase_start(), a.delays->horizon())) {
        a.fail(t, "missing delay mass above phase delay");
      }
    }

    if (a.losses && a.check_stability) {
      if (auto lhs = expected_stability_term(reg_, d.distribution, a.losses->row(t), pred.sigma)) {
        ++a.stability_checks;
        const double rhs = reg_.constants().c2 / pred.sigma;
        a.max_stability_excess = std::max(a.max_stability_excess, *lhs - rhs);
        if (*lhs > rhs + PrudentAudit::kStabilitySlack) a.fail(t, "local-norm stability");
      }
    }
  }

  Regularizer reg_;
  ThresholdFunctions tf_;
  StagePhaseState state_;
  BankerCore core_;
  double last_alpha_ = 0.0;
  std::optional<double> last_sigma_;
  std::vector<HardRestart> hard_restarts_;
  std::vector<SoftRestart> soft_restarts_;
  std::optional<PrudentAudit> audit_;
};

}  // namespace pbandit
