#pragma once

// Banker-OMD: mirror descent under delayed bandit feedback with step-size
// credit accounting. Every round t requests a total step size sigma_t; it is
// financed greedily by the unspent credits of rounds whose feedback has
// arrived, and whatever is left is borrowed from the base point x0.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbandit/error.hpp"
#include "pbandit/mirror.hpp"
#include "pbandit/numeric.hpp"
#include "pbandit/protocol.hpp"

namespace pbandit {

// sqrt(C2/C1) * (1/sqrt(t - start + 1) + outstanding * sqrt(ln(cumulative + 1) / cumulative))^-1
// The delay term is zero when nothing is outstanding.
inline double step_size(const RegularityConstants& c, Round t, Round phase_start, std::int64_t outstanding,
                        std::int64_t cumulative) {
  if (t < phase_start) throw PreconditionError("step_size: t precedes phase start");
  if (outstanding < 0 || cumulative < outstanding) {
    throw PreconditionError("step_size: need cumulative >= outstanding >= 0");
  }
  const double local_t = static_cast<double>(t - phase_start + 1);
  double inv = 1.0 / std::sqrt(local_t);
  if (outstanding > 0) {
    const double dc = static_cast<double>(cumulative);
    inv += static_cast<double>(outstanding) * std::sqrt(std::log(dc + 1.0) / dc);
  }
  return std::sqrt(c.c2 / c.c1) / inv;
}

inline double step_size(const Regularizer& reg, Round t, Round phase_start, std::int64_t outstanding,
                        std::int64_t cumulative) {
  return step_size(reg.constants(), t, phase_start, outstanding, cumulative);
}

enum class RoundStatus { PendingAction, Missing, Arrived };

inline std::string_view to_string(RoundStatus s) {
  switch (s) {
    case RoundStatus::PendingAction:
      return "pending";
    case RoundStatus::Missing:
      return "missing";
    case RoundStatus::Arrived:
      return "arrived";
  }
  return "?";
}

struct RoundRecord {
  Round round = 0;
  RoundStatus status = RoundStatus::PendingAction;
  double sigma = 0.0;        // step size requested at this round
  double credit = 0.0;       // unspent credit v_u, 0 <= credit <= sigma
  Arm arm = 0;               // sampled arm A_u
  double played_prob = 0.0;  // x_u(A_u) of the played distribution
  std::vector<double> base_dual;  // grad Psi of the Banker iterate, until arrival
  std::vector<double> z_dual;     // grad Psi(z_u), present iff arrived
  std::optional<double> loss_estimate;  // value of the estimator at `arm`, present iff arrived

  bool arrived() const { return status == RoundStatus::Arrived; }

  // Dense importance-weighted estimator, present iff arrived.
  std::optional<std::vector<double>> estimator(std::size_t arms) const {
    if (!loss_estimate) return std::nullopt;
    std::vector<double> v(arms, 0.0);
    v[arm] = *loss_estimate;
    return v;
  }

  std::optional<SimplexPoint> z(const Regularizer& reg) const {
    if (!arrived()) return std::nullopt;
    return grad_psi_star_constrained(reg, z_dual);
  }
};

struct CreditShare {
  Round donor = 0;
  double amount = 0.0;
};

struct CreditAllocation {
  double sigma = 0.0;
  std::vector<CreditShare> shares;
  double borrow = 0.0;

  double spent() const {
    CompensatedSum s;
    for (const auto& c : shares) s += c.amount;
    return s.value();
  }
  // |sum shares + borrow - sigma|; zero up to rounding.
  double conservation_residual() const {
    CompensatedSum s;
    for (const auto& c : shares) s += c.amount;
    s += borrow;
    s += -sigma;
    return std::abs(s.value());
  }
};

// Per-phase record table plus cumulative borrow. Single owner.
class BankerLedger {
 public:
  explicit BankerLedger(Round phase_start = 1) : phase_start_(phase_start) {}

  void reset(Round phase_start) { *this = BankerLedger(phase_start); }

  Round phase_start() const { return phase_start_; }
  const std::vector<RoundRecord>& records() const { return records_; }
  bool contains(Round u) const { return u >= phase_start_ && u < phase_start_ + static_cast<Round>(records_.size()); }
  const RoundRecord& record(Round u) const { return records_.at(static_cast<std::size_t>(u - phase_start_)); }

  double cumulative_borrow() const { return borrow_.value(); }
  std::size_t missing_count() const { return missing_.size(); }
  const std::set<Round>& missing_rounds() const { return missing_; }

  // Running sum of outstanding counts since the phase start.
  std::int64_t cumulative_outstanding() const { return cumulative_outstanding_; }

  // Outstanding count at the start of round t, accumulated into the running
  // sum. Call exactly once per round, before allocate_credits.
  OutstandingCounts open_round(Round t) {
    if (t != next_round()) {
      throw ProtocolError("ledger: round " + std::to_string(t) + " opened, expected " + std::to_string(next_round()));
    }
    const auto outstanding = static_cast<std::int64_t>(missing_.size());
    cumulative_outstanding_ += outstanding;
    opened_ = t;
    return {outstanding, cumulative_outstanding_};
  }

  // Greedy drain of arrived credits in increasing round order; the remainder
  // is borrowed.
  CreditAllocation allocate_credits(Round t, double sigma) {
    if (!(sigma > 0.0)) throw PreconditionError("allocate_credits: sigma must be positive");
    if (t != opened_) throw ProtocolError("allocate_credits: round not opened");
    CreditAllocation alloc;
    alloc.sigma = sigma;
    double b = sigma;
    for (auto it = donors_.begin(); it != donors_.end() && b > 0.0;) {
      auto& rec = mutable_record(*it);
      const double share = std::min(rec.credit, b);
      rec.credit -= share;
      b -= share;
      alloc.shares.push_back({rec.round, share});
      if (rec.credit <= 0.0) {
        rec.credit = 0.0;
        it = donors_.erase(it);
      } else {
        ++it;
      }
    }
    alloc.borrow = b;
    borrow_ += b;
    return alloc;
  }

  // Registers the action taken at round t; its feedback is now missing.
  void record_action(Round t, double sigma, std::vector<double> base_dual, Arm arm, double played_prob) {
    if (t != opened_ || contains(t)) throw ProtocolError("record_action: round not opened or already recorded");
    RoundRecord rec;
    rec.round = t;
    rec.status = RoundStatus::Missing;
    rec.sigma = sigma;
    rec.credit = sigma;
    rec.arm = arm;
    rec.played_prob = played_prob;
    rec.base_dual = std::move(base_dual);
    records_.push_back(std::move(rec));
    missing_.insert(t);
  }

  // Builds the estimator and the mirror step for an arrived event. Events
  // from before the phase start are dropped (returns false).
  bool ingest_feedback(const Regularizer& reg, const FeedbackEvent& e) {
    if (e.origin_round < phase_start_) return false;
    if (!contains(e.origin_round)) throw ProtocolError("ingest: no record for round " + std::to_string(e.origin_round));
    auto& rec = mutable_record(e.origin_round);
    if (rec.status != RoundStatus::Missing) {
      throw ProtocolError("ingest: feedback for round " + std::to_string(e.origin_round) + " delivered twice");
    }
    if (e.arm != rec.arm) throw ProtocolError("ingest: arm mismatch for round " + std::to_string(e.origin_round));
    if (!(rec.played_prob > 0.0)) {
      throw ProtocolError("ingest: played probability of the chosen arm is zero at round " +
                          std::to_string(e.origin_round));
    }
    const double estimate = e.loss_value / rec.played_prob;
    std::vector<double> theta = std::move(rec.base_dual);
    theta[rec.arm] -= estimate / rec.sigma;
    auto z = conjugate_point(reg, theta);
    rec.z_dual = std::move(z.dual);
    rec.base_dual.clear();
    rec.base_dual.shrink_to_fit();
    rec.loss_estimate = estimate;
    rec.status = RoundStatus::Arrived;
    missing_.erase(rec.round);
    if (rec.credit > 0.0) donors_.insert(rec.round);
    return true;
  }

  // Sum of sigma_u over rounds whose feedback is still missing.
  double missing_sigma() const {
    CompensatedSum s;
    for (Round u : missing_) s += record(u).sigma;
    return s.value();
  }

  // Columnar dump: one line per record.
  void dump(std::ostream& os, const Regularizer& reg) const {
    os << "round status sigma credit arm played_prob loss_estimate z\n";
    for (const auto& r : records_) {
      os << r.round << ' ' << to_string(r.status) << ' ' << format_double(r.sigma) << ' ' << format_double(r.credit)
         << ' ' << r.arm << ' ' << format_double(r.played_prob) << ' '
         << (r.loss_estimate ? format_double(*r.loss_estimate) : std::string("-")) << ' ';
      if (auto z = r.z(reg)) {
        for (std::size_t i = 0; i < z->size(); ++i) os << (i ? ";" : "") << format_double((*z)[i]);
      } else {
        os << '-';
      }
      os << '\n';
    }
  }

 private:
  Round next_round() const { return phase_start_ + static_cast<Round>(records_.size()); }
  RoundRecord& mutable_record(Round u) { return records_.at(static_cast<std::size_t>(u - phase_start_)); }

  Round phase_start_;
  Round opened_ = 0;
  std::vector<RoundRecord> records_;
  std::set<Round> donors_;   // arrived rounds with credit left
  std::set<Round> missing_;  // rounds awaiting feedback
  CompensatedSum borrow_;
  std::int64_t cumulative_outstanding_ = 0;
};

// Dual-space combination of the donors' grad Psi(z_u) and grad Psi(x0),
// weighted by their shares of sigma_t, mapped back to the simplex.
inline MirrorPoint predict(const BankerLedger& ledger, const Regularizer& reg, const CreditAllocation& alloc) {
  const std::size_t n = reg.arms();
  const auto base = grad_psi(reg, reg.base_point());
  std::vector<double> theta(n, 0.0);
  const double w0 = alloc.borrow / alloc.sigma;
  for (std::size_t i = 0; i < n; ++i) theta[i] = w0 * base[i];
  for (const auto& share : alloc.shares) {
    const auto& rec = ledger.record(share.donor);
    if (!rec.arrived()) throw ProtocolError("predict: donor without feedback");
    const double w = share.amount / alloc.sigma;
    for (std::size_t i = 0; i < n; ++i) theta[i] += w * rec.z_dual[i];
  }
  return conjugate_point(reg, theta);
}

// D(x, z) with z given by its closed-form dual representative; finite even
// when coordinates of z underflow.
inline double bregman_to(const Regularizer& reg, const SimplexPoint& x, const MirrorPoint& z) {
  double d = 0.0;
  if (reg.kind() == RegularizerKind::NegativeEntropy) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0) d += x[i] * (std::log(x[i]) - (z.dual[i] - 1.0));
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gap = -z.dual[i];
      const double diff = std::sqrt(x[i]) - 1.0 / gap;
      d += diff * diff * gap;
    }
  }
  return std::max(d, 0.0);
}

// Expected local-norm term E_{A ~ x}[sigma * D(x, z~)] where z~ is the mirror
// step from x with the importance-weighted estimate of `losses`, evaluated
// exactly by enumerating arms. Returns nullopt when x is not interior.
inline std::optional<double> expected_stability_term(const Regularizer& reg, const SimplexPoint& x,
                                                     std::span<const double> losses, double sigma) {
  for (double v : x.values())
    if (!(v >= Regularizer::kInteriorFloor)) return std::nullopt;
  const auto g = grad_psi(reg, x);
  double total = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    if (losses[a] == 0.0) continue;
    std::vector<double> theta = g;
    theta[a] -= losses[a] / (x[a] * sigma);
    total += x[a] * sigma * bregman_to(reg, x, conjugate_point(reg, theta));
  }
  return total;
}

// Plain Banker-OMD bookkeeping for one phase: counters, step size, credit
// allocation and prediction. Used by both the safe wrapper and the
// unconstrained runner.
class BankerCore {
 public:
  struct Prediction {
    Round round = 0;
    OutstandingCounts counts;
    double sigma = 0.0;
    CreditAllocation allocation;
    MirrorPoint iterate;
  };

  explicit BankerCore(Regularizer reg, Round phase_start = 1) : reg_(std::move(reg)), ledger_(phase_start) {}

  const Regularizer& regularizer() const { return reg_; }
  const BankerLedger& ledger() const { return ledger_; }

  void reset(Round phase_start) { ledger_.reset(phase_start); }

  Prediction predict(Round t) {
    Prediction p;
    p.round = t;
    p.counts = ledger_.open_round(t);
    p.sigma = step_size(reg_, t, ledger_.phase_start(), p.counts.outstanding, p.counts.cumulative);
    p.allocation = ledger_.allocate_credits(t, p.sigma);
    p.iterate = pbandit::predict(ledger_, reg_, p.allocation);
    return p;
  }

  void commit(const Prediction& p, Arm arm, double played_prob) {
    ledger_.record_action(p.round, p.sigma, p.iterate.dual, arm, played_prob);
  }

  bool ingest(const FeedbackEvent& e) { return ledger_.ingest_feedback(reg_, e); }

 private:
  Regularizer reg_;
  BankerLedger ledger_;
};

}  // namespace pbandit
