#pragma once

// Comparison learners: Conservative-UCB and Safe-EXP3-IX with delayed
// observations, the unconstrained Banker-OMD runner, and fixed policies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbandit/banker.hpp"
#include "pbandit/error.hpp"
#include "pbandit/learner.hpp"
#include "pbandit/mirror.hpp"
#include "pbandit/numeric.hpp"
#include "pbandit/protocol.hpp"

namespace pbandit {

struct SafetyParams {
  Arm default_arm = 0;
  double default_reward = 0.0;  // r0, known value of the default arm
  double alpha_safe = 0.1;

  void validate(std::size_t arms) const {
    if (default_arm >= arms) throw ConfigError("default arm out of range");
    if (!(default_reward >= 0.0 && default_reward <= 1.0)) throw ConfigError("default reward must lie in [0,1]");
    if (!(alpha_safe >= 0.0 && alpha_safe <= 1.0)) throw ConfigError("alpha_safe must lie in [0,1]");
  }
};

inline double default_delta_ucb(Round horizon) { return 1.0 / static_cast<double>(std::max<Round>(horizon, 2)); }

struct ConfidenceBounds {
  double lcb = 0.0;
  double ucb = 1.0;
};

class ConservativeUcb : public Learner {
 public:
  ConservativeUcb(std::size_t arms, SafetyParams safety, double delta_ucb)
      : arms_(arms), safety_(safety), delta_ucb_(delta_ucb), observed_(arms, 0), reward_sums_(arms, 0.0),
        played_(arms, 0) {
    safety_.validate(arms_);
    if (!(delta_ucb_ > 0.0 && delta_ucb_ < 1.0)) throw ConfigError("delta_ucb must lie in (0,1)");
  }

  std::string name() const override { return "conservative-ucb"; }

  // t is 0-based here.
  std::vector<ConfidenceBounds> bounds(std::int64_t t) const {
    std::vector<ConfidenceBounds> out(arms_);
    const double a = static_cast<double>(arms_);
    const double tp1 = static_cast<double>(t + 1);
    const double log_term = std::log(std::max(3.0, 2.0 * a * tp1 * tp1 / delta_ucb_));
    for (Arm i = 0; i < arms_; ++i) {
      if (i == safety_.default_arm) {
        out[i] = {safety_.default_reward, safety_.default_reward};
      } else if (observed_[i] > 0) {
        const double n = static_cast<double>(observed_[i]);
        const double mean = reward_sums_[i] / n;
        const double c = std::sqrt(2.0 * log_term / n);
        out[i] = {std::max(0.0, mean - c), std::min(1.0, mean + c)};
      }
    }
    return out;
  }

  // Optimistic candidate if the pessimistic budget allows it, else the
  // default arm. t is 0-based.
  Arm choose(std::int64_t t) const {
    const auto b = bounds(t);
    Arm candidate = 0;
    for (Arm i = 1; i < arms_; ++i)
      if (b[i].ucb > b[candidate].ucb) candidate = i;
    return budget_allows(b, candidate, t) ? candidate : safety_.default_arm;
  }

  bool budget_allows(const std::vector<ConfidenceBounds>& b, Arm candidate, std::int64_t t) const {
    double budget = b[candidate].lcb;
    for (Arm i = 0; i < arms_; ++i) budget += static_cast<double>(played_[i]) * b[i].lcb;
    return budget >= (1.0 - safety_.alpha_safe) * static_cast<double>(t + 1) * safety_.default_reward;
  }

  Decision act(Round t, double) override {
    const Arm arm = choose(t - 1);
    ++played_[arm];
    return {SimplexPoint::vertex(arms_, arm), arm};
  }

  void observe(Round, std::span<const FeedbackEvent> arrivals) override {
    for (const auto& e : arrivals) {
      if (e.arm == safety_.default_arm) continue;
      ++observed_[e.arm];
      reward_sums_[e.arm] += 1.0 - e.loss_value;
    }
  }

  const std::vector<std::int64_t>& observed_counts() const { return observed_; }
  const std::vector<std::int64_t>& play_counts() const { return played_; }

 private:
  std::size_t arms_;
  SafetyParams safety_;
  double delta_ucb_;
  std::vector<std::int64_t> observed_;
  std::vector<double> reward_sums_;
  std::vector<std::int64_t> played_;
};

inline double exp3ix_learning_rate(std::size_t arms, Round horizon) {
  const double a = static_cast<double>(arms);
  return std::min(0.5, std::sqrt(std::log(a) / (a * static_cast<double>(horizon))));
}

// EXP3-IX behind a budget test. Default-arm plays are credited r0 at once,
// other arms' rewards only on arrival.
class SafeExp3Ix : public Learner {
 public:
  SafeExp3Ix(std::size_t arms, Round horizon, SafetyParams safety)
      : arms_(arms), safety_(safety), eta_(exp3ix_learning_rate(arms, horizon)), gamma_(eta_ / 2.0),
        log_weights_(arms, 0.0), rounds_(static_cast<std::size_t>(horizon) + 1) {
    if (arms_ < 2) throw ConfigError("safe-exp3ix needs at least 2 arms");
    if (horizon < 1) throw ConfigError("safe-exp3ix needs T >= 1");
    safety_.validate(arms_);
  }

  std::string name() const override { return "safe-exp3ix"; }

  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  double budget() const { return budget_.value(); }
  std::span<const double> log_weights() const { return log_weights_; }

  SimplexPoint base_distribution() const {
    const double mx = *std::max_element(log_weights_.begin(), log_weights_.end());
    std::vector<double> p(arms_);
    double s = 0.0;
    for (Arm i = 0; i < arms_; ++i) s += p[i] = std::exp(log_weights_[i] - mx);
    for (auto& v : p) v /= s;
    return SimplexPoint(std::move(p));
  }

  // t is 0-based.
  bool base_may_act(std::int64_t t) const {
    return budget_.value() >= (1.0 - safety_.alpha_safe) * safety_.default_reward * static_cast<double>(t + 1);
  }

  Decision act(Round t, double u) override {
    Decision d;
    auto& rec = rounds_.at(static_cast<std::size_t>(t));
    if (base_may_act(t - 1)) {
      d.distribution = base_distribution();
      d.arm = d.distribution.sample(u);
      rec.base = true;
      rec.prob = d.distribution[d.arm];
    } else {
      d.distribution = SimplexPoint::vertex(arms_, safety_.default_arm);
      d.arm = safety_.default_arm;
    }
    if (d.arm == safety_.default_arm) budget_ += safety_.default_reward;
    return d;
  }

  void observe(Round, std::span<const FeedbackEvent> arrivals) override {
    for (const auto& e : arrivals) {
      if (e.arm != safety_.default_arm) budget_ += 1.0 - e.loss_value;
      const auto& rec = rounds_.at(static_cast<std::size_t>(e.origin_round));
      if (rec.base) log_weights_[e.arm] -= eta_ * e.loss_value / (rec.prob + gamma_);
    }
  }

 private:
  struct RoundInfo {
    bool base = false;
    double prob = 0.0;
  };

  std::size_t arms_;
  SafetyParams safety_;
  double eta_;
  double gamma_;
  std::vector<double> log_weights_;
  CompensatedSum budget_;
  std::vector<RoundInfo> rounds_;
};

// Banker-OMD alone (alpha = 1, single phase).
class BankerOmdLearner : public Learner {
 public:
  explicit BankerOmdLearner(Regularizer reg) : core_(std::move(reg), 1) {}

  std::string name() const override { return "banker-omd"; }

  Decision act(Round t, double u) override {
    auto pred = core_.predict(t);
    Decision d;
    d.distribution = pred.iterate.primal;
    d.arm = d.distribution.sample(u);
    core_.commit(pred, d.arm, d.distribution[d.arm]);
    return d;
  }

  void observe(Round, std::span<const FeedbackEvent> arrivals) override {
    for (const auto& e : arrivals) core_.ingest(e);
  }

  const BankerLedger& ledger() const { return core_.ledger(); }

 private:
  BankerCore core_;
};

class PlayDistribution : public Learner {
 public:
  PlayDistribution(std::string name, SimplexPoint p) : name_(std::move(name)), p_(std::move(p)) {}

  std::string name() const override { return name_; }
  Decision act(Round, double u) override { return {p_, p_.sample(u)}; }
  void observe(Round, std::span<const FeedbackEvent>) override {}

 private:
  std::string name_;
  SimplexPoint p_;
};

inline PlayDistribution play_comparator(SimplexPoint xc) { return {"play-comparator", std::move(xc)}; }

inline PlayDistribution play_fixed_arm(std::size_t arms, Arm arm) {
  if (arm >= arms) throw ConfigError("fixed arm out of range");
  return {"play-fixed-arm(" + std::to_string(arm) + ")", SimplexPoint::vertex(arms, arm)};
}

}  // namespace pbandit
