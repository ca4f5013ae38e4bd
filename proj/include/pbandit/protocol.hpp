#pragma once

// The delayed adversarial bandit game: loss tables, delay models, the
// feedback arrival queue and the outstanding-feedback counters.
//
// Rounds are 1-based throughout. Feedback generated at round t with delay
// d_t is delivered at the end of round t + d_t and is usable from round
// t + d_t + 1 onwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pbandit/error.hpp"
#include "pbandit/numeric.hpp"
#include "pbandit/rng.hpp"

namespace pbandit {

using Round = std::int64_t;
using Arm = std::size_t;

class LossTable {
 public:
  LossTable() = default;

  LossTable(Round horizon, std::size_t arms, std::vector<double> losses)
      : horizon_(horizon), arms_(arms), losses_(std::move(losses)) {
    if (horizon_ < 0 || arms_ == 0) throw ConfigError("LossTable: need horizon >= 0 and arms >= 1");
    if (losses_.size() != static_cast<std::size_t>(horizon_) * arms_) {
      throw ConfigError("LossTable: expected " + std::to_string(horizon_ * static_cast<Round>(arms_)) +
                        " entries, got " + std::to_string(losses_.size()));
    }
    for (std::size_t i = 0; i < losses_.size(); ++i) {
      const double v = losses_[i];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("LossTable: entry " + std::to_string(i) + " = " + format_double(v) +
                          " outside [0,1]");
      }
    }
  }

  Round horizon() const { return horizon_; }
  std::size_t arms() const { return arms_; }

  double operator()(Round t, Arm a) const { return losses_[index(t) + a]; }

  std::span<const double> row(Round t) const { return {losses_.data() + index(t), arms_}; }

  std::span<const double> data() const { return losses_; }

  // Cumulative loss of every arm over the full horizon.
  std::vector<double> column_sums() const {
    CompensatedVector sums(arms_);
    for (Round t = 1; t <= horizon_; ++t) {
      const auto r = row(t);
      for (Arm a = 0; a < arms_; ++a) sums.add(a, r[a]);
    }
    return sums.values();
  }

  friend bool operator==(const LossTable&, const LossTable&) = default;

 private:
  std::size_t index(Round t) const { return static_cast<std::size_t>(t - 1) * arms_; }

  Round horizon_ = 0;
  std::size_t arms_ = 1;
  std::vector<double> losses_;
};

class DelaySequence {
 public:
  DelaySequence() = default;

  explicit DelaySequence(std::vector<std::int64_t> delays) : delays_(std::move(delays)) {
    for (std::size_t i = 0; i < delays_.size(); ++i) {
      if (delays_[i] < 0) throw ConfigError("DelaySequence: negative delay at round " + std::to_string(i + 1));
    }
  }

  Round horizon() const { return static_cast<Round>(delays_.size()); }
  std::int64_t operator[](Round t) const { return delays_[static_cast<std::size_t>(t - 1)]; }
  std::span<const std::int64_t> values() const { return delays_; }

  // D = sum of all delays.
  std::int64_t total() const {
    std::int64_t d = 0;
    for (auto v : delays_) d += v;
    return d;
  }

  // Sum of d_r for r in [first, last].
  std::int64_t window_total(Round first, Round last) const {
    std::int64_t d = 0;
    for (Round r = std::max<Round>(first, 1); r <= std::min(last, horizon()); ++r) d += (*this)[r];
    return d;
  }

  friend bool operator==(const DelaySequence&, const DelaySequence&) = default;

 private:
  std::vector<std::int64_t> delays_;
};

struct FeedbackEvent {
  Round origin_round = 0;
  Arm arm = 0;
  double loss_value = 0.0;
  Round arrival_round = 0;

  std::int64_t delay() const { return arrival_round - origin_round; }

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

// Loss models.
struct BlockLosses {};
struct CustomLosses {
  LossTable table;
};
using LossModel = std::variant<BlockLosses, CustomLosses>;

// Delay models.
struct NoDelay {};
struct FixedOneStep {
  double p = 0.03;
};
struct GeometricDelay {
  double p_active = 0.03;
  double q = 0.4;  // success probability on {1,2,...}
};
struct LomaxDelay {
  double p_active = 0.03;
  double shape = 2.5;
  double scale = 1.0;
};
struct ExplicitDelays {
  std::vector<std::int64_t> delays;
};
using DelayModel = std::variant<NoDelay, FixedOneStep, GeometricDelay, LomaxDelay, ExplicitDelays>;

inline std::string delay_model_name(const DelayModel& m) {
  struct Visitor {
    std::string operator()(const NoDelay&) const { return "none"; }
    std::string operator()(const FixedOneStep&) const { return "fixed"; }
    std::string operator()(const GeometricDelay&) const { return "geometric"; }
    std::string operator()(const LomaxDelay&) const { return "pareto"; }
    std::string operator()(const ExplicitDelays&) const { return "explicit"; }
  };
  return std::visit(Visitor{}, m);
}

struct EnvironmentConfig {
  Round horizon = 20000;
  std::size_t arms = 10;
  LossModel loss_model = BlockLosses{};
  Round blocks = 100;
  DelayModel delay_model = NoDelay{};
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
    };
    if (horizon < 0) throw ConfigError("horizon must be >= 0");
    if (arms == 0) throw ConfigError("arms must be >= 1");
    if (std::holds_alternative<BlockLosses>(loss_model)) {
      if (blocks <= 0) throw ConfigError("blocks must be >= 1");
      if (blocks > horizon) throw ConfigError("blocks (" + std::to_string(blocks) + ") exceeds horizon (" +
                                              std::to_string(horizon) + ")");
    } else {
      const auto& t = std::get<CustomLosses>(loss_model).table;
      if (t.horizon() != horizon || t.arms() != arms) throw ConfigError("custom loss table dimensions mismatch");
    }
    if (const auto* f = std::get_if<FixedOneStep>(&delay_model)) prob(f->p, "fixed-one-step p");
    if (const auto* g = std::get_if<GeometricDelay>(&delay_model)) {
      prob(g->p_active, "geometric p_active");
      if (!(g->q > 0.0 && g->q <= 1.0)) throw ConfigError("geometric q must lie in (0,1]");
    }
    if (const auto* l = std::get_if<LomaxDelay>(&delay_model)) {
      prob(l->p_active, "lomax p_active");
      if (!(l->shape > 0.0)) throw ConfigError("lomax shape must be > 0");
      if (!(l->scale > 0.0)) throw ConfigError("lomax scale must be > 0");
    }
    if (const auto* e = std::get_if<ExplicitDelays>(&delay_model)) {
      if (static_cast<Round>(e->delays.size()) != horizon) throw ConfigError("explicit delays must have length T");
      for (auto d : e->delays)
        if (d < 0) throw ConfigError("explicit delays must be >= 0");
    }
  }
};

// Block of round t (1-based result) for horizon T split into B blocks.
inline Round block_index(Round t, Round horizon, Round blocks) {
  const Round width = horizon / blocks + 1;
  return 1 + std::min((t - 1) / width, blocks - 1);
}

// Normal(mean, sd) truncated to [0,1]: rejection with at most 100 attempts,
// then clamp.
inline double sample_truncated_normal(double mean, double sd, Rng& rng) {
  std::normal_distribution<double> normal(mean, sd);
  double v = 0.0;
  for (int attempt = 0; attempt < 100; ++attempt) {
    v = normal(rng);
    if (v >= 0.0 && v <= 1.0) return v;
  }
  return std::clamp(v, 0.0, 1.0);
}

inline LossTable generate_block_losses(const EnvironmentConfig& config, Rng& rng) {
  config.validate();
  if (const auto* custom = std::get_if<CustomLosses>(&config.loss_model)) return custom->table;

  const auto arms = config.arms;
  const auto blocks = static_cast<std::size_t>(config.blocks);
  std::vector<double> means(blocks * arms), sds(blocks * arms);
  std::uniform_real_distribution<double> mean_dist(0.0, 1.0), sd_dist(0.1, 0.2);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < arms; ++i) {
      means[b * arms + i] = mean_dist(rng);
      sds[b * arms + i] = sd_dist(rng);
    }
  }
  std::vector<double> losses(static_cast<std::size_t>(config.horizon) * arms);
  for (Round t = 1; t <= config.horizon; ++t) {
    const auto b = static_cast<std::size_t>(block_index(t, config.horizon, config.blocks) - 1);
    for (std::size_t i = 0; i < arms; ++i) {
      losses[static_cast<std::size_t>(t - 1) * arms + i] =
          sample_truncated_normal(means[b * arms + i], sds[b * arms + i], rng);
    }
  }
  return LossTable(config.horizon, arms, std::move(losses));
}

// Delays beyond this are indistinguishable from "never arrives".
inline constexpr double kMaxSampledDelay = 0x1.0p40;

inline DelaySequence sample_delays(const EnvironmentConfig& config, Rng& rng) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.horizon);
  std::vector<std::int64_t> d(n, 0);
  struct Sampler {
    std::vector<std::int64_t>& d;
    Rng& rng;
    void operator()(const NoDelay&) const {}
    void operator()(const FixedOneStep& m) const {
      std::bernoulli_distribution active(m.p);
      for (auto& v : d) v = active(rng) ? 1 : 0;
    }
    void operator()(const GeometricDelay& m) const {
      std::bernoulli_distribution active(m.p_active);
      std::geometric_distribution<std::int64_t> geo(m.q);
      for (auto& v : d) v = active(rng) ? 1 + geo(rng) : 0;
    }
    void operator()(const LomaxDelay& m) const {
      std::bernoulli_distribution active(m.p_active);
      for (auto& v : d) {
        if (!active(rng)) {
          v = 0;
          continue;
        }
        const double u = uniform01(rng);
        const double z = m.scale * (std::pow(1.0 - u, -1.0 / m.shape) - 1.0);
        v = 1 + static_cast<std::int64_t>(std::floor(std::min(z, kMaxSampledDelay)));
      }
    }
    void operator()(const ExplicitDelays& m) const { d = m.delays; }
  };
  std::visit(Sampler{d, rng}, config.delay_model);
  return DelaySequence(std::move(d));
}

// Delivers feedback at the end of its arrival round. Owned by a single run.
class FeedbackQueue {
 public:
  explicit FeedbackQueue(Round horizon) : horizon_(horizon), pending_(static_cast<std::size_t>(horizon) + 1) {}

  Round horizon() const { return horizon_; }
  Round last_step() const { return last_step_; }

  // Returns false when the event arrives after the horizon and is discarded.
  bool push(const FeedbackEvent& e) {
    if (e.arrival_round < e.origin_round) throw ProtocolError("feedback arrives before it is generated");
    if (e.arrival_round <= last_step_) {
      throw ProtocolError("feedback for round " + std::to_string(e.origin_round) + " would arrive at round " +
                          std::to_string(e.arrival_round) + ", which is already closed");
    }
    if (e.arrival_round > horizon_) return false;
    pending_[static_cast<std::size_t>(e.arrival_round)].push_back(e);
    ++in_flight_;
    return true;
  }

  // Events with arrival_round == t, in origin-round order. Rounds must be
  // stepped consecutively starting at 1.
  std::vector<FeedbackEvent> step(Round t) {
    if (t != last_step_ + 1 || t > horizon_) {
      throw ProtocolError("feedback queue stepped at round " + std::to_string(t) + " after round " +
                          std::to_string(last_step_));
    }
    last_step_ = t;
    auto out = std::move(pending_[static_cast<std::size_t>(t)]);
    pending_[static_cast<std::size_t>(t)] = {};
    std::stable_sort(out.begin(), out.end(),
                     [](const FeedbackEvent& a, const FeedbackEvent& b) { return a.origin_round < b.origin_round; });
    in_flight_ -= out.size();
    return out;
  }

  std::size_t in_flight() const { return in_flight_; }

 private:
  Round horizon_;
  Round last_step_ = 0;
  std::size_t in_flight_ = 0;
  std::vector<std::vector<FeedbackEvent>> pending_;
};

struct OutstandingCounts {
  std::int64_t outstanding = 0;  // number of rounds in [start, t-1] still missing at the start of t
  std::int64_t cumulative = 0;   // running sum of `outstanding` over [start, t]
};

// Outstanding count and its running sum restricted to the window starting at
// `phase_start`.
inline OutstandingCounts outstanding_counters(const DelaySequence& delays, Round phase_start, Round t) {
  if (t < phase_start) throw ConfigError("outstanding_counters: t precedes phase start");
  const auto len = static_cast<std::size_t>(t - phase_start + 1);
  // diff[r - phase_start] tracks where each round starts/stops being missing.
  std::vector<std::int64_t> diff(len + 1, 0);
  for (Round tau = phase_start; tau < t; ++tau) {
    const Round first = tau + 1;
    const Round last = std::min<Round>(tau + delays[tau], t);
    if (last < first) continue;
    diff[static_cast<std::size_t>(first - phase_start)] += 1;
    diff[static_cast<std::size_t>(last - phase_start + 1)] -= 1;
  }
  OutstandingCounts c;
  std::int64_t running = 0;
  for (std::size_t i = 0; i < len; ++i) {
    running += diff[i];
    c.cumulative += running;
  }
  c.outstanding = running;
  return c;
}

// Sum over r in [start, end] of min{d_r, end - r}.
inline std::int64_t truncated_delay_mass(const DelaySequence& delays, Round start, Round end) {
  std::int64_t s = 0;
  for (Round r = start; r <= end; ++r) s += std::min<std::int64_t>(delays[r], end - r);
  return s;
}

// A realized environment: oblivious loss table plus delay sequence.
struct Environment {
  std::uint64_t seed = 0;
  LossTable losses;
  DelaySequence delays;

  Round horizon() const { return losses.horizon(); }
  std::size_t arms() const { return losses.arms(); }

  friend bool operator==(const Environment&, const Environment&) = default;
};

// Losses and delays come from independent streams of the master seed.
inline Environment make_environment(const EnvironmentConfig& config) {
  config.validate();
  StreamFactory streams(config.seed);
  Rng loss_rng = streams.stream("losses");
  Rng delay_rng = streams.stream("delays");
  Environment env;
  env.seed = config.seed;
  env.losses = generate_block_losses(config, loss_rng);
  env.delays = sample_delays(config, delay_rng);
  return env;
}

// Text dump: a header, the seed, dimensions, the delay vector and one loss
// row per line. Numbers use shortest round-trip formatting, so the dump
// replays bit-exactly.
inline void write_environment(std::ostream& os, const Environment& env) {
  os << "pbandit-environment 1\n";
  os << "seed " << env.seed << "\n";
  os << "horizon " << env.horizon() << "\n";
  os << "arms " << env.arms() << "\n";
  os << "delays";
  for (auto d : env.delays.values()) os << ' ' << d;
  os << "\nlosses\n";
  for (Round t = 1; t <= env.horizon(); ++t) {
    const auto r = env.losses.row(t);
    for (std::size_t a = 0; a < r.size(); ++a) os << (a ? " " : "") << format_double(r[a]);
    os << "\n";
  }
}

inline Environment read_environment(std::istream& is) {
  auto fail = [](const std::string& what) -> Environment { throw ConfigError("environment dump: " + what); };
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "pbandit-environment" || version != 1) return fail("bad header");
  Environment env;
  Round horizon = 0;
  std::size_t arms = 0;
  if (!(is >> tag >> env.seed) || tag != "seed") return fail("missing seed");
  if (!(is >> tag >> horizon) || tag != "horizon") return fail("missing horizon");
  if (!(is >> tag >> arms) || tag != "arms") return fail("missing arms");
  if (!(is >> tag) || tag != "delays") return fail("missing delays");
  std::vector<std::int64_t> delays(static_cast<std::size_t>(horizon));
  for (auto& d : delays)
    if (!(is >> d)) return fail("truncated delays");
  if (!(is >> tag) || tag != "losses") return fail("missing losses");
  std::vector<double> losses(static_cast<std::size_t>(horizon) * arms);
  std::string tok;
  for (auto& v : losses) {
    if (!(is >> tok) || !parse_double(tok, v)) return fail("bad loss entry '" + tok + "'");
  }
  env.losses = LossTable(horizon, arms, std::move(losses));
  env.delays = DelaySequence(std::move(delays));
  return env;
}

inline void save_environment(const std::string& path, const Environment& env) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_environment(os, env);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline Environment load_environment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_environment(is);
}

}  // namespace pbandit
