#pragma once

// Run configuration, the round loop, metrics and file emission.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbandit/baselines.hpp"
#include "pbandit/error.hpp"
#include "pbandit/learner.hpp"
#include "pbandit/mirror.hpp"
#include "pbandit/numeric.hpp"
#include "pbandit/protocol.hpp"
#include "pbandit/prudent.hpp"
#include "pbandit/rng.hpp"

namespace pbandit {

enum class LearnerKind { PrudentBanker, BankerOmd, ConservativeUcb, SafeExp3Ix, PlayComparator, PlayFixedArm };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::PrudentBanker;
  std::optional<Arm> fixed_arm;  // PlayFixedArm only; empty means the best arm in hindsight

  std::string to_string() const {
    switch (kind) {
      case LearnerKind::PrudentBanker:
        return "prudent-banker";
      case LearnerKind::BankerOmd:
        return "banker-omd";
      case LearnerKind::ConservativeUcb:
        return "conservative-ucb";
      case LearnerKind::SafeExp3Ix:
        return "safe-exp3ix";
      case LearnerKind::PlayComparator:
        return "play-comparator";
      case LearnerKind::PlayFixedArm:
        return "play-fixed-arm(" + (fixed_arm ? std::to_string(*fixed_arm) : std::string("star")) + ")";
    }
    return "?";
  }

  // File-name friendly form.
  std::string tag() const {
    std::string s = to_string();
    std::string out;
    for (char c : s) {
      if (c == '(') out += '-';
      else if (c != ')') out += c;
    }
    return out;
  }

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

inline LearnerSpec parse_learner(std::string_view s) {
  if (s == "prudent-banker") return {LearnerKind::PrudentBanker, {}};
  if (s == "banker-omd") return {LearnerKind::BankerOmd, {}};
  if (s == "conservative-ucb") return {LearnerKind::ConservativeUcb, {}};
  if (s == "safe-exp3ix") return {LearnerKind::SafeExp3Ix, {}};
  if (s == "play-comparator") return {LearnerKind::PlayComparator, {}};
  const std::string_view prefix = "play-fixed-arm(";
  if (s.starts_with(prefix) && s.ends_with(")")) {
    const auto inner = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    if (inner == "star") return {LearnerKind::PlayFixedArm, {}};
    std::int64_t a = 0;
    if (parse_int(inner, a) && a >= 0) return {LearnerKind::PlayFixedArm, static_cast<Arm>(a)};
  }
  throw ConfigError("unknown learner '" + std::string(s) + "'");
}

inline DelayModel parse_delay_model(std::string_view s) {
  if (s == "none") return NoDelay{};
  if (s == "fixed") return FixedOneStep{};
  if (s == "geometric") return GeometricDelay{};
  if (s == "pareto" || s == "lomax") return LomaxDelay{};
  throw ConfigError("unknown delay model '" + std::string(s) + "'");
}

enum class Scale { Desk, Paper };

inline Scale parse_scale(std::string_view s) {
  if (s == "desk") return Scale::Desk;
  if (s == "paper") return Scale::Paper;
  throw ConfigError("unknown scale '" + std::string(s) + "'");
}

struct RunConfig {
  EnvironmentConfig env;
  std::vector<LearnerSpec> learners{LearnerSpec{}};
  RegularizerKind regularizer = RegularizerKind::NegativeEntropy;
  double delta = 0.01;
  double alpha_safe = 0.1;
  std::optional<double> delta_ucb;  // default 1/max{T,2}
  std::vector<std::uint64_t> seeds{1};
  std::string output = "out";
  bool audit = false;

  void validate() const {
    env.validate();
    if (env.horizon < 1) throw ConfigError("horizon must be >= 1 for a run");
    if (env.arms < 2) throw ConfigError("a run needs at least 2 arms");
    if (!(delta > 0.0 && delta <= 1.0 / static_cast<double>(env.arms))) {
      throw ConfigError("delta must lie in (0, 1/A]");
    }
    if (!(alpha_safe >= 0.0 && alpha_safe <= 1.0)) throw ConfigError("alpha_safe must lie in [0,1]");
    if (delta_ucb && !(*delta_ucb > 0.0 && *delta_ucb < 1.0)) throw ConfigError("delta_ucb must lie in (0,1)");
    if (learners.empty()) throw ConfigError("no learner given");
    if (seeds.empty()) throw ConfigError("no seed given");
    for (const auto& l : learners) {
      if (l.fixed_arm && *l.fixed_arm >= env.arms) throw ConfigError("fixed arm out of range");
    }
  }
};

inline RunConfig scale_defaults(Scale s) {
  RunConfig c;
  if (s == Scale::Desk) {
    c.env.horizon = 20000;
    c.env.arms = 10;
    c.env.blocks = 100;
    c.delta = 0.01;
  } else {
    c.env.horizon = 50000;
    c.env.arms = 100;
    c.env.blocks = 500;
    c.delta = 0.001;
  }
  return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

inline double need_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  if (!parse_double(v, x)) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline std::int64_t need_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  if (!parse_int(v, x)) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

}  // namespace detail

// Sets one RunConfig field from a key=value pair.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::need_double;
  using detail::need_int;
  if (key == "horizon") {
    c.env.horizon = need_int(key, value);
  } else if (key == "arms") {
    const auto a = need_int(key, value);
    if (a < 1) throw ConfigError("config: arms must be >= 1");
    c.env.arms = static_cast<std::size_t>(a);
  } else if (key == "blocks") {
    c.env.blocks = need_int(key, value);
  } else if (key == "delay") {
    c.env.delay_model = parse_delay_model(value);
  } else if (key == "delay_p") {
    const double p = need_double(key, value);
    std::visit(
        [p](auto& m) {
          if constexpr (requires { m.p; }) m.p = p;
          if constexpr (requires { m.p_active; }) m.p_active = p;
        },
        c.env.delay_model);
  } else if (key == "geometric_q") {
    if (auto* g = std::get_if<GeometricDelay>(&c.env.delay_model)) g->q = need_double(key, value);
    else throw ConfigError("config: geometric_q needs delay=geometric first");
  } else if (key == "pareto_shape" || key == "pareto_scale") {
    auto* l = std::get_if<LomaxDelay>(&c.env.delay_model);
    if (!l) throw ConfigError("config: " + key + " needs delay=pareto first");
    (key == "pareto_shape" ? l->shape : l->scale) = need_double(key, value);
  } else if (key == "delta") {
    c.delta = need_double(key, value);
  } else if (key == "regularizer") {
    c.regularizer = parse_regularizer(value);
  } else if (key == "alpha_safe") {
    c.alpha_safe = need_double(key, value);
  } else if (key == "delta_ucb") {
    c.delta_ucb = need_double(key, value);
  } else if (key == "learners" || key == "learner") {
    c.learners.clear();
    for (const auto& s : detail::split_list(value)) c.learners.push_back(parse_learner(s));
  } else if (key == "seeds" || key == "seed") {
    c.seeds.clear();
    for (const auto& s : detail::split_list(value)) {
      const auto x = need_int(key, s);
      if (x < 0) throw ConfigError("config: seeds must be >= 0");
      c.seeds.push_back(static_cast<std::uint64_t>(x));
    }
  } else if (key == "out" || key == "output") {
    c.output = value;
  } else if (key == "audit") {
    if (value != "true" && value != "false") throw ConfigError("config: audit expects true or false");
    c.audit = value == "true";
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

// Flat key=value lines; '#' starts a comment. A "scale" key, if present,
// must come first since it resets every other field.
inline void read_config(std::istream& is, RunConfig& c) {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key=value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key == "scale") {
      c = scale_defaults(parse_scale(value));
      continue;
    }
    apply_setting(c, key, value);
  }
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  read_config(is, base);
  return base;
}

// <p, l>.
inline double pseudo_loss(const SimplexPoint& p, std::span<const double> losses) {
  if (p.size() != losses.size()) throw DomainError("pseudo_loss: dimension mismatch");
  return dot(p.values(), losses);
}

struct BestArm {
  Arm arm = 0;
  std::vector<double> cumulative;  // L*(t), t = 1..T
};

// Hindsight-optimal arm (ties to the lowest index) and its loss curve.
inline BestArm best_fixed_arm(const LossTable& table) {
  BestArm b;
  const auto sums = table.column_sums();
  for (Arm a = 1; a < sums.size(); ++a)
    if (sums[a] < sums[b.arm]) b.arm = a;
  b.cumulative.resize(static_cast<std::size_t>(table.horizon()));
  double s = 0.0;
  for (Round t = 1; t <= table.horizon(); ++t) b.cumulative[static_cast<std::size_t>(t - 1)] = s += table(t, b.arm);
  return b;
}

// Everything learners of one comparison share.
struct RunContext {
  Environment env;
  DelayModel delay_model;
  BestArm best;
  double default_reward = 0.0;  // r0 = mean reward of the best arm
  SimplexPoint comparator;
  std::vector<double> comparator_cumulative;
};

inline RunContext make_context(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  RunContext ctx;
  auto env_config = config.env;
  env_config.seed = seed;
  ctx.env = make_environment(env_config);
  ctx.delay_model = config.env.delay_model;
  ctx.best = best_fixed_arm(ctx.env.losses);
  const Round T = ctx.env.horizon();
  ctx.default_reward = 1.0 - ctx.best.cumulative.back() / static_cast<double>(T);
  ctx.comparator = build_comparator(ctx.env.arms(), config.delta, ctx.best.arm);
  ctx.comparator_cumulative.resize(static_cast<std::size_t>(T));
  double s = 0.0;
  for (Round t = 1; t <= T; ++t) {
    ctx.comparator_cumulative[static_cast<std::size_t>(t - 1)] = s += pseudo_loss(ctx.comparator, ctx.env.losses.row(t));
  }
  return ctx;
}

inline std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, const RunConfig& config, const RunContext& ctx) {
  const auto A = ctx.env.arms();
  const auto T = ctx.env.horizon();
  const SafetyParams safety{ctx.best.arm, ctx.default_reward, config.alpha_safe};
  switch (spec.kind) {
    case LearnerKind::PrudentBanker: {
      PrudentConfig pc;
      pc.kind = config.regularizer;
      pc.delta = config.delta;
      pc.horizon = T;
      pc.comparator = ctx.comparator;
      auto p = std::make_unique<PrudentBanker>(pc);
      if (config.audit) p->enable_audit(&ctx.env.delays, &ctx.env.losses);
      return p;
    }
    case LearnerKind::BankerOmd:
      return std::make_unique<BankerOmdLearner>(Regularizer(config.regularizer, A, config.delta));
    case LearnerKind::ConservativeUcb:
      return std::make_unique<ConservativeUcb>(A, safety, config.delta_ucb.value_or(default_delta_ucb(T)));
    case LearnerKind::SafeExp3Ix:
      return std::make_unique<SafeExp3Ix>(A, T, safety);
    case LearnerKind::PlayComparator:
      return std::make_unique<PlayDistribution>(play_comparator(ctx.comparator));
    case LearnerKind::PlayFixedArm:
      return std::make_unique<PlayDistribution>(play_fixed_arm(A, spec.fixed_arm.value_or(ctx.best.arm)));
  }
  throw ConfigError("unknown learner kind");
}

struct TraceRow {
  Round t = 0;
  int stage = 1;
  int phase = 1;
  double alpha = 1.0;
  double loss_b = 0.0;     // cumulative pseudo-loss of the learner
  double loss_star = 0.0;  // cumulative loss of the best fixed arm
  double loss_c = 0.0;     // cumulative pseudo-loss of the comparator
  std::int64_t arrived = 0;  // feedback items delivered at the end of round t

  double regret_best() const { return loss_b - loss_star; }
  double comparator_gap() const { return loss_b - loss_c; }

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct RestartLog {
  Round round = 0;
  std::int64_t trigger_delay = 0;  // observable: delays of arrived stage feedback
  std::int64_t oracle_delay = 0;   // sum of d_r over the stage's rounds before the trigger
  std::int64_t old_estimate = 0;
  std::int64_t new_estimate = 0;

  friend bool operator==(const RestartLog&, const RestartLog&) = default;
};

struct AuditSummary {
  bool enabled = false;
  std::int64_t violations = 0;
  std::vector<std::string> messages;
  std::int64_t rounds = 0;
  double max_conservation_residual = 0.0;
  double min_credit = 0.0;
  std::int64_t stability_checks = 0;
  double max_stability_excess = 0.0;
  std::int64_t missing_count_checks = 0;
  std::int64_t gap_checks = 0;
  std::int64_t weight_checks = 0;
  double max_weight = 0.0;

  friend bool operator==(const AuditSummary&, const AuditSummary&) = default;
};

struct RunSummary {
  std::string learner;
  std::uint64_t seed = 0;
  Round horizon = 0;
  std::size_t arms = 0;
  std::string delay_model;
  std::string regularizer;
  double delta = 0.0;
  Arm best_arm = 0;
  double default_reward = 0.0;
  bool oracle_anchor = true;  // comparator anchor and r0 come from the realized losses
  std::int64_t total_delay = 0;
  std::int64_t delivered = 0;
  int stages = 1;
  int phases = 1;
  std::int64_t soft_restarts = 0;
  std::vector<RestartLog> hard_restarts;
  double final_alpha = 1.0;
  double loss_b = 0.0;
  double loss_star = 0.0;
  double loss_c = 0.0;
  double regret_best = 0.0;
  double comparator_gap = 0.0;
  AuditSummary audit;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RestartLog, round, trigger_delay, oracle_delay, old_estimate, new_estimate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AuditSummary, enabled, violations, messages, rounds, max_conservation_residual,
                                   min_credit, stability_checks, max_stability_excess, missing_count_checks,
                                   gap_checks, weight_checks, max_weight)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunSummary, learner, seed, horizon, arms, delay_model, regularizer, delta,
                                   best_arm, default_reward, oracle_anchor, total_delay, delivered, stages, phases,
                                   soft_restarts, hard_restarts, final_alpha, loss_b, loss_star, loss_c, regret_best,
                                   comparator_gap, audit)

struct RunTrace {
  std::vector<TraceRow> rows;
  RunSummary summary;
  std::vector<SoftRestart> soft_restarts;  // prudent-banker only
};

class RunError : public std::runtime_error {
 public:
  RunError(Round round, const std::string& learner, const std::string& what)
      : std::runtime_error(learner + ", round " + std::to_string(round) + ": " + what), round_(round) {}
  Round round() const { return round_; }

 private:
  Round round_;
};

// Round loop: act, enqueue feedback, deliver arrivals, record metrics.
inline RunTrace run_learner(const RunConfig& config, const RunContext& ctx, const LearnerSpec& spec) {
  const auto& env = ctx.env;
  const Round T = env.horizon();
  auto learner = make_learner(spec, config, ctx);
  StreamFactory streams(env.seed);
  Rng action_rng = streams.stream("actions/" + spec.to_string());
  FeedbackQueue queue(T);

  RunTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(T));
  double loss_b = 0.0;
  std::int64_t delivered = 0;
  Round t = 1;
  try {
    for (; t <= T; ++t) {
      const double u = uniform01(action_rng);
      const auto d = learner->act(t, u);
      TraceRow row;
      row.t = t;
      row.stage = learner->stage();
      row.phase = learner->phase();
      row.alpha = learner->alpha();
      row.loss_b = loss_b += pseudo_loss(d.distribution, env.losses.row(t));
      row.loss_star = ctx.best.cumulative[static_cast<std::size_t>(t - 1)];
      row.loss_c = ctx.comparator_cumulative[static_cast<std::size_t>(t - 1)];
      queue.push({t, d.arm, env.losses(t, d.arm), t + env.delays[t]});
      const auto arrivals = queue.step(t);
      learner->observe(t, arrivals);
      row.arrived = static_cast<std::int64_t>(arrivals.size());
      delivered += row.arrived;
      trace.rows.push_back(row);
    }
  } catch (const std::exception& e) {
    throw RunError(t, spec.to_string(), e.what());
  }

  auto& s = trace.summary;
  s.learner = spec.to_string();
  s.seed = env.seed;
  s.horizon = T;
  s.arms = env.arms();
  s.delay_model = delay_model_name(ctx.delay_model);
  s.regularizer = std::string(to_string(config.regularizer));
  s.delta = config.delta;
  s.best_arm = ctx.best.arm;
  s.default_reward = ctx.default_reward;
  s.total_delay = env.delays.total();
  s.delivered = delivered;
  s.stages = learner->stage();
  s.final_alpha = learner->alpha();
  if (!trace.rows.empty()) {
    const auto& last = trace.rows.back();
    s.loss_b = last.loss_b;
    s.loss_star = last.loss_star;
    s.loss_c = last.loss_c;
    s.regret_best = last.regret_best();
    s.comparator_gap = last.comparator_gap();
  }
  if (const auto* p = dynamic_cast<const PrudentBanker*>(learner.get())) {
    Round stage_start = 1;
    for (const auto& h : p->hard_restarts()) {
      s.hard_restarts.push_back({h.round, h.trigger_delay, env.delays.window_total(stage_start, h.round - 1),
                                 h.old_estimate, h.new_estimate});
      stage_start = h.round + 1;
    }
    trace.soft_restarts = p->soft_restarts();
    s.soft_restarts = static_cast<std::int64_t>(p->soft_restarts().size());
    s.phases = s.stages + static_cast<int>(s.soft_restarts);
    if (const auto& a = p->audit()) {
      s.audit.enabled = true;
      s.audit.violations = a->violation_count;
      s.audit.messages = a->violations;
      s.audit.rounds = a->rounds;
      s.audit.max_conservation_residual = a->max_conservation_residual;
      s.audit.min_credit = a->min_credit;
      s.audit.stability_checks = a->stability_checks;
      s.audit.max_stability_excess = a->stability_checks ? a->max_stability_excess : 0.0;
      s.audit.missing_count_checks = a->missing_count_checks;
      s.audit.gap_checks = a->gap_checks;
      s.audit.weight_checks = a->weight_checks;
      s.audit.max_weight = a->max_weight;
    }
  }
  return trace;
}

struct ComparisonResult {
  std::uint64_t seed = 0;
  std::vector<RunTrace> traces;  // one per learner, in config order
};

// Every learner of the comparison runs on the same realized environment.
inline ComparisonResult run(const RunConfig& config, std::uint64_t seed) {
  const auto ctx = make_context(config, seed);
  ComparisonResult r;
  r.seed = seed;
  for (const auto& spec : config.learners) r.traces.push_back(run_learner(config, ctx, spec));
  return r;
}

inline constexpr std::string_view kTraceHeader = "t,stage,phase,alpha,loss_B,loss_star,loss_c,arrived";

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << kTraceHeader << '\n';
  for (const auto& r : rows) {
    os << r.t << ',' << r.stage << ',' << r.phase << ',' << format_double(r.alpha) << ',' << format_double(r.loss_b)
       << ',' << format_double(r.loss_star) << ',' << format_double(r.loss_c) << ',' << r.arrived << '\n';
  }
}

inline std::vector<TraceRow> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw ConfigError("trace csv: bad header");
  std::vector<TraceRow> rows;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ConfigError("trace csv line " + std::to_string(n) + ": expected 8 fields");
    TraceRow r;
    std::int64_t stage = 0, phase = 0;
    const bool ok = parse_int(f[0], r.t) && parse_int(f[1], stage) && parse_int(f[2], phase) &&
                    parse_double(f[3], r.alpha) && parse_double(f[4], r.loss_b) && parse_double(f[5], r.loss_star) &&
                    parse_double(f[6], r.loss_c) && parse_int(f[7], r.arrived);
    if (!ok) throw ConfigError("trace csv line " + std::to_string(n) + ": bad field");
    r.stage = static_cast<int>(stage);
    r.phase = static_cast<int>(phase);
    rows.push_back(r);
  }
  return rows;
}

inline std::string summary_json(const RunSummary& s) { return nlohmann::json(s).dump(2) + "\n"; }

inline RunSummary parse_summary_json(const std::string& text) { return nlohmann::json::parse(text).get<RunSummary>(); }

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// <out>/<stem>.csv and <out>/<stem>.json; returns the CSV path.
inline std::filesystem::path emit(const std::filesystem::path& out, const LearnerSpec& spec, const RunTrace& trace) {
  const auto stem = spec.tag() + "-" + trace.summary.delay_model + "-seed" + std::to_string(trace.summary.seed);
  std::ostringstream csv;
  write_trace_csv(csv, trace.rows);
  const auto csv_path = out / (stem + ".csv");
  write_file(csv_path, csv.str());
  write_file(out / (stem + ".json"), summary_json(trace.summary));
  return csv_path;
}

// Grid over seeds x delay models; each cell runs every learner on one shared
// environment. Cells run concurrently.
inline std::vector<ComparisonResult> sweep(const RunConfig& base, const std::vector<DelayModel>& delay_models,
                                           unsigned threads = std::thread::hardware_concurrency()) {
  struct Cell {
    RunConfig config;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& dm : delay_models) {
    for (auto seed : base.seeds) {
      Cell c{base, seed};
      c.config.env.delay_model = dm;
      cells.push_back(std::move(c));
    }
  }
  std::vector<ComparisonResult> results(cells.size());
  threads = std::max(1u, threads);
  std::size_t next = 0;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(m);
        if (next >= cells.size()) return;
        i = next++;
      }
      results[i] = run(cells[i].config, cells[i].seed);
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned k = 0; k < std::min<std::size_t>(threads, cells.size()); ++k) {
    pool.push_back(std::async(std::launch::async, worker));
  }
  for (auto& f : pool) f.get();
  return results;
}

}  // namespace pbandit
