// pbandit: run, sweep, lowerbound and verify subcommands.

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pbandit/harness.hpp"
#include "pbandit/lowerbound.hpp"
#include "pbandit/prudent.hpp"
#include "pbandit/verify.hpp"

namespace {

using namespace pbandit;

// Flag values kept as text and applied through the config-file keys, after
// the scale defaults and the config file.
struct ConfigFlags {
  std::string scale = "desk";
  std::string config_path;
  std::vector<std::string> learners;
  std::vector<std::string> seeds;
  std::map<std::string, std::string> values;
  bool audit = false;

  static constexpr const char* kKeys[] = {"horizon",      "arms",  "blocks",      "delay",     "delay_p",
                                          "geometric_q",  "pareto_shape", "pareto_scale", "delta", "regularizer",
                                          "alpha_safe",   "delta_ucb",    "out"};

  void attach(CLI::App* app) {
    app->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--learner", learners, "learner (repeatable)");
    app->add_option("--seed", seeds, "seed (repeatable)");
    app->add_flag("--audit", audit, "check invariants every round");
    for (const char* key : kKeys) {
      std::string flag = std::string("--") + key;
      for (auto& c : flag)
        if (c == '_') c = '-';
      app->add_option(flag, values[key]);
    }
  }

  RunConfig build() const {
    RunConfig c = scale_defaults(parse_scale(scale));
    if (!config_path.empty()) c = load_config(config_path, c);
    for (const char* key : kKeys) {
      const auto& v = values.at(key);
      if (!v.empty()) apply_setting(c, key, v);
    }
    if (!learners.empty()) {
      c.learners.clear();
      for (const auto& l : learners) c.learners.push_back(parse_learner(l));
    }
    if (!seeds.empty()) {
      std::string joined;
      for (const auto& s : seeds) joined += s + ",";
      apply_setting(c, "seeds", joined);
    }
    if (audit) c.audit = true;
    c.validate();
    return c;
  }
};

void print_summary(const RunSummary& s, const std::filesystem::path& csv) {
  std::cout << std::left << std::setw(22) << s.learner << " delay=" << s.delay_model << " seed=" << s.seed
            << " D=" << s.total_delay << " stages=" << s.stages << " phases=" << s.phases
            << " regret_best=" << format_double(s.regret_best) << " comparator_gap=" << format_double(s.comparator_gap);
  if (s.audit.enabled) std::cout << " audit_violations=" << s.audit.violations;
  std::cout << " -> " << csv.string() << '\n';
}

int audit_status(const ComparisonResult& r) {
  for (const auto& t : r.traces)
    if (t.summary.audit.violations > 0) return 1;
  return 0;
}

int cmd_run(const ConfigFlags& flags) {
  const auto c = flags.build();
  int status = 0;
  for (auto seed : c.seeds) {
    const auto res = run(c, seed);
    for (std::size_t i = 0; i < res.traces.size(); ++i)
      print_summary(res.traces[i].summary, emit(c.output, c.learners[i], res.traces[i]));
    status |= audit_status(res);
  }
  return status;
}

int cmd_sweep(const ConfigFlags& flags, const std::vector<std::string>& delays, unsigned threads) {
  const auto c = flags.build();
  std::vector<DelayModel> models;
  for (const auto& d : delays) {
    RunConfig probe = c;
    apply_setting(probe, "delay", d);
    models.push_back(probe.env.delay_model);
  }
  const auto results = sweep(c, models, threads);
  int status = 0;
  for (const auto& res : results) {
    for (std::size_t i = 0; i < res.traces.size(); ++i)
      print_summary(res.traces[i].summary, emit(c.output, c.learners[i], res.traces[i]));
    status |= audit_status(res);
  }
  return status;
}

struct LowerboundOptions {
  std::int64_t q = 2;
  std::int64_t n = 2;
  std::vector<std::int64_t> delays;
  double delta = 0.25;
  std::size_t arms = 2;
  std::int64_t trials = 100000;
  int identity_seeds = 100;
  std::uint64_t seed = 1;
};

const char* mark(bool ok) { return ok ? "pass" : "FAIL"; }

int cmd_lowerbound(const LowerboundOptions& o) {
  const DelaySequence d = o.delays.empty() ? corollary_delays(o.q, o.n) : DelaySequence(o.delays);
  bool all_ok = true;
  std::cout << "[delays]\n";
  std::cout << "source: " << (o.delays.empty() ? "corollary q=" + std::to_string(o.q) + " N=" + std::to_string(o.n)
                                               : std::string("explicit"))
            << '\n';
  std::cout << "horizon: " << d.horizon() << '\n' << "total_delay: " << d.total() << '\n';
  if (o.delays.empty()) {
    const bool ok = d.total() == corollary_total_delay(o.q, o.n);
    all_ok = all_ok && ok;
    std::cout << "closed_form_total: " << corollary_total_delay(o.q, o.n) << " " << mark(ok) << '\n';
  }

  const auto b = greedy_buckets(d);
  std::cout << "\n[buckets]\n";
  std::cout << "m,begin,end,L,L2,next_bucket_delay,V_m\n";
  for (std::size_t m = 1; m <= b.count(); ++m) {
    std::int64_t next = 0;
    if (m < b.count())
      for (Round t = b.begin(m + 1); t < b.end(m + 1); ++t) next += d[t];
    const auto len = b.length(m);
    std::cout << m << ',' << b.begin(m) << ',' << b.end(m) - 1 << ',' << len << ',' << len * len << ',' << next
              << ',' << b.suffix_complexity(m) << '\n';
  }
  const auto chk = check_buckets(d, b);
  all_ok = all_ok && chk.ok();
  std::cout << "\n[bucket checks]\n";
  std::cout << "monotone_lengths: " << mark(chk.monotone) << '\n';
  std::cout << "quadratic_dominance: " << mark(chk.quadratic_dominance) << '\n';
  std::cout << "suffix_dominance: " << mark(chk.suffix_dominance) << '\n';
  std::cout << "bucket_property: " << mark(chk.bucket_property) << '\n';
  if (!chk.ok()) std::cout << "first_failure: " << chk.first_failure << '\n';

  const auto lengths = b.lengths();
  std::cout << "\n[hard instance]\n";
  std::int64_t v = 0;
  for (auto l : lengths) v += l * l;
  const double floor = static_cast<double>(lengths[0]) / (64.0 * static_cast<double>(v));
  std::cout << "arms: " << o.arms << "\ndelta: " << format_double(o.delta) << "\nV: " << v << '\n';
  std::cout << "precondition delta >= L1/(64 V) = " << format_double(floor) << ": " << mark(o.delta >= floor) << '\n';
  std::cout << "precondition delta <= 1/A: " << mark(o.delta <= 1.0 / static_cast<double>(o.arms)) << '\n';
  const auto inst = make_hard_instance(lengths, o.delta, o.arms);
  std::cout << "gamma: " << format_double(inst.gamma()) << '\n';
  double max_eps = 0.0;
  for (std::size_t m = 0; m < inst.eps().size(); ++m) {
    std::cout << "eps_" << m + 1 << ": " << format_double(inst.eps()[m]) << '\n';
    max_eps = std::max(max_eps, inst.eps()[m]);
  }
  std::cout << "eps_max <= 1/4: " << mark(max_eps <= 0.25) << '\n';

  std::cout << "\n[batched identity]\n";
  int identical = 0;
  const auto xc = inst.comparator();
  for (int s = 1; s <= o.identity_seeds; ++s) {
    StreamFactory streams(o.seed + static_cast<std::uint64_t>(s));
    Rng loss_rng = streams.stream("losses");
    Rng tape_rng = streams.stream("tape");
    std::vector<double> g(static_cast<std::size_t>(d.horizon()) * o.arms);
    for (auto& x : g) x = uniform01(loss_rng);
    const LossTable table(d.horizon(), o.arms, std::move(g));
    std::vector<double> tape(static_cast<std::size_t>(d.horizon()));
    for (auto& u : tape) u = uniform01(tape_rng);
    LearnerFactory make = [&] {
      PrudentConfig pc;
      pc.delta = o.delta;
      pc.horizon = d.horizon();
      pc.comparator = xc;
      return std::unique_ptr<Learner>(std::make_unique<PrudentBanker>(pc));
    };
    if (batched_simulate(make, d, 1, table, tape, xc).identical()) ++identical;
  }
  const bool id_ok = identical == o.identity_seeds;
  all_ok = all_ok && id_ok;
  std::cout << "learner: prudent-banker\nseeds: " << o.identity_seeds << "\nidentical: " << identical << ' '
            << mark(id_ok) << '\n';

  std::cout << "\n[monte carlo]\n";
  std::cout << "trials: " << o.trials << '\n';
  std::cout << "policy,mean_W,mean_regret,predicted,diff_over_se,within_3se\n";
  const std::vector<std::pair<std::string, BatchedPolicy>> policies{
      {"always-arm-1", always_arm(0)}, {"always-arm-2", always_arm(1)}, {"sample-comparator", sample_from(xc)}};
  std::uint64_t seed = o.seed;
  for (const auto& [name, policy] : policies) {
    const auto p = safety_gap_probe(inst, policy, o.trials, seed++);
    all_ok = all_ok && p.within_3se;
    const double z = p.difference_se > 0.0 ? p.mean_difference / p.difference_se : 0.0;
    std::cout << name << ',' << format_double(p.mean_weight) << ',' << format_double(p.mean_regret) << ','
              << format_double(p.predicted) << ',' << format_double(z) << ',' << mark(p.within_3se) << '\n';
  }
  std::cout << "\nresult: " << mark(all_ok) << '\n';
  return all_ok ? 0 : 1;
}

int cmd_verify(const std::vector<int>& only) {
  const auto checks = verify::all_checks();
  bool ok = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto r = checks[i]();
    ok = ok && r.passed;
    std::cout << verify::format(r) << std::endl;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe adversarial bandits with delayed feedback"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run learners on one configuration");
  run_flags.attach(run_cmd);

  ConfigFlags sweep_flags;
  std::vector<std::string> sweep_delays{"none", "geometric", "pareto"};
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over seeds and delay models");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--delays", sweep_delays, "delay models")->delimiter(',');
  sweep_cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);

  LowerboundOptions lb;
  auto* lb_cmd = app.add_subcommand("lowerbound", "bucket decomposition and hard-instance report");
  lb_cmd->add_option("--q", lb.q, "corollary delay cap")->check(CLI::PositiveNumber);
  lb_cmd->add_option("--n", lb.n, "corollary block count")->check(CLI::PositiveNumber);
  lb_cmd->add_option("--delays", lb.delays, "explicit delay sequence")->delimiter(',');
  lb_cmd->add_option("--delta", lb.delta);
  lb_cmd->add_option("--arms", lb.arms)->check(CLI::Range(2, 1 << 20));
  lb_cmd->add_option("--trials", lb.trials);
  lb_cmd->add_option("--identity-seeds", lb.identity_seeds)->check(CLI::PositiveNumber);
  lb_cmd->add_option("--seed", lb.seed);

  std::vector<int> only;
  auto* verify_cmd = app.add_subcommand("verify", "run the invariant suites");
  verify_cmd->add_option("--only", only, "criterion numbers")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_flags);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, sweep_delays, threads);
    if (*lb_cmd) return cmd_lowerbound(lb);
    if (*verify_cmd) return cmd_verify(only);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
