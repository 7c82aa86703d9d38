// Command-line driver: run experiments, fit the reference policy, validate configs.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqdesign/config.hpp"
#include "seqdesign/experiment.hpp"
#include "seqdesign/stats.hpp"

namespace sd = seqdesign;

namespace {

void apply_overrides(sd::ExperimentConfig& cfg, const std::vector<std::string>& policies,
                     const std::optional<int>& replications, const std::optional<std::uint64_t>& seed) {
  if (!policies.empty()) {
    cfg.policies.clear();
    for (const auto& p : policies) cfg.policies.push_back(sd::parse_policy(p));
  }
  if (replications) cfg.replications = *replications;
  if (seed) cfg.master_seed = *seed;
  cfg.validate();
}

int cmd_run(const std::string& config, const std::string& out, const std::vector<std::string>& policies,
            const std::optional<int>& replications, const std::optional<std::uint64_t>& seed, unsigned threads,
            bool traces) {
  sd::ExperimentConfig cfg = sd::load_experiment(config);
  apply_overrides(cfg, policies, replications, seed);
  sd::RunOptions opts;
  opts.threads = threads;
  opts.keep_traces = traces;
  opts.log = &std::cerr;
  const sd::ExperimentResults res = sd::run_experiment(cfg, opts);
  const sd::StatsReport stats = sd::compute_stats(res);
  sd::emit_reports(res, stats, out);
  for (const auto& s : stats.summaries) {
    std::cout << s.scenario << ' ' << s.policy << " mean=" << sd::fmt_num(s.mean_covered)
              << " rate=" << sd::fmt_num(s.mean_rate) << " n=" << s.replications << (s.complete ? "" : " INCOMPLETE")
              << '\n';
  }
  return 0;
}

int cmd_cr(const std::string& config, int samples, const std::optional<std::uint64_t>& seed) {
  sd::ExperimentConfig cfg = sd::load_experiment(config);
  if (seed) cfg.master_seed = *seed;
  std::cout << "scenario,samples,shape,scale,shift,p50,max\n";
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
    const auto& spec = cfg.scenarios[s];
    const sd::ScenarioInputs in = sd::resolve_scenario(spec);
    sd::Rng truth_rng(sd::stream_seed(cfg.master_seed, s, 0, sd::Stream::Truth));
    const sd::DemandTruth truth = sd::draw_truth(spec, in, truth_rng);
    sd::Rng rng(sd::stream_seed(cfg.master_seed, s, 0, sd::Stream::Reference));
    const sd::CrReference ref = sd::cr_reference(in.network, truth, spec.design, samples, rng);
    std::cout << spec.id << ',' << samples << ',' << sd::fmt_num(ref.fit.shape) << ',' << sd::fmt_num(ref.fit.scale)
              << ',' << sd::fmt_num(ref.fit.shift) << ',' << sd::fmt_num(ref.fit.percentile(0.5)) << ','
              << sd::fmt_num(ref.fit.percentile(1.0)) << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& config) {
  const sd::ExperimentConfig cfg = sd::load_experiment(config);
  for (const auto& spec : cfg.scenarios) {
    const sd::ScenarioInputs in = sd::resolve_scenario(spec);
    int longest = 0;
    for (sd::NodeId a = 0; a < static_cast<sd::NodeId>(in.network.node_count()); ++a)
      for (sd::NodeId b = a + 1; b < static_cast<sd::NodeId>(in.network.node_count()); ++b)
        if (auto path = sd::shortest_path(in.network, a, b)) longest = std::max(longest, static_cast<int>(path->size()));
    if (spec.design.pilots > 0 && longest < spec.design.min_pilot_length) {
      throw sd::ConfigError(spec.id + ": no shortest path reaches L_P = " + std::to_string(spec.design.min_pilot_length) +
                            " nodes (longest is " + std::to_string(longest) + ")");
    }
    std::cout << spec.id << ": " << in.network.node_count() << " nodes, " << in.network.segments().size()
              << " segments, " << in.layout->correlated().size() << " correlated pairs, variation "
              << spec.variation.label << '\n';
  }
  std::cout << "ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential transit route design with optimal learning"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::vector<std::string> policies;
  std::optional<int> replications;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool traces = false;
  int samples = 200;

  auto* run = app.add_subcommand("run", "Run a replicated experiment and write reports");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");
  run->add_option("--policy", policies, "Policies to compare (greedy, mab, kg, kgcb)")->delimiter(',');
  run->add_option("--replications", replications, "Override replication count");
  run->add_option("--seed", seed, "Override master seed");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--traces", traces, "Also write per-run design traces");

  auto* cr = app.add_subcommand("cr", "Fit the random-design reference for each scenario");
  cr->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cr->add_option("--samples", samples, "Random designs per fit")->check(CLI::Range(2, 1000000));
  cr->add_option("--seed", seed, "Override master seed");

  auto* validate = app.add_subcommand("validate", "Check a config and its input files");
  validate->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, policies, replications, seed, threads, traces);
    if (*cr) return cmd_cr(config, samples, seed);
    if (*validate) return cmd_validate(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
