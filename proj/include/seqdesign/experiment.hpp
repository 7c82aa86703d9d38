#pragma once

// Replicated experiments: seeded streams, paired policy runs, summary
// statistics and report files.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seqdesign/config.hpp"
#include "seqdesign/demand.hpp"
#include "seqdesign/designer.hpp"
#include "seqdesign/stats.hpp"

namespace seqdesign {

enum class Stream : std::uint64_t { Truth = 1, Pilots = 2, Design = 3, Reference = 4 };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent seed per (scenario, replication, stream); policy runs of the
/// same replication share truth and pilot streams.
inline std::uint64_t stream_seed(std::uint64_t master, std::size_t scenario, std::size_t replication, Stream tag) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(scenario));
  h = splitmix64(h ^ static_cast<std::uint64_t>(replication));
  return splitmix64(h ^ static_cast<std::uint64_t>(tag));
}

/// FNV-1a over raw doubles; used to confirm paired runs saw identical inputs.
inline std::uint64_t hash_doubles(const double* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n * sizeof(double); ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_inputs(const DemandTruth& truth, const BeliefState& belief) {
  std::uint64_t h = hash_doubles(truth.means.data(), static_cast<std::size_t>(truth.means.size()));
  h = hash_doubles(truth.covariance.data(), static_cast<std::size_t>(truth.covariance.size()), h);
  h = hash_doubles(belief.corr_mean.data(), static_cast<std::size_t>(belief.corr_mean.size()), h);
  h = hash_doubles(belief.corr_cov.data(), static_cast<std::size_t>(belief.corr_cov.size()), h);
  h = hash_doubles(belief.indep_mean.data(), static_cast<std::size_t>(belief.indep_mean.size()), h);
  return hash_doubles(belief.indep_precision.data(), static_cast<std::size_t>(belief.indep_precision.size()), h);
}

struct PolicyRun {
  PolicyKind policy{};
  double covered = 0.0;
  double rate = 0.0;
  std::vector<double> curve;
  RouteSystem system;
  std::uint64_t input_hash = 0;
  std::optional<DesignTrace> trace;
};

struct ReplicationResult {
  std::size_t scenario = 0;
  std::size_t replication = 0;
  bool ok = false;
  std::string error;
  double total_demand = 0.0;
  std::vector<PolicyRun> runs;  // config policy order
  std::optional<WeibullFit> reference;
};

struct ExperimentResults {
  ExperimentConfig config;
  std::vector<ScenarioInputs> inputs;
  std::vector<std::vector<ReplicationResult>> cells;  // [scenario][replication]
};

struct RunOptions {
  unsigned threads = 1;
  bool keep_traces = false;
  std::ostream* log = nullptr;
};

template <class URBG>
DemandTruth draw_truth(const ScenarioSpec& spec, const ScenarioInputs& in, URBG& rng) {
  if (in.from_prior) return synthesize_truth_from_prior(in.layout, in.base_means, spec.variation, rng);
  return synthesize_truth_with_means(in.layout, in.base_means, spec.variation, rng);
}

inline ReplicationResult run_replication(const ExperimentConfig& cfg, const std::vector<ScenarioInputs>& inputs,
                                         std::size_t s, std::size_t r, bool keep_traces) {
  ReplicationResult res;
  res.scenario = s;
  res.replication = r;
  const ScenarioSpec& spec = cfg.scenarios[s];
  const ScenarioInputs& in = inputs[s];
  try {
    Rng truth_rng(stream_seed(cfg.master_seed, s, r, Stream::Truth));
    const DemandTruth truth = draw_truth(spec, in, truth_rng);
    res.total_demand = truth.total();

    Rng pilot_rng(stream_seed(cfg.master_seed, s, r, Stream::Pilots));
    std::optional<Eigen::VectorXd> external;
    if (in.from_prior && spec.prior_informs_belief) external = in.base_means;
    const PilotOutcome pilots = run_pilots(in.network, truth, spec.design, pilot_rng, external);

    for (PolicyKind policy : cfg.policies) {
      DesignConfig dc = spec.design;
      dc.policy = policy;
      Rng design_rng(stream_seed(cfg.master_seed, s, r, Stream::Design));
      PolicyRun run;
      run.policy = policy;
      run.input_hash = hash_inputs(truth, pilots.belief);
      DesignResult d = design_system(in.network, truth, dc, design_rng, pilots.belief);
      run.covered = d.trace.final_coverage();
      run.rate = coverage_rate(d.trace, truth);
      run.curve = d.trace.coverage_history;
      run.system = std::move(d.system);
      if (keep_traces) run.trace = std::move(d.trace);
      res.runs.push_back(std::move(run));
    }

    if (cfg.cr_samples >= 2) {
      Rng cr_rng(stream_seed(cfg.master_seed, s, r, Stream::Reference));
      res.reference = cr_reference(in.network, truth, spec.design, cfg.cr_samples, cr_rng).fit;
    }
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
    res.runs.clear();
    res.reference.reset();
  }
  return res;
}

/// Runs every scenario x replication. Failed replications are logged and
/// kept with ok = false; the rest of the experiment continues.
inline ExperimentResults run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  ExperimentResults out;
  out.config = cfg;
  for (const auto& s : cfg.scenarios) out.inputs.push_back(resolve_scenario(s));
  out.cells.resize(cfg.scenarios.size());
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
    out.cells[s].resize(static_cast<std::size_t>(cfg.replications));
    for (std::size_t r = 0; r < static_cast<std::size_t>(cfg.replications); ++r) jobs.emplace_back(s, r);
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const auto [s, r] = jobs[k];
      ReplicationResult res = run_replication(cfg, out.inputs, s, r, opts.keep_traces);
      if (!res.ok && opts.log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *opts.log << "scenario " << cfg.scenarios[s].id << " replication " << r << " failed: " << res.error << '\n';
      }
      out.cells[s][r] = std::move(res);
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

struct PolicySummary {
  std::string scenario;
  std::string policy;
  std::size_t replications = 0;
  bool complete = false;
  double mean_covered = 0.0, std_covered = 0.0;
  double mean_rate = 0.0, std_rate = 0.0;
};

struct PairwiseTest {
  std::string scenario;
  std::string policy_a, policy_b;
  std::optional<TTestResult> welch;
  std::optional<ChiSquaredResult> links;
};

struct StatsReport {
  std::vector<PolicySummary> summaries;
  std::vector<PairwiseTest> tests;
};

/// Per-replication values of one policy across the successful replications.
inline std::vector<double> policy_values_of(const std::vector<ReplicationResult>& reps, std::size_t policy_pos,
                                            bool rate) {
  std::vector<double> v;
  for (const auto& r : reps)
    if (r.ok) v.push_back(rate ? r.runs[policy_pos].rate : r.runs[policy_pos].covered);
  return v;
}

/// Segment choice counts over all successful replications, in network order.
inline std::vector<double> link_counts(const Network& net, const std::vector<ReplicationResult>& reps,
                                       std::size_t policy_pos) {
  std::map<Segment, std::size_t> slot;
  for (std::size_t k = 0; k < net.segments().size(); ++k) slot[net.segments()[k]] = k;
  std::vector<double> counts(net.segments().size(), 0.0);
  for (const auto& r : reps) {
    if (!r.ok) continue;
    for (const auto& route : r.runs[policy_pos].system.routes)
      for (std::size_t k = 0; k + 1 < route.nodes.size(); ++k)
        counts[slot.at(Segment(route.nodes[k], route.nodes[k + 1]))] += 1.0;
  }
  return counts;
}

inline PolicySummary summarize(const std::string& scenario, const std::string& policy, std::vector<double> covered,
                               std::vector<double> rate, std::size_t requested) {
  PolicySummary s;
  s.scenario = scenario;
  s.policy = policy;
  s.replications = covered.size();
  s.complete = covered.size() == requested;
  if (!covered.empty()) {
    s.mean_covered = sample_mean(covered);
    s.std_covered = std::sqrt(sample_variance(covered));
    s.mean_rate = sample_mean(rate);
    s.std_rate = std::sqrt(sample_variance(rate));
  }
  return s;
}

inline StatsReport compute_stats(const ExperimentResults& res) {
  StatsReport rep;
  const auto& cfg = res.config;
  const auto requested = static_cast<std::size_t>(cfg.replications);
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
    const auto& reps = res.cells[s];
    const std::string& id = cfg.scenarios[s].id;
    for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
      rep.summaries.push_back(summarize(id, to_string(cfg.policies[p]), policy_values_of(reps, p, false),
                                        policy_values_of(reps, p, true), requested));
    }
    if (cfg.cr_samples >= 2) {
      std::vector<double> p50, p50r, mx, mxr;
      for (const auto& r : reps) {
        if (!r.ok || !r.reference) continue;
        p50.push_back(r.reference->percentile(0.5));
        mx.push_back(r.reference->percentile(1.0));
        p50r.push_back(p50.back() / r.total_demand);
        mxr.push_back(mx.back() / r.total_demand);
      }
      rep.summaries.push_back(summarize(id, "cr_p50", p50, p50r, requested));
      rep.summaries.push_back(summarize(id, "cr_max", mx, mxr, requested));
    }
    for (std::size_t a = 0; a < cfg.policies.size(); ++a) {
      for (std::size_t b = a + 1; b < cfg.policies.size(); ++b) {
        PairwiseTest t;
        t.scenario = id;
        t.policy_a = to_string(cfg.policies[a]);
        t.policy_b = to_string(cfg.policies[b]);
        const auto va = policy_values_of(reps, a, false);
        const auto vb = policy_values_of(reps, b, false);
        try {
          t.welch = welch_t_test(va, vb);
        } catch (const std::invalid_argument&) {
        }
        try {
          const auto& net = res.inputs[s].network;
          t.links = chi_squared_frequencies(link_counts(net, reps, a), link_counts(net, reps, b));
        } catch (const std::invalid_argument&) {
        }
        rep.tests.push_back(std::move(t));
      }
    }
  }
  return rep;
}

/// Shortest round-trip decimal text; identical doubles give identical text.
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::ofstream open_report(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

inline std::string route_text(const Route& r) {
  std::string s;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) s += (k ? "-" : "") + std::to_string(r.nodes[k]);
  return s;
}

}  // namespace detail

/// Writes summary.csv, tests.csv, curves.csv, link_freq.csv, routes.csv,
/// run.json and, when traces were kept, traces/<scenario>_<policy>_<rep>.json.
inline void emit_reports(const ExperimentResults& res, const StatsReport& stats, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cfg = res.config;

  {
    auto f = detail::open_report(dir / "summary.csv");
    f << "scenario,policy,replications,complete,mean_covered,std_covered,mean_rate,std_rate\n";
    for (const auto& s : stats.summaries) {
      f << s.scenario << ',' << s.policy << ',' << s.replications << ',' << (s.complete ? 1 : 0) << ','
        << fmt_num(s.mean_covered) << ',' << fmt_num(s.std_covered) << ',' << fmt_num(s.mean_rate) << ','
        << fmt_num(s.std_rate) << '\n';
    }
  }
  {
    auto f = detail::open_report(dir / "tests.csv");
    f << "scenario,policy_a,policy_b,welch_t,welch_df,welch_p,chi2,chi2_df,chi2_p\n";
    for (const auto& t : stats.tests) {
      f << t.scenario << ',' << t.policy_a << ',' << t.policy_b << ',';
      if (t.welch) {
        f << fmt_num(t.welch->t) << ',' << fmt_num(t.welch->df) << ',' << fmt_num(t.welch->p) << ',';
      } else {
        f << ",,,";
      }
      if (t.links) {
        f << fmt_num(t.links->statistic) << ',' << t.links->df << ',' << fmt_num(t.links->p);
      } else {
        f << ",,";
      }
      f << '\n';
    }
  }
  {
    auto curves = detail::open_report(dir / "curves.csv");
    auto routes = detail::open_report(dir / "routes.csv");
    curves << "scenario,policy,replication,t,covered_demand\n";
    routes << "scenario,policy,replication,route,nodes\n";
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
      for (const auto& r : res.cells[s]) {
        if (!r.ok) continue;
        for (const auto& run : r.runs) {
          const std::string head = cfg.scenarios[s].id + ',' + to_string(run.policy) + ',' + std::to_string(r.replication);
          for (std::size_t t = 0; t < run.curve.size(); ++t)
            curves << head << ',' << t + 1 << ',' << fmt_num(run.curve[t]) << '\n';
          for (std::size_t k = 0; k < run.system.routes.size(); ++k)
            routes << head << ',' << k << ',' << detail::route_text(run.system.routes[k]) << '\n';
        }
      }
    }
  }
  {
    auto f = detail::open_report(dir / "link_freq.csv");
    f << "scenario,policy,p,q,count\n";
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
      const auto& net = res.inputs[s].network;
      for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
        const auto counts = link_counts(net, res.cells[s], p);
        for (std::size_t k = 0; k < counts.size(); ++k) {
          f << cfg.scenarios[s].id << ',' << to_string(cfg.policies[p]) << ',' << net.segments()[k].p << ','
            << net.segments()[k].q << ',' << fmt_num(counts[k]) << '\n';
        }
      }
    }
  }
  {
    nlohmann::json run = experiment_to_json(cfg);
    nlohmann::json seeds = nlohmann::json::array();
    nlohmann::json failures = nlohmann::json::array();
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
      for (const auto& r : res.cells[s]) {
        seeds.push_back({{"scenario", cfg.scenarios[s].id},
                         {"replication", r.replication},
                         {"truth", stream_seed(cfg.master_seed, s, r.replication, Stream::Truth)},
                         {"pilots", stream_seed(cfg.master_seed, s, r.replication, Stream::Pilots)},
                         {"design", stream_seed(cfg.master_seed, s, r.replication, Stream::Design)},
                         {"reference", stream_seed(cfg.master_seed, s, r.replication, Stream::Reference)}});
        if (!r.ok) failures.push_back({{"scenario", cfg.scenarios[s].id}, {"replication", r.replication}, {"error", r.error}});
      }
    }
    run["seeds"] = std::move(seeds);
    run["failures"] = std::move(failures);
    auto f = detail::open_report(dir / "run.json");
    f << run.dump(2) << '\n';
  }
  bool any_trace = false;
  for (const auto& reps : res.cells)
    for (const auto& r : reps)
      for (const auto& run : r.runs) any_trace = any_trace || run.trace.has_value();
  if (any_trace) {
    std::filesystem::create_directories(dir / "traces");
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
      const PairIndex idx = res.inputs[s].network.pair_index();
      for (const auto& r : res.cells[s]) {
        for (const auto& run : r.runs) {
          if (!run.trace) continue;
          auto f = detail::open_report(dir / "traces" /
                                       (cfg.scenarios[s].id + "_" + to_string(run.policy) + "_" +
                                        std::to_string(r.replication) + ".json"));
          f << trace_to_json(*run.trace, idx).dump(2) << '\n';
        }
      }
    }
  }
}

}  // namespace seqdesign
