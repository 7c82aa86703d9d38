#pragma once

// Sequential segment-level route design: pilots, the per-extension trial
// loop, segment extensions and route expansions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqdesign/belief.hpp"
#include "seqdesign/demand.hpp"
#include "seqdesign/network.hpp"
#include "seqdesign/policies.hpp"

namespace seqdesign {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TerminalRule {
  enum class Kind { MaxDemand, MaxUncovered, Random, Fixed };
  Kind kind = Kind::MaxDemand;
  NodeId fixed = 0;

  static TerminalRule parse(const std::string& s) {
    if (s == "max_demand") return {};
    if (s == "max_uncovered") return {Kind::MaxUncovered, 0};
    if (s == "random") return {Kind::Random, 0};
    if (s.rfind("fixed:", 0) == 0) {
      try {
        return {Kind::Fixed, std::stoi(s.substr(6))};
      } catch (const std::exception&) {
      }
    }
    throw ConfigError("terminal rule must be max_demand, max_uncovered, random or fixed:<id>; got '" + s + "'");
  }

  std::string str() const {
    switch (kind) {
      case Kind::MaxDemand: return "max_demand";
      case Kind::MaxUncovered: return "max_uncovered";
      case Kind::Random: return "random";
      case Kind::Fixed: return "fixed:" + std::to_string(fixed);
    }
    return "";
  }
};

struct DesignConfig {
  int routes = 3;               // K
  int max_route_length = 4;     // L, in nodes
  int pilots = 5;               // P
  int min_pilot_length = 4;     // L_P, in nodes
  int pilot_observations = 10;  // Q_P
  int trials = 10;              // M
  PolicyKind policy = PolicyKind::KGCB;
  int max_transfers = 1;
  std::uint64_t seed = 1;
  TerminalRule terminal_rule;
  double obs_noise_std_fraction = 0.05;
  double prior_std_fraction = 0.05;

  void validate() const {
    if (routes < 1 || max_route_length < 1 || trials < 1) throw ConfigError("K, L and M must be >= 1");
    if (pilots < 0 || pilot_observations < 0) throw ConfigError("P and Q_P must be >= 0");
    if (max_transfers != 0 && max_transfers != 1) throw ConfigError("max_transfers must be 0 or 1");
    if (!(obs_noise_std_fraction > 0.0)) throw ConfigError("observation noise fraction must be positive");
  }
};

struct PilotRecord {
  Route route;
  std::vector<ObservationBatch> batches;
};

struct PilotOutcome {
  std::vector<PilotRecord> records;
  BeliefState belief;
};

struct ExtensionRecord {
  int t = 0;
  int route_index = 0;
  OptionSet options;
  std::vector<std::size_t> trial_choices;
  std::size_t chosen = 0;
  int correlated_updates = 0;
  double covered_demand = 0.0;  // cumulative covered demand after this extension
};

struct DesignTrace {
  std::vector<ExtensionRecord> extensions;
  std::vector<double> coverage_history;
  std::vector<std::size_t> covered_pairs;  // ascending pair ids

  double final_coverage() const { return coverage_history.empty() ? 0.0 : coverage_history.back(); }
};

struct DesignResult {
  RouteSystem system;
  DesignTrace trace;
  BeliefState belief;
};

struct ExtensionResult {
  OptionSet options;
  std::size_t chosen = 0;
  BeliefState belief;
  std::vector<std::size_t> trial_choices;
  int correlated_updates = 0;
};

inline std::vector<std::size_t> pair_ids(const PairIndex& idx, const PairSet& pairs) {
  std::vector<std::size_t> ids;
  ids.reserve(pairs.size());
  for (const auto& p : pairs) ids.push_back(idx.id(p));
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Operates P random shortest-path pilots (>= L_P nodes), observes each Q_P
/// times, and builds the initial belief. With P = 0 the belief comes from
/// `external_means` alone.
template <class URBG>
PilotOutcome run_pilots(const Network& net, const DemandTruth& truth, const DesignConfig& cfg, URBG& rng,
                        const std::optional<Eigen::VectorXd>& external_means = std::nullopt) {
  cfg.validate();
  const auto n = static_cast<int>(net.node_count());
  const PairIndex idx = net.pair_index();
  PilotOutcome out;
  std::vector<ObservationBatch> all;
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int p = 0; p < cfg.pilots; ++p) {
    std::optional<Route> route;
    for (int attempt = 0; attempt < 1000 && !route; ++attempt) {
      const NodeId a = pick(rng);
      const NodeId b = pick(rng);
      if (a == b) continue;
      auto path = shortest_path(net, a, b);
      if (path && static_cast<int>(path->size()) >= cfg.min_pilot_length) route = std::move(path);
    }
    if (!route) {
      throw ConfigError("no terminal pair with a shortest path of at least " +
                        std::to_string(cfg.min_pilot_length) + " nodes after 1000 draws");
    }
    PilotRecord rec{*route, {}};
    const auto ids = pair_ids(idx, coverage_pairs(RouteSystem{{*route}}, 0));
    for (int q = 0; q < cfg.pilot_observations; ++q) {
      rec.batches.push_back(sample_flows(truth, ids, rng));
      all.push_back(rec.batches.back());
    }
    out.records.push_back(std::move(rec));
  }
  if (all.empty() && !external_means) {
    throw ConfigError("no pilot observations and no external prior to build a belief from");
  }
  PilotPriorOptions opts;
  opts.obs_noise_std_fraction = cfg.obs_noise_std_fraction;
  opts.external_means = external_means;
  opts.external_std_fraction = cfg.prior_std_fraction;
  out.belief = init_from_pilots(truth.layout, all, opts);
  return out;
}

/// Trial loop for one extension: M trials of choose/observe/update, then the
/// option with the highest posterior mean is committed.
template <class URBG>
ExtensionResult evaluate_extension(const Network& net, const DemandTruth& truth, BeliefState belief,
                                   const RouteSystem& others, const Route& route, const DesignConfig& cfg,
                                   URBG& rng) {
  ExtensionResult res;
  res.options = adjacent_extensions(net, route);
  if (res.options.empty()) throw std::invalid_argument("evaluate_extension: route has no extensions");
  const PairIndex idx = net.pair_index();
  std::vector<std::vector<std::size_t>> cover;
  cover.reserve(res.options.size());
  for (const auto& opt : res.options) {
    cover.push_back(pair_ids(idx, option_coverage(others, route, opt, cfg.max_transfers)));
  }
  MabState mab(res.options.size());
  for (int m = 0; m < cfg.trials; ++m) {
    const OptionBeliefs ob = aggregate_option_beliefs(belief, cover);
    std::size_t pick = 0;
    if (cfg.policy == PolicyKind::MAB && mab.unsampled()) {
      pick = *mab.unsampled();
    } else {
      pick = choose_option(policy_values(cfg.policy, ob, option_observation_variance(belief, ob), mab));
    }
    mab.record(pick);
    res.trial_choices.push_back(pick);
    const ObservationBatch batch = sample_flows(truth, cover[pick], rng);
    belief = update_independent(std::move(belief), batch);
    belief = update_correlated_partial(std::move(belief), batch);
    ++res.correlated_updates;
  }
  res.chosen = choose_option(aggregate_option_beliefs(belief, cover).means);
  res.belief = std::move(belief);
  return res;
}

/// Initial terminal for a new route. The demand rules pick the node with the
/// largest belief-mean demand over its incident pairs (all pairs, or only
/// pairs the system does not cover yet).
template <class URBG>
NodeId select_terminal(const Network& net, const BeliefState& belief, const std::vector<std::size_t>& covered,
                       const TerminalRule& rule, URBG& rng) {
  const auto n = static_cast<NodeId>(net.node_count());
  switch (rule.kind) {
    case TerminalRule::Kind::Fixed:
      if (rule.fixed < 0 || rule.fixed >= n) throw ConfigError("fixed terminal outside the network");
      return rule.fixed;
    case TerminalRule::Kind::Random: return std::uniform_int_distribution<NodeId>(0, n - 1)(rng);
    case TerminalRule::Kind::MaxDemand:
    case TerminalRule::Kind::MaxUncovered: break;
  }
  const PairIndex idx = net.pair_index();
  std::vector<double> score(static_cast<std::size_t>(n), 0.0);
  std::vector<char> done(idx.size(), 0);
  if (rule.kind == TerminalRule::Kind::MaxUncovered)
    for (std::size_t id : covered) done[id] = 1;
  for (std::size_t id = 0; id < idx.size(); ++id) {
    if (done[id]) continue;
    const ODPair p = idx.pair(id);
    const double m = belief.mean_of(id);
    score[p.i] += m;
    score[p.j] += m;
  }
  return static_cast<NodeId>(std::max_element(score.begin(), score.end()) - score.begin());
}

/// Runs the whole design. Without `initial_belief`, pilots are operated first.
template <class URBG>
DesignResult design_system(const Network& net, const DemandTruth& truth, const DesignConfig& cfg, URBG& rng,
                           std::optional<BeliefState> initial_belief = std::nullopt) {
  cfg.validate();
  DesignResult out;
  out.belief = initial_belief ? std::move(*initial_belief) : run_pilots(net, truth, cfg, rng).belief;
  const PairIndex idx = net.pair_index();
  double covered_demand = 0.0;
  int t = 0;
  for (int k = 0; k < cfg.routes; ++k) {
    Route route{{select_terminal(net, out.belief, out.trace.covered_pairs, cfg.terminal_rule, rng)}};
    while (static_cast<int>(route.size()) < cfg.max_route_length) {
      if (adjacent_extensions(net, route).empty()) break;
      ExtensionResult ext = evaluate_extension(net, truth, std::move(out.belief), out.system, route, cfg, rng);
      route = extend_route(std::move(route), ext.options[ext.chosen]);
      out.belief = std::move(ext.belief);

      RouteSystem current = out.system;
      current.routes.push_back(route);
      const auto now = pair_ids(idx, coverage_pairs(current, cfg.max_transfers));
      std::vector<std::size_t> fresh;
      std::set_difference(now.begin(), now.end(), out.trace.covered_pairs.begin(), out.trace.covered_pairs.end(),
                          std::back_inserter(fresh));
      for (std::size_t id : fresh) covered_demand += truth.means[static_cast<Eigen::Index>(id)];
      out.trace.covered_pairs = now;
      out.trace.coverage_history.push_back(covered_demand);

      ExtensionRecord rec;
      rec.t = ++t;
      rec.route_index = k;
      rec.options = std::move(ext.options);
      rec.trial_choices = std::move(ext.trial_choices);
      rec.chosen = ext.chosen;
      rec.correlated_updates = ext.correlated_updates;
      rec.covered_demand = covered_demand;
      out.trace.extensions.push_back(std::move(rec));
    }
    out.system.routes.push_back(std::move(route));
  }
  return out;
}

/// Final covered true demand over total true demand.
inline double coverage_rate(const DesignTrace& trace, const DemandTruth& truth) {
  const double total = truth.total();
  if (!(total > 0.0)) throw std::invalid_argument("coverage rate: total demand is zero");
  return trace.final_coverage() / total;
}

inline nlohmann::json trace_to_json(const DesignTrace& trace, const PairIndex& idx) {
  nlohmann::json j;
  j["coverage_history"] = trace.coverage_history;
  j["covered_pairs"] = nlohmann::json::array();
  for (std::size_t id : trace.covered_pairs) {
    const ODPair p = idx.pair(id);
    j["covered_pairs"].push_back({p.i, p.j});
  }
  j["extensions"] = nlohmann::json::array();
  for (const auto& e : trace.extensions) {
    nlohmann::json r;
    r["t"] = e.t;
    r["route"] = e.route_index;
    nlohmann::json opts = nlohmann::json::array();
    for (const auto& o : e.options) {
      opts.push_back({{"segment", {o.segment.p, o.segment.q}},
                      {"end", o.attach_end == RouteEnd::Back ? "back" : "front"},
                      {"new_node", o.new_node}});
    }
    r["options"] = std::move(opts);
    r["trial_choices"] = e.trial_choices;
    r["chosen"] = e.chosen;
    r["covered_demand"] = e.covered_demand;
    j["extensions"].push_back(std::move(r));
  }
  return j;
}

}  // namespace seqdesign
