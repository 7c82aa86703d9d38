#pragma once

// Experiment configuration files (JSON) and their resolution into runnable
// scenario inputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seqdesign/demand.hpp"
#include "seqdesign/designer.hpp"
#include "seqdesign/network.hpp"

namespace seqdesign {

struct GridSpec {
  int rows = 5;
  int cols = 5;
  double spacing = 1.0;
};

/// Gravity-generated truth means, fixed for the scenario.
struct GravitySpec {
  double production_lo = 1.0, production_hi = 10.0;
  double attraction_lo = 1.0, attraction_hi = 10.0;
  double scale = 100.0;
  std::uint64_t seed = 7;
};

struct ScenarioSpec {
  std::string id;
  std::optional<GridSpec> grid;
  std::string network_file;
  std::optional<GravitySpec> gravity;
  std::string prior_file;  // truth reverse-engineered from these means
  bool prior_informs_belief = true;
  VariationLevel variation = VariationLevel::high();
  std::string cluster_file;
  std::size_t largest_correlated = 0;  // used when no cluster file
  double rho = 0.5;
  DesignConfig design;
};

struct ExperimentConfig {
  std::vector<ScenarioSpec> scenarios;
  int replications = 1;
  std::vector<PolicyKind> policies{PolicyKind::MAB, PolicyKind::KG, PolicyKind::KGCB};
  int cr_samples = 0;
  std::uint64_t master_seed = 1;

  void validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (cr_samples == 1) throw ConfigError("cr_samples must be 0 (disabled) or >= 2");
    if (policies.empty()) throw ConfigError("at least one policy is required");
    if (scenarios.empty()) throw ConfigError("at least one scenario is required");
    for (std::size_t a = 0; a < scenarios.size(); ++a)
      for (std::size_t b = a + 1; b < scenarios.size(); ++b)
        if (scenarios[a].id == scenarios[b].id) throw ConfigError("duplicate scenario id '" + scenarios[a].id + "'");
    for (const auto& s : scenarios) {
      if (!s.grid && s.network_file.empty()) throw ConfigError(s.id + ": no network");
      if (!s.gravity && s.prior_file.empty()) throw ConfigError(s.id + ": no demand source");
      s.variation.validate();
      s.design.validate();
    }
  }
};

namespace detail {

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return std::filesystem::weakly_canonical(path).string();
}

inline VariationLevel parse_variation(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Low") return VariationLevel::low();
    if (s == "Mid" || s == "Middle") return VariationLevel::mid();
    if (s == "High") return VariationLevel::high();
    throw ConfigError("unknown variation level '" + s + "'");
  }
  VariationLevel v;
  v.label = j.value("label", std::string("custom"));
  v.lower = j.at("lower").get<double>();
  v.upper = j.at("upper").get<double>();
  return v;
}

inline DesignConfig parse_design(const nlohmann::json& j) {
  DesignConfig d;
  d.routes = j.value("K", d.routes);
  d.max_route_length = j.value("L", d.max_route_length);
  d.pilots = j.value("P", d.pilots);
  d.min_pilot_length = j.value("L_P", d.min_pilot_length);
  d.pilot_observations = j.value("Q_P", d.pilot_observations);
  d.trials = j.value("M", d.trials);
  d.max_transfers = j.value("max_transfers", d.max_transfers);
  d.terminal_rule = TerminalRule::parse(j.value("terminal_rule", std::string("max_demand")));
  d.obs_noise_std_fraction = j.value("obs_noise_std_fraction", d.obs_noise_std_fraction);
  d.prior_std_fraction = j.value("prior_std_fraction", d.prior_std_fraction);
  return d;
}

inline nlohmann::json design_to_json(const DesignConfig& d) {
  return {{"K", d.routes},
          {"L", d.max_route_length},
          {"P", d.pilots},
          {"L_P", d.min_pilot_length},
          {"Q_P", d.pilot_observations},
          {"M", d.trials},
          {"max_transfers", d.max_transfers},
          {"terminal_rule", d.terminal_rule.str()},
          {"obs_noise_std_fraction", d.obs_noise_std_fraction},
          {"prior_std_fraction", d.prior_std_fraction}};
}

}  // namespace detail

/// Parses a config document; relative paths resolve against `base_dir`.
inline ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    cfg.replications = j.value("replications", cfg.replications);
    cfg.cr_samples = j.value("cr_samples", cfg.cr_samples);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("policies")) {
      cfg.policies.clear();
      for (const auto& p : j["policies"]) cfg.policies.push_back(parse_policy(p.get<std::string>()));
    }
    for (const auto& sj : j.at("scenarios")) {
      ScenarioSpec s;
      s.id = sj.at("id").get<std::string>();
      const auto& net = sj.at("network");
      if (net.contains("grid")) {
        const auto& g = net["grid"];
        s.grid = GridSpec{g.value("rows", 5), g.value("cols", 5), g.value("spacing", 1.0)};
      } else {
        s.network_file = detail::resolve_path(net.at("file").get<std::string>(), base_dir);
      }
      const auto& dem = sj.at("demand");
      if (dem.contains("gravity")) {
        const auto& g = dem["gravity"];
        GravitySpec gs;
        if (g.contains("production")) {
          gs.production_lo = g["production"].at(0).get<double>();
          gs.production_hi = g["production"].at(1).get<double>();
        }
        if (g.contains("attraction")) {
          gs.attraction_lo = g["attraction"].at(0).get<double>();
          gs.attraction_hi = g["attraction"].at(1).get<double>();
        }
        gs.scale = g.value("scale", gs.scale);
        gs.seed = g.value("seed", gs.seed);
        s.gravity = gs;
      } else {
        s.prior_file = detail::resolve_path(dem.at("prior_file").get<std::string>(), base_dir);
        s.prior_informs_belief = dem.value("prior_informs_belief", true);
      }
      if (sj.contains("variation")) s.variation = detail::parse_variation(sj["variation"]);
      if (sj.contains("clusters")) {
        const auto& c = sj["clusters"];
        if (c.contains("file")) {
          s.cluster_file = detail::resolve_path(c["file"].get<std::string>(), base_dir);
        } else {
          s.largest_correlated = c.value("largest", std::size_t{0});
          s.rho = c.value("rho", 0.5);
        }
      }
      s.design = detail::parse_design(sj.value("design", nlohmann::json::object()));
      cfg.scenarios.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment(j, std::filesystem::absolute(path).parent_path());
}

/// Config with absolute paths; loads back to an identical experiment.
inline nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["master_seed"] = cfg.master_seed;
  j["replications"] = cfg.replications;
  j["cr_samples"] = cfg.cr_samples;
  j["policies"] = nlohmann::json::array();
  for (auto p : cfg.policies) j["policies"].push_back(to_string(p));
  j["scenarios"] = nlohmann::json::array();
  for (const auto& s : cfg.scenarios) {
    nlohmann::json sj;
    sj["id"] = s.id;
    if (s.grid) {
      sj["network"] = {{"grid", {{"rows", s.grid->rows}, {"cols", s.grid->cols}, {"spacing", s.grid->spacing}}}};
    } else {
      sj["network"] = {{"file", s.network_file}};
    }
    if (s.gravity) {
      const auto& g = *s.gravity;
      sj["demand"] = {{"gravity",
                       {{"production", {g.production_lo, g.production_hi}},
                        {"attraction", {g.attraction_lo, g.attraction_hi}},
                        {"scale", g.scale},
                        {"seed", g.seed}}}};
    } else {
      sj["demand"] = {{"prior_file", s.prior_file}, {"prior_informs_belief", s.prior_informs_belief}};
    }
    sj["variation"] = {{"label", s.variation.label}, {"lower", s.variation.lower}, {"upper", s.variation.upper}};
    if (!s.cluster_file.empty()) {
      sj["clusters"] = {{"file", s.cluster_file}};
    } else {
      sj["clusters"] = {{"largest", s.largest_correlated}, {"rho", s.rho}};
    }
    sj["design"] = detail::design_to_json(s.design);
    j["scenarios"].push_back(std::move(sj));
  }
  return j;
}

/// Scenario inputs that stay fixed across replications.
struct ScenarioInputs {
  Network network;
  LayoutPtr layout;
  Eigen::VectorXd base_means;  // gravity truth means or prior means
  bool from_prior = false;
};

inline ScenarioInputs resolve_scenario(const ScenarioSpec& s) {
  ScenarioInputs in;
  in.network = s.grid ? build_grid_network(s.grid->rows, s.grid->cols, s.grid->spacing) : load_network(s.network_file);
  const PairIndex idx = in.network.pair_index();
  if (s.gravity) {
    const auto& g = *s.gravity;
    std::mt19937_64 rng(g.seed);
    std::uniform_real_distribution<double> prod(g.production_lo, g.production_hi);
    std::uniform_real_distribution<double> attr(g.attraction_lo, g.attraction_hi);
    std::vector<double> p(in.network.node_count()), a(in.network.node_count());
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = prod(rng);
      a[k] = attr(rng);
    }
    in.base_means = gravity_means(in.network, p, a, g.scale);
  } else {
    in.base_means = load_prior_means(s.prior_file, idx);
    in.from_prior = true;
  }
  ClusterSpec clusters = !s.cluster_file.empty() ? load_clusters(s.cluster_file)
                                                 : largest_pairs_cluster(idx, in.base_means, s.largest_correlated, s.rho);
  in.layout = std::make_shared<const PairLayout>(idx, std::move(clusters));
  return in;
}

}  // namespace seqdesign
