#pragma once

// Ground-truth OD demand: gravity means, constant-correlation covariance,
// synthesis from priors, and noisy flow sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seqdesign/normal.hpp"
#include "seqdesign/network.hpp"

namespace seqdesign {

using Rng = std::mt19937_64;

class DemandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Cluster {
  std::string name;
  std::vector<ODPair> pairs;
  double rho = 0.5;
};

/// Disjoint groups of correlated pairs; all other pairs are independent.
struct ClusterSpec {
  std::vector<Cluster> clusters;
};

/// Splits the pair universe into a correlated block (cluster order) and an
/// independent block (ascending pair id).
class PairLayout {
 public:
  struct Slot {
    bool correlated = false;
    std::size_t pos = 0;
  };

  PairLayout(PairIndex index, ClusterSpec spec) : index_(index), spec_(std::move(spec)) {
    slots_.assign(index_.size(), Slot{});
    std::vector<char> taken(index_.size(), 0);
    for (const auto& c : spec_.clusters) {
      if (!(c.rho > 0.0 && c.rho < 1.0)) {
        throw DemandError("cluster '" + c.name + "': correlation must lie in (0,1)");
      }
      for (const auto& pr : c.pairs) {
        if (pr.i == pr.j || pr.i < 0 || static_cast<std::size_t>(pr.j) >= index_.node_count()) {
          throw DemandError("cluster '" + c.name + "': invalid pair (" + std::to_string(pr.i) + "," +
                            std::to_string(pr.j) + ")");
        }
        const std::size_t id = index_.id(pr);
        if (taken[id]) throw DemandError("clusters are not disjoint at pair (" + std::to_string(pr.i) + "," +
                                         std::to_string(pr.j) + ")");
        taken[id] = 1;
        slots_[id] = {true, correlated_.size()};
        correlated_.push_back(id);
      }
    }
    for (std::size_t id = 0; id < index_.size(); ++id) {
      if (!taken[id]) {
        slots_[id] = {false, independent_.size()};
        independent_.push_back(id);
      }
    }
  }

  const PairIndex& index() const { return index_; }
  const ClusterSpec& clusters() const { return spec_; }
  std::size_t pair_count() const { return index_.size(); }
  const std::vector<std::size_t>& correlated() const { return correlated_; }
  const std::vector<std::size_t>& independent() const { return independent_; }
  Slot slot(std::size_t pair_id) const { return slots_.at(pair_id); }

 private:
  PairIndex index_;
  ClusterSpec spec_;
  std::vector<std::size_t> correlated_;
  std::vector<std::size_t> independent_;
  std::vector<Slot> slots_;
};

using LayoutPtr = std::shared_ptr<const PairLayout>;

struct VariationLevel {
  std::string label;
  double lower = 0.05;
  double upper = 0.19;

  void validate() const {
    if (!(lower > 0.0 && lower <= upper && upper < 1.0)) {
      throw DemandError("variation level '" + label + "' needs 0 < lower <= upper < 1");
    }
  }

  static VariationLevel low() { return {"Low", 0.05, 0.05}; }
  static VariationLevel mid() { return {"Mid", 0.05, 0.12}; }
  static VariationLevel high() { return {"High", 0.05, 0.19}; }
};

/// Truth over every pair: means and stds indexed by pair id, covariance over
/// the layout's correlated block.
struct DemandTruth {
  LayoutPtr layout;
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  Eigen::MatrixXd covariance;

  double total() const { return means.sum(); }
};

/// Observed flows for a set of pairs; pairs not listed have indicator 0.
struct ObservationBatch {
  std::vector<std::size_t> pairs;  // ascending pair ids
  std::vector<double> values;

  bool empty() const { return pairs.empty(); }
  bool observed(std::size_t id) const { return std::binary_search(pairs.begin(), pairs.end(), id); }
};

inline Eigen::VectorXd gravity_means(const Network& net, const std::vector<double>& production,
                                     const std::vector<double>& attraction, double scale) {
  const std::size_t n = net.node_count();
  if (production.size() != n || attraction.size() != n) {
    throw DemandError("production/attraction constants must cover every node");
  }
  if (!(scale > 0.0)) throw DemandError("gravity scale must be positive");
  for (std::size_t k = 0; k < n; ++k) {
    if (!(production[k] > 0.0) || !(attraction[k] > 0.0)) {
      throw DemandError("production/attraction constants must be positive");
    }
  }
  const PairIndex idx = net.pair_index();
  Eigen::VectorXd out(idx.size());
  for (std::size_t id = 0; id < idx.size(); ++id) {
    const ODPair pr = idx.pair(id);
    const Node& a = net.node(pr.i);
    const Node& b = net.node(pr.j);
    const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
    if (d2 == 0.0) {
      throw DemandError("coincident coordinates for nodes " + std::to_string(pr.i) + " and " +
                        std::to_string(pr.j));
    }
    out[id] = scale * (production[pr.i] * attraction[pr.j] + production[pr.j] * attraction[pr.i]) / d2;
  }
  return out;
}

/// Block-constant correlation: 1 on the diagonal, rho within a cluster,
/// 0 across clusters. Rows follow cluster order.
inline Eigen::MatrixXd constant_correlation_matrix(const ClusterSpec& spec) {
  std::size_t dim = 0;
  for (const auto& c : spec.clusters) {
    if (!(c.rho > 0.0 && c.rho < 1.0)) throw DemandError("correlation must lie in (0,1)");
    dim += c.pairs.size();
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim, dim);
  std::size_t off = 0;
  for (const auto& c : spec.clusters) {
    const auto m = static_cast<Eigen::Index>(c.pairs.size());
    b.block(off, off, m, m).setConstant(c.rho);
    off += c.pairs.size();
  }
  b.diagonal().setOnes();
  return b;
}

/// H B H with H = diag(stds).
inline Eigen::MatrixXd truth_covariance(const Eigen::VectorXd& stds, const Eigen::MatrixXd& b) {
  if (b.rows() != b.cols() || b.rows() != stds.size()) {
    throw DemandError("covariance synthesis: dimension mismatch");
  }
  if ((stds.array() < 0.0).any()) throw DemandError("standard deviations must be non-negative");
  Eigen::MatrixXd s = stds.asDiagonal() * b * stds.asDiagonal();
  return 0.5 * (s + s.transpose());
}

/// Assembles a truth from per-pair means and stds.
inline DemandTruth make_truth(LayoutPtr layout, Eigen::VectorXd means, Eigen::VectorXd stds) {
  if (means.size() != static_cast<Eigen::Index>(layout->pair_count()) || stds.size() != means.size()) {
    throw DemandError("truth vectors must cover every pair");
  }
  if ((means.array() < 0.0).any()) throw DemandError("true means must be non-negative");
  const auto& corr = layout->correlated();
  Eigen::VectorXd corr_std(corr.size());
  for (std::size_t k = 0; k < corr.size(); ++k) corr_std[k] = stds[corr[k]];
  DemandTruth t;
  t.covariance = truth_covariance(corr_std, constant_correlation_matrix(layout->clusters()));
  t.layout = std::move(layout);
  t.means = std::move(means);
  t.stds = std::move(stds);
  return t;
}

/// Draws sigma ~ U[lower, upper] * mean per pair, keeping the given means.
template <class URBG>
Eigen::VectorXd draw_stds(const Eigen::VectorXd& means, const VariationLevel& level, URBG& rng) {
  level.validate();
  std::uniform_real_distribution<double> u(level.lower, level.upper);
  Eigen::VectorXd s(means.size());
  for (Eigen::Index k = 0; k < means.size(); ++k) {
    const double frac = level.lower == level.upper ? level.lower : u(rng);
    s[k] = frac * means[k];
  }
  return s;
}

/// Truth with fixed means and randomly drawn dispersion.
template <class URBG>
DemandTruth synthesize_truth_with_means(LayoutPtr layout, const Eigen::VectorXd& means,
                                        const VariationLevel& level, URBG& rng) {
  return make_truth(std::move(layout), means, draw_stds(means, level, rng));
}

/// Reverse-engineers a truth from prior means: sigma from the level's range,
/// true mean ~ N(prior, sigma^2) by inverse-CDF sampling, truncated at 0.
template <class URBG>
DemandTruth synthesize_truth_from_prior(LayoutPtr layout, const Eigen::VectorXd& prior_means,
                                        const VariationLevel& level, URBG& rng) {
  if ((prior_means.array() < 0.0).any()) throw DemandError("prior means must be non-negative");
  Eigen::VectorXd stds = draw_stds(prior_means, level, rng);
  Eigen::VectorXd means(prior_means.size());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Eigen::Index k = 0; k < prior_means.size(); ++k) {
    double p = u01(rng);
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    const double z = inverse_normal_cdf(p);
    means[k] = std::max(0.0, prior_means[k] + stds[k] * z);
  }
  return make_truth(std::move(layout), std::move(means), std::move(stds));
}

/// One draw from N(means, covariance) restricted to `pairs`, truncated at 0.
template <class URBG>
ObservationBatch sample_flows(const DemandTruth& truth, std::vector<std::size_t> pairs, URBG& rng) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  const PairLayout& layout = *truth.layout;
  ObservationBatch batch;
  batch.pairs = pairs;
  batch.values.assign(pairs.size(), 0.0);
  if (pairs.empty()) return batch;

  std::vector<std::size_t> corr_at;  // index into `pairs`
  std::vector<Eigen::Index> corr_pos;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k] >= layout.pair_count()) throw DemandError("sampled pair outside the truth index");
    const auto s = layout.slot(pairs[k]);
    if (s.correlated) {
      corr_at.push_back(k);
      corr_pos.push_back(static_cast<Eigen::Index>(s.pos));
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  if (!corr_at.empty()) {
    const auto m = static_cast<Eigen::Index>(corr_at.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = truth.covariance(corr_pos[a], corr_pos[b]);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
    const double tol = 1e-10 * std::max(1.0, sub.diagonal().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -tol).any()) {
      throw DemandError("truth covariance sub-block is not positive semidefinite");
    }
    Eigen::VectorXd z(m);
    for (Eigen::Index a = 0; a < m; ++a) z[a] = normal(rng);
    const Eigen::VectorXd scaled = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
    const Eigen::VectorXd lz = ldlt.matrixL() * scaled;
    const Eigen::VectorXd dev = ldlt.transpositionsP().transpose() * lz;
    for (Eigen::Index a = 0; a < m; ++a) {
      const std::size_t k = corr_at[a];
      batch.values[k] = std::max(0.0, truth.means[pairs[k]] + dev[a]);
    }
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (layout.slot(pairs[k]).correlated) continue;
    const double sd = truth.stds[pairs[k]];
    const double draw = normal(rng);
    batch.values[k] = std::max(0.0, truth.means[pairs[k]] + sd * draw);
  }
  return batch;
}

/// One cluster made of the `count` largest-mean pairs (ties to lower id).
inline ClusterSpec largest_pairs_cluster(const PairIndex& idx, const Eigen::VectorXd& means, std::size_t count,
                                         double rho) {
  std::vector<std::size_t> ids(idx.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  ids.resize(std::min(count, ids.size()));
  std::sort(ids.begin(), ids.end());
  Cluster c{"largest", {}, rho};
  for (std::size_t id : ids) c.pairs.push_back(idx.pair(id));
  ClusterSpec spec;
  if (!c.pairs.empty()) spec.clusters.push_back(std::move(c));
  return spec;
}

inline ClusterSpec parse_clusters(const nlohmann::json& doc) {
  ClusterSpec spec;
  if (!doc.contains("clusters") || !doc["clusters"].is_array()) throw DemandError("missing 'clusters' array");
  for (const auto& rec : doc["clusters"]) {
    Cluster c;
    c.name = rec.value("name", std::string("cluster") + std::to_string(spec.clusters.size()));
    c.rho = rec.value("rho", 0.5);
    for (const auto& p : rec.at("pairs")) c.pairs.emplace_back(p.at(0).get<NodeId>(), p.at(1).get<NodeId>());
    spec.clusters.push_back(std::move(c));
  }
  return spec;
}

inline ClusterSpec load_clusters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DemandError("cannot open cluster file: " + path);
  try {
    return parse_clusters(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DemandError(path + ": " + e.what());
  }
}

/// Reads prior means from JSON `{"flows": [[i, j, mean], ...]}` or CSV
/// `i,j,mean` lines (optional header). Unlisted pairs get 0.
inline Eigen::VectorXd load_prior_means(const std::string& path, const PairIndex& idx) {
  std::ifstream in(path);
  if (!in) throw DemandError("cannot open prior file: " + path);
  Eigen::VectorXd means = Eigen::VectorXd::Zero(idx.size());
  auto put = [&](long i, long j, double m, std::size_t rec) {
    if (i == j || i < 0 || j < 0 || static_cast<std::size_t>(std::max(i, j)) >= idx.node_count()) {
      throw DemandError(path + ": record " + std::to_string(rec) + ": invalid pair");
    }
    if (!(m >= 0.0)) throw DemandError(path + ": record " + std::to_string(rec) + ": negative mean");
    means[idx.id(ODPair(static_cast<NodeId>(i), static_cast<NodeId>(j)))] = m;
  };
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DemandError(path + ": " + e.what());
    }
    std::size_t rec = 0;
    for (const auto& f : doc.at("flows")) {
      put(f.at(0).get<long>(), f.at(1).get<long>(), f.at(2).get<double>(), rec++);
    }
    return means;
  }
  std::string line;
  std::size_t rec = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long i = 0, j = 0;
    double m = 0.0;
    if (!(ss >> i >> j >> m)) {
      if (rec == 0) {  // header
        ++rec;
        continue;
      }
      throw DemandError(path + ": record " + std::to_string(rec) + ": expected i,j,mean");
    }
    put(i, j, m, rec++);
  }
  return means;
}

}  // namespace seqdesign
