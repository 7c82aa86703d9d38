#pragma once

// The operator's Gaussian beliefs about OD demand and their updates.
//
// Correlated pairs carry a joint mean/covariance; independent pairs carry a
// mean and a precision each. Observations have per-flow noise variance
// obs_noise_var (precision beta^W = 1 / obs_noise_var).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seqdesign/demand.hpp"

namespace seqdesign {

class BeliefError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BeliefState {
  LayoutPtr layout;
  Eigen::VectorXd corr_mean;
  Eigen::MatrixXd corr_cov;
  Eigen::VectorXd indep_mean;
  Eigen::VectorXd indep_precision;
  double obs_noise_var = 1.0;

  double mean_of(std::size_t pair_id) const {
    const auto s = layout->slot(pair_id);
    return s.correlated ? corr_mean[s.pos] : indep_mean[s.pos];
  }

  double variance_of(std::size_t pair_id) const {
    const auto s = layout->slot(pair_id);
    return s.correlated ? corr_cov(s.pos, s.pos) : 1.0 / indep_precision[s.pos];
  }

  /// Belief means scattered back to pair-id order.
  Eigen::VectorXd all_means() const {
    Eigen::VectorXd out(layout->pair_count());
    const auto& c = layout->correlated();
    const auto& u = layout->independent();
    for (std::size_t k = 0; k < c.size(); ++k) out[c[k]] = corr_mean[k];
    for (std::size_t k = 0; k < u.size(); ++k) out[u[k]] = indep_mean[k];
    return out;
  }
};

/// Beliefs aggregated from pairs to the options of one extension.
struct OptionBeliefs {
  Eigen::VectorXd means;
  Eigen::MatrixXd cov;
  std::vector<std::vector<std::size_t>> coverage_sets;

  std::size_t size() const { return static_cast<std::size_t>(means.size()); }
};

struct PilotPriorOptions {
  /// sigma_eps = fraction * global mean of observed flows.
  double obs_noise_std_fraction = 0.05;
  /// Means for pairs the pilots never observed (pair-id order); zeros when absent.
  std::optional<Eigen::VectorXd> external_means;
  /// Prior std of an external mean, as a fraction of it.
  double external_std_fraction = 0.05;
};

namespace detail {

/// Clamps eigenvalues of a symmetric matrix from below.
inline Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& m, double floor) {
  if (m.rows() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw BeliefError("eigen-decomposition failed during PSD projection");
  if (es.eigenvalues().minCoeff() >= floor) return m;
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// Builds the initial belief from pilot batches.
///
/// Observed pairs get their sample mean and unbiased sample (co)variance over
/// the batches in which they were (jointly) observed; fewer than two joint
/// observations leave a covariance entry at 0. Zero diagonal entries are
/// floored at (0.01 * global mean of observed flows)^2 and the correlated block
/// is projected to PSD by clipping eigenvalues at the same floor.
inline BeliefState init_from_pilots(LayoutPtr layout, std::span<const ObservationBatch> batches,
                                    const PilotPriorOptions& opts = {}) {
  if (batches.empty() && !opts.external_means) throw BeliefError("pilot prior needs at least one batch");
  const std::size_t npairs = layout->pair_count();
  const auto nb = static_cast<Eigen::Index>(batches.size());

  double total = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    for (double v : b.values) total += v;
    count += b.values.size();
  }
  double global_mean = count ? total / static_cast<double>(count) : 0.0;
  if (count == 0 && opts.external_means) global_mean = opts.external_means->mean();
  double floor_std = 0.01 * global_mean;
  if (!(floor_std > 0.0)) floor_std = 1.0;
  const double floor_var = floor_std * floor_std;

  auto fill_from = [&](const std::vector<std::size_t>& ids, Eigen::VectorXd& mean, Eigen::MatrixXd& cov,
                       bool full_cov, std::vector<char>& seen) {
    const auto n = static_cast<Eigen::Index>(ids.size());
    std::vector<Eigen::Index> pos_of(npairs, -1);
    for (Eigen::Index k = 0; k < n; ++k) pos_of[ids[k]] = k;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(nb, n);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nb, n);
    for (Eigen::Index b = 0; b < nb; ++b) {
      const auto& batch = batches[b];
      for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
        const Eigen::Index p = pos_of[batch.pairs[k]];
        if (p < 0) continue;
        x(b, p) = batch.values[k];
        m(b, p) = 1.0;
      }
    }
    const Eigen::VectorXd cnt = m.colwise().sum().transpose();
    mean = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (cnt[k] > 0) mean[k] = x.col(k).sum() / cnt[k];
    }
    if (full_cov) {
      const Eigen::MatrixXd joint = m.transpose() * m;   // co-observation counts
      const Eigen::MatrixXd sum_xm = x.transpose() * m;  // sum of x_a where both observed
      const Eigen::MatrixXd sum_xx = x.transpose() * x;
      cov = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index c = a; c < n; ++c) {
          const double nj = joint(a, c);
          if (nj < 2) continue;
          const double v = (sum_xx(a, c) - sum_xm(a, c) * sum_xm(c, a) / nj) / (nj - 1.0);
          cov(a, c) = cov(c, a) = v;
        }
      }
    } else {
      cov = Eigen::MatrixXd::Zero(n, 1);
      for (Eigen::Index k = 0; k < n; ++k) {
        if (cnt[k] < 2) continue;
        const double mu = mean[k];
        double ss = 0.0;
        for (Eigen::Index b = 0; b < nb; ++b)
          if (m(b, k) > 0) ss += (x(b, k) - mu) * (x(b, k) - mu);
        cov(k, 0) = ss / (cnt[k] - 1.0);
      }
    }
    seen.assign(ids.size(), 0);
    for (Eigen::Index k = 0; k < n; ++k) seen[k] = cnt[k] > 0;
  };

  auto external_var = [&](std::size_t pair_id) {
    const double sd = opts.external_std_fraction * (*opts.external_means)[pair_id];
    return std::max(sd * sd, floor_var);
  };

  BeliefState st;
  st.layout = layout;
  const double noise_sd = opts.obs_noise_std_fraction * global_mean;
  st.obs_noise_var = noise_sd > 0.0 ? noise_sd * noise_sd : floor_var;

  std::vector<char> seen;
  fill_from(layout->correlated(), st.corr_mean, st.corr_cov, true, seen);
  for (Eigen::Index k = 0; k < st.corr_cov.rows(); ++k) {
    if (!seen[k] && opts.external_means) {
      const std::size_t id = layout->correlated()[k];
      st.corr_mean[k] = (*opts.external_means)[id];
      st.corr_cov(k, k) = external_var(id);
    } else if (st.corr_cov(k, k) <= 0.0) {
      st.corr_cov(k, k) = floor_var;
    }
  }
  st.corr_cov = detail::clip_eigenvalues(st.corr_cov, floor_var);

  Eigen::MatrixXd var;
  fill_from(layout->independent(), st.indep_mean, var, false, seen);
  st.indep_precision.resize(st.indep_mean.size());
  for (Eigen::Index k = 0; k < st.indep_mean.size(); ++k) {
    double v = var(k, 0);
    if (!seen[k] && opts.external_means) {
      const std::size_t id = layout->independent()[k];
      st.indep_mean[k] = (*opts.external_means)[id];
      v = external_var(id);
    }
    st.indep_precision[k] = 1.0 / std::max(v, floor_var);
  }
  return st;
}

/// theta <- (beta theta + beta^W W) / (beta + beta^W), beta <- beta + beta^W,
/// for each observed independent pair.
inline BeliefState update_independent(BeliefState st, const ObservationBatch& batch) {
  const double beta_w = 1.0 / st.obs_noise_var;
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const auto s = st.layout->slot(batch.pairs[k]);
    if (s.correlated) continue;
    double& theta = st.indep_mean[s.pos];
    double& beta = st.indep_precision[s.pos];
    theta = (beta * theta + beta_w * batch.values[k]) / (beta + beta_w);
    beta += beta_w;
  }
  return st;
}

/// Gaussian update of the correlated block from a partial observation.
///
/// Equivalent to Sigma' = (Omega + Sigma^-1)^-1 and
/// theta' = Sigma' (Omega W + Sigma^-1 theta) with Omega = Diag(omega / sigma_eps^2),
/// evaluated in gain form so Sigma itself is never inverted:
///   A = Sigma_SS + sigma_eps^2 I = L L^T,  V = L^-1 Sigma_S.,
///   Sigma' = Sigma - V^T V,  theta' = theta + V^T L^-1 (W_S - theta_S).
inline BeliefState update_correlated_partial(BeliefState st, const ObservationBatch& batch) {
  std::vector<Eigen::Index> obs_pos;
  std::vector<double> obs_val;
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const auto s = st.layout->slot(batch.pairs[k]);
    if (!s.correlated) continue;
    obs_pos.push_back(static_cast<Eigen::Index>(s.pos));
    obs_val.push_back(batch.values[k]);
  }
  if (obs_pos.empty()) return st;
  const auto m = static_cast<Eigen::Index>(obs_pos.size());
  const Eigen::Index n = st.corr_cov.rows();

  Eigen::MatrixXd rows(m, n);  // Sigma_S.
  for (Eigen::Index a = 0; a < m; ++a) rows.row(a) = st.corr_cov.row(obs_pos[a]);
  Eigen::MatrixXd gain(m, m);
  for (Eigen::Index a = 0; a < m; ++a) gain.col(a) = rows.col(obs_pos[a]);
  gain.diagonal().array() += st.obs_noise_var;

  Eigen::LLT<Eigen::MatrixXd> llt(gain);
  if (llt.info() != Eigen::Success) {
    gain.diagonal().array() += 1e-9 * gain.trace() / static_cast<double>(m);
    llt.compute(gain);
    if (llt.info() != Eigen::Success) throw BeliefError("correlated update: innovation covariance is singular");
  }
  Eigen::VectorXd resid(m);
  for (Eigen::Index a = 0; a < m; ++a) resid[a] = obs_val[a] - st.corr_mean[obs_pos[a]];

  const auto lower = llt.matrixL();
  lower.solveInPlace(rows);  // rows <- V
  lower.solveInPlace(resid);
  st.corr_mean.noalias() += rows.transpose() * resid;
  st.corr_cov.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose(), -1.0);
  st.corr_cov.triangularView<Eigen::StrictlyUpper>() = st.corr_cov.transpose();
  return st;
}

/// Routes a batch to both blocks.
inline BeliefState update_belief(BeliefState st, const ObservationBatch& batch) {
  return update_correlated_partial(update_independent(std::move(st), batch), batch);
}

/// Option means are sums of pair means over each coverage set; option
/// covariances sum pair covariances over the product of two coverage sets (independent pairs contribute 1/beta on
/// the diagonal only).
inline OptionBeliefs aggregate_option_beliefs(const BeliefState& st,
                                              std::vector<std::vector<std::size_t>> coverage_sets) {
  std::vector<std::size_t> uni;
  for (const auto& d : coverage_sets) uni.insert(uni.end(), d.begin(), d.end());
  std::sort(uni.begin(), uni.end());
  uni.erase(std::unique(uni.begin(), uni.end()), uni.end());
  const auto u = static_cast<Eigen::Index>(uni.size());
  const auto q = static_cast<Eigen::Index>(coverage_sets.size());

  Eigen::VectorXd pair_mean(u);
  std::vector<PairLayout::Slot> slots(u);
  for (Eigen::Index k = 0; k < u; ++k) {
    slots[k] = st.layout->slot(uni[k]);
    pair_mean[k] = slots[k].correlated ? st.corr_mean[slots[k].pos] : st.indep_mean[slots[k].pos];
  }
  Eigen::MatrixXd pair_cov = Eigen::MatrixXd::Zero(u, u);
  for (Eigen::Index a = 0; a < u; ++a) {
    if (!slots[a].correlated) {
      pair_cov(a, a) = 1.0 / st.indep_precision[slots[a].pos];
      continue;
    }
    for (Eigen::Index b = a; b < u; ++b) {
      if (!slots[b].correlated) continue;
      pair_cov(a, b) = pair_cov(b, a) = st.corr_cov(slots[a].pos, slots[b].pos);
    }
  }
  Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(q, u);
  for (Eigen::Index r = 0; r < q; ++r) {
    for (std::size_t id : coverage_sets[r]) {
      const auto it = std::lower_bound(uni.begin(), uni.end(), id);
      incidence(r, it - uni.begin()) = 1.0;
    }
  }
  OptionBeliefs ob;
  ob.means = incidence * pair_mean;
  ob.cov = incidence * pair_cov * incidence.transpose();
  ob.cov = 0.5 * (ob.cov + ob.cov.transpose());
  ob.coverage_sets = std::move(coverage_sets);
  return ob;
}

/// Observation variance per option: per-flow noise summed over its coverage set.
inline Eigen::VectorXd option_observation_variance(const BeliefState& st, const OptionBeliefs& ob) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(ob.size()));
  for (std::size_t k = 0; k < ob.size(); ++k) {
    v[static_cast<Eigen::Index>(k)] = st.obs_noise_var * static_cast<double>(ob.coverage_sets[k].size());
  }
  return v;
}

/// Snapshot: pairs as [i, j], covariance dense row-major.
inline nlohmann::json belief_to_json(const BeliefState& st) {
  const PairIndex& idx = st.layout->index();
  nlohmann::json j;
  auto pairs = [&](const std::vector<std::size_t>& ids) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t id : ids) {
      const ODPair p = idx.pair(id);
      a.push_back({p.i, p.j});
    }
    return a;
  };
  j["node_count"] = idx.node_count();
  j["correlated_pairs"] = pairs(st.layout->correlated());
  j["correlated_mean"] = std::vector<double>(st.corr_mean.data(), st.corr_mean.data() + st.corr_mean.size());
  std::vector<double> cov;
  cov.reserve(static_cast<std::size_t>(st.corr_cov.size()));
  for (Eigen::Index r = 0; r < st.corr_cov.rows(); ++r)
    for (Eigen::Index c = 0; c < st.corr_cov.cols(); ++c) cov.push_back(st.corr_cov(r, c));
  j["correlated_cov"] = std::move(cov);
  j["independent_pairs"] = pairs(st.layout->independent());
  j["independent_mean"] =
      std::vector<double>(st.indep_mean.data(), st.indep_mean.data() + st.indep_mean.size());
  j["independent_precision"] =
      std::vector<double>(st.indep_precision.data(), st.indep_precision.data() + st.indep_precision.size());
  j["obs_noise_var"] = st.obs_noise_var;
  return j;
}

/// Restores a snapshot against a layout whose blocks list the same pairs.
inline BeliefState belief_from_json(const nlohmann::json& j, LayoutPtr layout) {
  const PairIndex& idx = layout->index();
  auto check_pairs = [&](const nlohmann::json& a, const std::vector<std::size_t>& ids, const char* what) {
    if (a.size() != ids.size()) throw BeliefError(std::string("snapshot ") + what + " size mismatch");
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (idx.id(ODPair(a[k].at(0).get<NodeId>(), a[k].at(1).get<NodeId>())) != ids[k]) {
        throw BeliefError(std::string("snapshot ") + what + " do not match the layout");
      }
    }
  };
  check_pairs(j.at("correlated_pairs"), layout->correlated(), "correlated pairs");
  check_pairs(j.at("independent_pairs"), layout->independent(), "independent pairs");
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  BeliefState st;
  st.layout = layout;
  st.corr_mean = vec(j.at("correlated_mean"));
  const auto n = st.corr_mean.size();
  const auto flat = j.at("correlated_cov").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != n * n) throw BeliefError("snapshot covariance size mismatch");
  st.corr_cov.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) st.corr_cov(r, c) = flat[static_cast<std::size_t>(r * n + c)];
  st.indep_mean = vec(j.at("independent_mean"));
  st.indep_precision = vec(j.at("independent_precision"));
  st.obs_noise_var = j.at("obs_noise_var").get<double>();
  if (!(st.obs_noise_var > 0.0) || (st.indep_precision.array() <= 0.0).any()) {
    throw BeliefError("snapshot variances must be positive");
  }
  return st;
}

}  // namespace seqdesign
