#pragma once

// Option valuation under Greedy, UCB bandit, knowledge gradient (KG) and
// knowledge gradient with correlated beliefs (KGCB).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqdesign/belief.hpp"
#include "seqdesign/normal.hpp"

namespace seqdesign {

enum class PolicyKind { Greedy, MAB, KG, KGCB };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::MAB: return "mab";
    case PolicyKind::KG: return "kg";
    case PolicyKind::KGCB: return "kgcb";
  }
  return "?";
}

inline PolicyKind parse_policy(const std::string& s) {
  if (s == "greedy") return PolicyKind::Greedy;
  if (s == "mab") return PolicyKind::MAB;
  if (s == "kg") return PolicyKind::KG;
  if (s == "kgcb") return PolicyKind::KGCB;
  throw std::invalid_argument("unknown policy '" + s + "' (expected greedy|mab|kg|kgcb)");
}

/// Trial counters for one extension's evaluation; reset every extension.
struct MabState {
  int kappa = 0;
  std::vector<int> counts;

  explicit MabState(std::size_t options = 0) : counts(options, 0) {}

  void record(std::size_t option) {
    ++counts.at(option);
    ++kappa;
  }

  /// First option not yet sampled, if any (forced initialization).
  std::optional<std::size_t> unsampled() const {
    for (std::size_t k = 0; k < counts.size(); ++k)
      if (counts[k] == 0) return k;
    return std::nullopt;
  }
};

inline double ucb_bonus(int kappa, int n) {
  if (kappa < 1 || n < 1) throw std::invalid_argument("UCB bonus needs kappa >= 1 and n >= 1");
  return std::sqrt(2.0 * std::log(static_cast<double>(kappa)) / static_cast<double>(n));
}

inline double value_mab(const OptionBeliefs& ob, const MabState& mab, std::size_t option) {
  return ob.means[static_cast<Eigen::Index>(option)] + ucb_bonus(mab.kappa, mab.counts.at(option));
}

/// Independent-belief knowledge gradient; off-diagonal covariance ignored.
inline double value_kg(const OptionBeliefs& ob, const Eigen::VectorXd& obs_var, std::size_t option) {
  const auto a = static_cast<Eigen::Index>(option);
  if (ob.size() < 2) return 0.0;
  const double var = ob.cov(a, a);
  if (!(var > 0.0)) return 0.0;
  const double reduced = var / (1.0 + obs_var[a] / var);
  const double sigma_tilde = std::sqrt(reduced);
  double best_other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < ob.means.size(); ++k)
    if (k != a) best_other = std::max(best_other, ob.means[k]);
  const double zeta = -std::abs((ob.means[a] - best_other) / sigma_tilde);
  return sigma_tilde * standard_normal_f(zeta);
}

/// Upper envelope of lines intercept_i + slope_i * z over the real line.
struct Envelope {
  std::vector<std::size_t> surviving_indices;  // ordered by increasing slope
  std::vector<double> slopes;
  std::vector<double> intersections;  // breakpoints between consecutive survivors

  double intercept_of(std::span<const double> intercepts, std::size_t j) const {
    return intercepts[surviving_indices[j]];
  }
};

/// Sort-and-eliminate construction. Lines of equal slope keep only the
/// largest intercept (lowest index on exact ties).
inline Envelope upper_envelope(std::span<const double> intercepts, std::span<const double> slopes) {
  if (intercepts.size() != slopes.size()) throw std::invalid_argument("envelope: size mismatch");
  std::vector<std::size_t> order(intercepts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (slopes[x] != slopes[y]) return slopes[x] < slopes[y];
    if (intercepts[x] != intercepts[y]) return intercepts[x] < intercepts[y];
    return x > y;
  });
  std::vector<std::size_t> lines;  // last of each equal-slope run
  for (std::size_t k = 0; k < order.size(); ++k) {
    const bool next_same = k + 1 < order.size() && slopes[order[k + 1]] == slopes[order[k]];
    if (!next_same) lines.push_back(order[k]);
  }

  Envelope env;
  for (std::size_t l : lines) {
    double c = 0.0;
    while (!env.surviving_indices.empty()) {
      const std::size_t top = env.surviving_indices.back();
      c = (intercepts[top] - intercepts[l]) / (slopes[l] - slopes[top]);
      if (!env.intersections.empty() && c <= env.intersections.back()) {
        env.surviving_indices.pop_back();
        env.slopes.pop_back();
        env.intersections.pop_back();
        continue;
      }
      break;
    }
    if (!env.surviving_indices.empty()) env.intersections.push_back(c);
    env.surviving_indices.push_back(l);
    env.slopes.push_back(slopes[l]);
  }
  return env;
}

/// E[max_i (a_i + b_i Z)] - max_i a_i for Z ~ N(0,1), via the envelope
/// breakpoints: sum_j (b_{j+1} - b_j) f(-|c_j|).
inline double expected_max_gain(std::span<const double> intercepts, std::span<const double> slopes) {
  const Envelope env = upper_envelope(intercepts, slopes);
  double v = 0.0;
  for (std::size_t j = 0; j + 1 < env.slopes.size(); ++j) {
    v += (env.slopes[j + 1] - env.slopes[j]) * standard_normal_f(-std::abs(env.intersections[j]));
  }
  return v;
}

/// Slopes Sigma e_a / sqrt(Sigma_aa + obs_var_a): change in each option mean per
/// unit standardized outcome of measuring option a.
inline Eigen::VectorXd kgcb_slopes(const Eigen::MatrixXd& cov, const Eigen::VectorXd& obs_var, Eigen::Index a) {
  const double denom = cov(a, a) + obs_var[a];
  if (!(denom > 0.0)) return Eigen::VectorXd::Zero(cov.rows());
  return cov.col(a) / std::sqrt(denom);
}

inline Eigen::VectorXd value_kgcb(const OptionBeliefs& ob, const Eigen::VectorXd& obs_var) {
  const Eigen::MatrixXd& cov = ob.cov;
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("KGCB: option covariance is not symmetric");
  }
  const Eigen::Index n = ob.means.size();
  Eigen::VectorXd out(n);
  const std::span<const double> mu(ob.means.data(), static_cast<std::size_t>(n));
  for (Eigen::Index a = 0; a < n; ++a) {
    const Eigen::VectorXd s = kgcb_slopes(cov, obs_var, a);
    out[a] = expected_max_gain(mu, std::span<const double>(s.data(), static_cast<std::size_t>(n)));
  }
  return out;
}

/// Argmax, ties to the lowest index.
inline std::size_t choose_option(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("choose_option: empty option set");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

inline std::size_t choose_option(const Eigen::VectorXd& values) {
  return choose_option(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Values for trial selection. MAB expects every option sampled at least once.
inline Eigen::VectorXd policy_values(PolicyKind kind, const OptionBeliefs& ob, const Eigen::VectorXd& obs_var,
                                     const MabState& mab) {
  const Eigen::Index n = ob.means.size();
  switch (kind) {
    case PolicyKind::Greedy: return ob.means;
    case PolicyKind::KGCB: return value_kgcb(ob, obs_var);
    case PolicyKind::KG: {
      Eigen::VectorXd v(n);
      for (Eigen::Index k = 0; k < n; ++k) v[k] = value_kg(ob, obs_var, static_cast<std::size_t>(k));
      return v;
    }
    case PolicyKind::MAB: {
      Eigen::VectorXd v(n);
      for (Eigen::Index k = 0; k < n; ++k) v[k] = value_mab(ob, mab, static_cast<std::size_t>(k));
      return v;
    }
  }
  return ob.means;
}

}  // namespace seqdesign
