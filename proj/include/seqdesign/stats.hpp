#pragma once

// Comparison statistics and the Weibull-fitted reference policy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "seqdesign/demand.hpp"
#include "seqdesign/designer.hpp"
#include "seqdesign/network.hpp"

namespace seqdesign {

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

inline double sample_mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Welch's unequal-variance t-test, two-tailed.
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("Welch t-test needs two samples of size >= 2");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = sample_mean(a);
  const double mb = sample_mean(b);
  const double va = sample_variance(a) / na;
  const double vb = sample_variance(b) / nb;
  TTestResult r;
  if (va + vb == 0.0) {
    if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
    const double inf = std::numeric_limits<double>::infinity();
    return {ma > mb ? inf : -inf, na + nb - 2.0, 0.0};
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

struct ChiSquaredResult {
  double statistic = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Two-sample homogeneity test on category counts. Categories empty in both
/// samples are dropped; d.f. = remaining categories - 1.
inline ChiSquaredResult chi_squared_frequencies(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("chi-squared: count vectors differ in length");
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] < 0.0 || b[k] < 0.0) throw std::invalid_argument("chi-squared: negative count");
    if (a[k] + b[k] > 0.0) keep.push_back(k);
  }
  if (keep.size() < 2) throw std::invalid_argument("chi-squared: fewer than 2 non-empty categories");
  double ta = 0.0, tb = 0.0;
  for (std::size_t k : keep) {
    ta += a[k];
    tb += b[k];
  }
  if (ta == 0.0 || tb == 0.0) throw std::invalid_argument("chi-squared: a sample has no counts");
  const double total = ta + tb;
  ChiSquaredResult r;
  for (std::size_t k : keep) {
    const double col = a[k] + b[k];
    const double ea = ta * col / total;
    const double eb = tb * col / total;
    r.statistic += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
  }
  r.df = static_cast<int>(keep.size()) - 1;
  r.p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.df), r.statistic));
  return r;
}

struct WeibullFit {
  bool degenerate = false;
  double shape = 0.0;
  double scale = 0.0;
  double shift = 0.0;       // location subtracted before fitting
  double max_sample = 0.0;  // reported as the 100th percentile

  /// Fitted quantile, capped at the sample maximum; p >= 1 is the maximum.
  double percentile(double p) const {
    if (p >= 1.0) return max_sample;
    if (p <= 0.0) return shift;
    if (degenerate) return std::min(shift, max_sample);
    const double q = shift + scale * std::pow(-std::log1p(-p), 1.0 / shape);
    return std::min(q, max_sample);
  }
};

/// Two-parameter Weibull maximum likelihood on strictly positive data.
/// Solves sum y^k ln y / sum y^k - 1/k - mean(ln y) = 0 for the shape k
/// by bisection (the left side is increasing in k).
inline WeibullFit fit_weibull_mle(std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("Weibull fit needs at least two values");
  const double ymax = *std::max_element(y.begin(), y.end());
  std::vector<double> lz;  // ln(y / ymax) <= 0, keeps powers bounded
  lz.reserve(y.size());
  for (double v : y) {
    if (!(v > 0.0)) throw std::invalid_argument("Weibull fit needs positive values");
    lz.push_back(std::log(v / ymax));
  }
  const double mean_lz = std::accumulate(lz.begin(), lz.end(), 0.0) / static_cast<double>(lz.size());
  auto g = [&](double k) {
    double s0 = 0.0, s1 = 0.0;
    for (double l : lz) {
      const double w = std::exp(k * l);
      s0 += w;
      s1 += w * l;
    }
    return s1 / s0 - 1.0 / k - mean_lz;
  };
  double lo = 1e-3, hi = 1.0;
  while (g(hi) < 0.0 && hi < 1e6) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  const double k = 0.5 * (lo + hi);
  double s0 = 0.0;
  for (double l : lz) s0 += std::exp(k * l);
  WeibullFit fit;
  fit.shape = k;
  fit.scale = ymax * std::pow(s0 / static_cast<double>(lz.size()), 1.0 / k);
  fit.max_sample = std::numeric_limits<double>::infinity();
  return fit;
}

/// Shifts values by their minimum and fits a Weibull to the positive
/// remainder. Fewer than two distinct positive remainders give a point mass
/// at the sample mean.
inline WeibullFit fit_shifted_weibull(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("reference fit needs at least two samples");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  std::vector<double> pos;
  for (double v : values)
    if (v - *mn > 0.0) pos.push_back(v - *mn);
  const bool spread = pos.size() >= 2 && *std::max_element(pos.begin(), pos.end()) >
                                             *std::min_element(pos.begin(), pos.end());
  WeibullFit fit;
  if (!spread) {
    fit.degenerate = true;
    fit.shift = sample_mean(values);
  } else {
    fit = fit_weibull_mle(pos);
    fit.shift = *mn;
  }
  fit.max_sample = *mx;
  return fit;
}

/// Random committed design: K routes, each grown from a uniform start node by
/// uniform random feasible extensions up to L nodes.
template <class URBG>
RouteSystem random_committed_design(const Network& net, const DesignConfig& cfg, URBG& rng) {
  RouteSystem sys;
  std::uniform_int_distribution<NodeId> start(0, static_cast<NodeId>(net.node_count()) - 1);
  for (int k = 0; k < cfg.routes; ++k) {
    Route r{{start(rng)}};
    while (static_cast<int>(r.size()) < cfg.max_route_length) {
      const OptionSet opts = adjacent_extensions(net, r);
      if (opts.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, opts.size() - 1);
      r = extend_route(std::move(r), opts[pick(rng)]);
    }
    sys.routes.push_back(std::move(r));
  }
  return sys;
}

inline double covered_true_demand(const RouteSystem& sys, const DemandTruth& truth, int max_transfers) {
  const PairIndex idx = truth.layout->index();
  double total = 0.0;
  for (const auto& p : coverage_pairs(sys, max_transfers)) total += truth.means[static_cast<Eigen::Index>(idx.id(p))];
  return total;
}

struct CrReference {
  WeibullFit fit;
  std::vector<double> samples;
};

template <class URBG>
CrReference cr_reference(const Network& net, const DemandTruth& truth, const DesignConfig& cfg, int samples,
                         URBG& rng) {
  if (samples < 2) throw std::invalid_argument("reference policy needs at least 2 samples");
  CrReference ref;
  ref.samples.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    ref.samples.push_back(covered_true_demand(random_committed_design(net, cfg, rng), truth, cfg.max_transfers));
  }
  ref.fit = fit_shifted_weibull(ref.samples);
  return ref;
}

}  // namespace seqdesign
