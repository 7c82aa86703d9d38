#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace seqdesign {

inline double normal_pdf(double w) { return std::exp(-0.5 * w * w) / std::sqrt(2.0 * std::numbers::pi); }

/// Phi(w) via erfc, accurate in both tails.
inline double normal_cdf(double w) { return 0.5 * std::erfc(-w / std::numbers::sqrt2); }

inline double inverse_normal_cdf(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

/// f(w) = w Phi(w) + phi(w), the expected positive part of w + Z.
inline double standard_normal_f(double w) { return w * normal_cdf(w) + normal_pdf(w); }

}  // namespace seqdesign
