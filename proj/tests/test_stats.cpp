#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "seqdesign/stats.hpp"

using namespace seqdesign;

namespace {

const std::vector<double> kSampleA{27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1,
                                   21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4};
// Listed fixture; its last two values differ from the textbook sample below.
const std::vector<double> kSampleListed{27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0,
                                        24.8, 20.2, 21.9, 22.1, 22.9, 30.6, 24.6};
const std::vector<double> kSampleTextbook{27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0,
                                          24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4};

std::vector<double> weibull_draws(double shape, double scale, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::weibull_distribution<double> w(shape, scale);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = w(rng);
  return v;
}

}  // namespace

TEST(Welch, TextbookFixture) {
  const TTestResult r = welch_t_test(kSampleA, kSampleTextbook);
  EXPECT_NEAR(r.t, -2.455356398286006, 1e-12);
  EXPECT_NEAR(r.p, 0.021378001462866985, 1e-9);
  EXPECT_NEAR(r.p, 0.021, 5e-4);
}

TEST(Welch, ListedFixtureMatchesReferenceImplementation) {
  const TTestResult r = welch_t_test(kSampleA, kSampleListed);
  EXPECT_NEAR(r.t, -2.8612924375896727, 1e-12);
  EXPECT_NEAR(r.p, 0.0079059523282687, 1e-9);
}

TEST(Welch, SymmetricAndDegenerate) {
  const TTestResult ab = welch_t_test(kSampleA, kSampleTextbook);
  const TTestResult ba = welch_t_test(kSampleTextbook, kSampleA);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
  EXPECT_DOUBLE_EQ(welch_t_test(kSampleA, kSampleA).p, 1.0);
  EXPECT_DOUBLE_EQ(welch_t_test(std::vector<double>{3, 3, 3}, std::vector<double>{3, 3}).p, 1.0);
  EXPECT_DOUBLE_EQ(welch_t_test(std::vector<double>{3, 3, 3}, std::vector<double>{4, 4}).p, 0.0);
  EXPECT_THROW(welch_t_test(std::vector<double>{1}, kSampleA), std::invalid_argument);
}

TEST(Welch, DetectsUnitShiftAtThousandDraws) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> a(1000), b(1000);
  for (auto& x : a) x = z(rng);
  for (auto& x : b) x = z(rng) + 1.0;
  EXPECT_LT(welch_t_test(a, b).p, 1e-10);
}

TEST(ChiSquared, HandComputedCases) {
  const ChiSquaredResult r = chi_squared_frequencies(std::vector<double>{10, 0}, std::vector<double>{0, 10});
  EXPECT_NEAR(r.statistic, 20.0, 1e-12);
  EXPECT_EQ(r.df, 1);
  EXPECT_NEAR(r.p, 7.744216431044088e-06, 1e-15);
  const ChiSquaredResult same = chi_squared_frequencies(std::vector<double>{4, 6, 1}, std::vector<double>{4, 6, 1});
  EXPECT_NEAR(same.statistic, 0.0, 1e-15);
  EXPECT_NEAR(same.p, 1.0, 1e-12);
}

TEST(ChiSquared, DropsEmptyCategoriesAndIsSymmetric) {
  std::vector<double> a(121), b(121);
  for (std::size_t k = 0; k < 121; ++k) {
    a[k] = static_cast<double>(k % 7 + 1);
    b[k] = static_cast<double>((k * 3) % 5);
  }
  a[0] = b[0] = 0.0;
  const ChiSquaredResult ab = chi_squared_frequencies(a, b);
  EXPECT_EQ(ab.df, 119);
  EXPECT_NEAR(ab.statistic, chi_squared_frequencies(b, a).statistic, 1e-9);
  EXPECT_THROW(chi_squared_frequencies(std::vector<double>{0, 3}, std::vector<double>{0, 2}), std::invalid_argument);
  EXPECT_THROW(chi_squared_frequencies(std::vector<double>{1, 3}, std::vector<double>{2}), std::invalid_argument);
}

TEST(Weibull, RecoversShapeAndScale) {
  const auto y = weibull_draws(2.0, 5.0, 10000, 99);
  const WeibullFit raw = fit_weibull_mle(y);
  EXPECT_NEAR(raw.shape, 2.0, 0.1);
  EXPECT_NEAR(raw.scale, 5.0, 0.25);
  const WeibullFit shifted = fit_shifted_weibull(y);
  EXPECT_NEAR(shifted.shape, 2.0, 0.1);
  EXPECT_NEAR(shifted.scale, 5.0, 0.25);
  EXPECT_DOUBLE_EQ(shifted.percentile(1.0), *std::max_element(y.begin(), y.end()));
}

TEST(Weibull, ConstantSamplesAreDegenerate) {
  const WeibullFit f = fit_shifted_weibull(std::vector<double>(20, 7.0));
  EXPECT_TRUE(f.degenerate);
  EXPECT_DOUBLE_EQ(f.percentile(0.5), 7.0);
  EXPECT_DOUBLE_EQ(f.percentile(1.0), 7.0);
  EXPECT_THROW(fit_shifted_weibull(std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(fit_weibull_mle(std::vector<double>{1.0, -2.0}), std::invalid_argument);
}

TEST(Weibull, PercentileIsMonotoneAndCapped) {
  const WeibullFit f = fit_shifted_weibull(weibull_draws(1.5, 3.0, 200, 5));
  double prev = f.percentile(0.0);
  for (int k = 1; k <= 100; ++k) {
    const double q = f.percentile(0.01 * k);
    EXPECT_GE(q, prev);
    EXPECT_LE(q, f.max_sample);
    prev = q;
  }
}

TEST(CrReference, RandomDesignsOnGrid) {
  const Network net = build_grid_network(4, 4, 1.0);
  const PairIndex idx = net.pair_index();
  auto layout = std::make_shared<const PairLayout>(idx, ClusterSpec{});
  Eigen::VectorXd means = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(idx.size()), 1.0, 120.0);
  const DemandTruth truth = make_truth(layout, means, means * 0.1);
  DesignConfig cfg;
  cfg.routes = 2;
  cfg.max_route_length = 4;
  std::mt19937_64 rng(8);
  const CrReference ref = cr_reference(net, truth, cfg, 200, rng);
  ASSERT_EQ(ref.samples.size(), 200u);
  for (double s : ref.samples) {
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, truth.total());
  }
  EXPECT_LE(ref.fit.percentile(0.5), ref.fit.percentile(1.0));
  EXPECT_DOUBLE_EQ(ref.fit.percentile(1.0), *std::max_element(ref.samples.begin(), ref.samples.end()));
  std::mt19937_64 again(8);
  EXPECT_EQ(cr_reference(net, truth, cfg, 200, again).samples, ref.samples);
  EXPECT_THROW(cr_reference(net, truth, cfg, 1, rng), std::invalid_argument);
}
