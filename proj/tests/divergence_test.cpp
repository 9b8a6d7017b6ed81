#include "medfb/divergence.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"

namespace {

using medfb::Distribution;
using medfb::DivergenceKind;
using medfb::ExtendedReal;
using medfb::f_divergence;

constexpr DivergenceKind kAllKinds[] = {DivergenceKind::total_variation, DivergenceKind::hellinger_sq,
                                        DivergenceKind::triangular, DivergenceKind::kl,
                                        DivergenceKind::chi_sq};

// Hand evaluations straight from the definitions; kept independent of the
// library's loop.
double tv_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
  return s / 2;
}
double h2_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] + q[i] - 2 * std::sqrt(p[i] * q[i]);
  return s / 2;
}

TEST(ExtendedReal, RejectsNegativeAndInfiniteValues) {
  EXPECT_THROW(ExtendedReal(-1.0), std::domain_error);
  EXPECT_THROW(ExtendedReal(std::numeric_limits<double>::infinity()), std::domain_error);
  EXPECT_THROW(ExtendedReal(std::nan("")), std::domain_error);
}

TEST(ExtendedReal, InfinityArithmetic) {
  const auto inf = ExtendedReal::infinity();
  EXPECT_TRUE((inf + ExtendedReal(2.0)).is_infinite());
  EXPECT_TRUE((0.0 * inf) == ExtendedReal(0.0));
  EXPECT_TRUE((0.5 * inf).is_infinite());
  EXPECT_TRUE(ExtendedReal(5.0) < inf);
  EXPECT_THROW((void)inf.value(), std::domain_error);
  EXPECT_TRUE(std::isinf(inf.to_double()));
  std::ostringstream os;
  os << inf;
  EXPECT_EQ(os.str(), "inf");
}

TEST(Distribution, RenormalizesWithinToleranceAndRejectsOtherwise) {
  Distribution d({0.5 + 4e-10, 0.5});
  EXPECT_NEAR(d[0] + d[1], 1.0, 1e-15);
  EXPECT_THROW(Distribution({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(Distribution({1.2, -0.2}), std::invalid_argument);
  EXPECT_THROW(Distribution(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(Distribution::normalized({0.0, 0.0}), std::invalid_argument);
}

TEST(FDivergence, SpecExamples) {
  EXPECT_DOUBLE_EQ(f_divergence(DivergenceKind::chi_sq, {1, 0}, {0.5, 0.5}).value(), 1.0);
  EXPECT_NEAR(f_divergence(DivergenceKind::hellinger_sq, {0.5, 0.5}, {1, 0}).value(),
              1.0 - std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(f_divergence(DivergenceKind::triangular, {0.5, 0.5}, {1, 0}).value(), 2.0 / 3.0, 1e-15);
  EXPECT_TRUE(f_divergence(DivergenceKind::chi_sq, {1, 0}, {0, 1}).is_infinite());
  EXPECT_TRUE(f_divergence(DivergenceKind::kl, {1, 0}, {0, 1}).is_infinite());
  EXPECT_DOUBLE_EQ(f_divergence(DivergenceKind::total_variation, {1, 0}, {0, 1}).value(), 1.0);
}

TEST(FDivergence, ZeroMassTermsFollowConventions) {
  // q has mass outside supp(p): finite KL, p(x)=0 terms drop out.
  EXPECT_NEAR(f_divergence(DivergenceKind::kl, {1, 0}, {0.5, 0.5}).value(), std::log(2.0), 1e-15);
  // Both zero on an outcome: that outcome contributes nothing.
  EXPECT_NEAR(f_divergence(DivergenceKind::chi_sq, {0.5, 0.5, 0}, {0.25, 0.75, 0}).value(),
              0.0625 / 0.25 + 0.0625 / 0.75, 1e-15);
}

TEST(FDivergence, DimensionMismatchThrows) {
  for (auto kind : kAllKinds)
    EXPECT_THROW(f_divergence(kind, {0.5, 0.5}, {0.2, 0.3, 0.5}), std::invalid_argument);
}

TEST(FDivergence, IdentityIsZeroAndValuesNonNegative) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = medfb::fixtures::uniform_size(rng, 2, 8);
    const auto p = medfb::fixtures::random_distribution(rng, k, 0.7, 0.2);
    const auto q = medfb::fixtures::random_distribution(rng, k, 0.7, 0.2);
    for (auto kind : kAllKinds) {
      EXPECT_LE(f_divergence(kind, p, p).value(), 1e-12) << medfb::to_string(kind);
      EXPECT_GE(f_divergence(kind, p, q).to_double(), 0.0);
    }
  }
}

TEST(FDivergence, MatchesIndependentOracles) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = medfb::fixtures::uniform_size(rng, 2, 8);
    const auto p = medfb::fixtures::random_simplex(rng, k);
    const auto q = medfb::fixtures::random_simplex(rng, k);
    EXPECT_NEAR(f_divergence(DivergenceKind::total_variation, Distribution(p), Distribution(q)).value(),
                tv_oracle(p, q), 1e-12);
    EXPECT_NEAR(f_divergence(DivergenceKind::hellinger_sq, Distribution(p), Distribution(q)).value(),
                h2_oracle(p, q), 1e-12);
  }
}

TEST(FDivergence, ChainOfInequalities) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = medfb::fixtures::uniform_size(rng, 2, 8);
    const auto p = medfb::fixtures::random_distribution(rng, k, 0.5, 0.3);
    const auto q = medfb::fixtures::random_distribution(rng, k, 0.5, 0.3);
    const double tv = f_divergence(DivergenceKind::total_variation, p, q).value();
    const double h2 = f_divergence(DivergenceKind::hellinger_sq, p, q).value();
    const double tri = f_divergence(DivergenceKind::triangular, p, q).value();
    const double slack = 1e-12;
    EXPECT_LE(tv * tv, tri / 2 + slack);
    EXPECT_LE(tri / 2, 2 * h2 + slack);
    EXPECT_LE(2 * h2, tri + slack);
    EXPECT_LE(tri, 2 * tv + slack);
  }
}

TEST(FDivergence, KlBoundedByLogOfChiSquaredPlusOne) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = medfb::fixtures::uniform_size(rng, 2, 8);
    const auto p = medfb::fixtures::random_distribution(rng, k, 0.5);
    const auto q = medfb::fixtures::random_distribution(rng, k, 0.5);
    const double kl = f_divergence(DivergenceKind::kl, p, q).value();
    const double chi = f_divergence(DivergenceKind::chi_sq, p, q).value();
    EXPECT_LE(kl, std::log1p(chi) + 1e-12);
  }
}

TEST(FDivergence, SymmetryAndAsymmetry) {
  std::mt19937_64 rng(15);
  bool kl_asymmetric = false, chi_asymmetric = false;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = medfb::fixtures::random_distribution(rng, 4);
    const auto q = medfb::fixtures::random_distribution(rng, 4);
    for (auto kind : {DivergenceKind::total_variation, DivergenceKind::hellinger_sq,
                      DivergenceKind::triangular})
      EXPECT_NEAR(f_divergence(kind, p, q).value(), f_divergence(kind, q, p).value(), 1e-14);
    kl_asymmetric |= std::fabs(f_divergence(DivergenceKind::kl, p, q).value() -
                               f_divergence(DivergenceKind::kl, q, p).value()) > 1e-6;
    chi_asymmetric |= std::fabs(f_divergence(DivergenceKind::chi_sq, p, q).value() -
                                f_divergence(DivergenceKind::chi_sq, q, p).value()) > 1e-6;
  }
  EXPECT_TRUE(kl_asymmetric);
  EXPECT_TRUE(chi_asymmetric);
}

TEST(VinczeLeCam, SpecExamples) {
  const Distribution p{0.3, 0.7}, q{0.6, 0.4};
  EXPECT_EQ(medfb::vincze_le_cam(0.0, p, q), 0.0);
  EXPECT_EQ(medfb::vincze_le_cam(1.0, p, q), 0.0);
  EXPECT_NEAR(medfb::vincze_le_cam(0.5, p, q),
              f_divergence(DivergenceKind::triangular, p, q).value() / 2, 1e-15);
  EXPECT_NEAR(medfb::vincze_le_cam(0.5, {1, 0}, {0, 1}), 1.0, 1e-15);
  EXPECT_THROW(medfb::vincze_le_cam(1.5, p, q), std::invalid_argument);
  EXPECT_THROW(medfb::vincze_le_cam(0.5, p, {0.2, 0.3, 0.5}), std::invalid_argument);
}

TEST(VinczeLeCam, ConcaveInR) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = medfb::fixtures::uniform_size(rng, 2, 6);
    const auto p = medfb::fixtures::random_distribution(rng, k, 0.5, 0.2);
    const auto q = medfb::fixtures::random_distribution(rng, k, 0.5, 0.2);
    const double r1 = u(rng), r2 = u(rng);
    EXPECT_GE(medfb::vincze_le_cam((r1 + r2) / 2, p, q),
              (medfb::vincze_le_cam(r1, p, q) + medfb::vincze_le_cam(r2, p, q)) / 2 - 1e-12);
  }
}

TEST(MutualInformation, SpecExamples) {
  const std::vector<Distribution> same = {{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}};
  EXPECT_NEAR(medfb::mutual_f_information(DivergenceKind::chi_sq, Distribution({0.1, 0.3, 0.6}), same)
                  .value(),
              0.0, 1e-15);

  const std::vector<Distribution> disjoint = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  EXPECT_NEAR(
      medfb::mutual_f_information(DivergenceKind::chi_sq, Distribution::uniform(4), disjoint).value(),
      3.0, 1e-12);

  const std::vector<Distribution> rows = {{0.5, 0.5}, {1, 0}};
  EXPECT_NEAR(
      medfb::mutual_f_information(DivergenceKind::chi_sq, Distribution({0.5, 0.5}), rows).value(),
      1.0 / 3.0, 1e-15);
}

TEST(MutualInformation, ZeroMassRowsContributeNothing) {
  const std::vector<Distribution> rows = {{1, 0}, {0, 1}};
  // Row 2 has no mass, so the mixture misses outcome 2 but the term is skipped.
  EXPECT_EQ(medfb::mutual_f_information(DivergenceKind::kl, Distribution({1, 0}), rows).value(), 0.0);
}

TEST(MutualInformation, BoundedByAlphabetSizes) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = medfb::fixtures::uniform_size(rng, 2, 6);
    const std::size_t k = medfb::fixtures::uniform_size(rng, 2, 6);
    std::vector<Distribution> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(medfb::fixtures::random_distribution(rng, k, 0.3, 0.3));
    const auto tau = medfb::fixtures::random_distribution(rng, n, 0.5);
    const double m = static_cast<double>(std::min(n, k));
    EXPECT_LE(medfb::mutual_f_information(DivergenceKind::chi_sq, tau, rows).value(), m - 1 + 1e-9);
    EXPECT_LE(medfb::mutual_f_information(DivergenceKind::kl, tau, rows).value(), std::log(m) + 1e-9);
  }
}

TEST(ConditionalDivergence, SpecExamples) {
  const std::vector<Distribution> a = {{1, 0}};
  const std::vector<Distribution> b = {{0.5, 0.5}};
  EXPECT_NEAR(medfb::conditional_f_divergence(DivergenceKind::kl, a, b, Distribution({1.0})).value(),
              std::log(2.0), 1e-15);
  EXPECT_EQ(medfb::conditional_f_divergence(DivergenceKind::chi_sq, a, a, Distribution({1.0})).value(),
            0.0);
  const std::vector<Distribution> c = {{1, 0}, {0.5, 0.5}};
  const std::vector<Distribution> d = {{0, 1}, {0.5, 0.5}};
  // Infinite summand with zero weight is dropped.
  EXPECT_EQ(medfb::conditional_f_divergence(DivergenceKind::chi_sq, c, d, Distribution({0, 1})).value(),
            0.0);
  EXPECT_TRUE(
      medfb::conditional_f_divergence(DivergenceKind::chi_sq, c, d, Distribution({0.5, 0.5})).is_infinite());
  EXPECT_THROW(medfb::conditional_f_divergence(DivergenceKind::kl, c, a, Distribution({0.5, 0.5})),
               std::invalid_argument);
}

TEST(ShannonEntropy, SpecExamples) {
  EXPECT_EQ(medfb::shannon_entropy(Distribution::point_mass(3, 1)), 0.0);
  EXPECT_NEAR(medfb::shannon_entropy(Distribution::uniform(5)), std::log(5.0), 1e-15);
  EXPECT_NEAR(medfb::shannon_entropy({0.25, 0.75}), 0.5623351446188083, 1e-15);
}

TEST(KlBernoulli, Values) {
  EXPECT_NEAR(medfb::kl_bernoulli(0.5, 0.75).value(), 0.5 * std::log(4.0 / 3.0), 1e-15);
  EXPECT_TRUE(medfb::kl_bernoulli(0.5, 1.0).is_infinite());
  EXPECT_EQ(medfb::kl_bernoulli(1.0, 1.0).value(), 0.0);
  EXPECT_THROW(medfb::kl_bernoulli(1.5, 0.5), std::invalid_argument);
}

}  // namespace
