#include "getuda/theory.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace getuda;

namespace {
const double kSqrt2 = std::sqrt(2.0);

Matrix basis_column(int dim, int axis) {
  Matrix m(dim, 1);
  m(axis, 0) = 1.0;
  return m;
}
}  // namespace

TEST(RankConcatUpper, DisjointBasesHitEquality) {
  const auto r = check_rank_concat_upper(
      {basis_column(3, 0), basis_column(3, 1), basis_column(3, 2)});
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.slack, 0.0);
}

TEST(RankConcatUpper, DuplicateMatricesAreStrict) {
  const auto r = check_rank_concat_upper({basis_column(3, 0), basis_column(3, 0)});
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.slack, 1.0);
}

TEST(RankConcatLower, NestedColumnSpaceHitsEquality) {
  Rng rng(3);
  const Matrix a = gaussian_matrix(4, 2, rng);
  const Matrix b = hconcat(a, a);  // col space of b equals col space of a
  const auto r = check_rank_concat_lower(a, b);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.slack, 0.0);
}

TEST(RankConcatLower, IndependentSpansAreStrict) {
  const auto r = check_rank_concat_lower(basis_column(3, 0), basis_column(3, 1));
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.slack, 1.0);
}

TEST(NuclearConcatUpper, OrthogonalSpacesHitEquality) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto [a, b] = detail::orthogonal_column_space_pair(rng);
    const auto r = check_nuclear_concat_upper(a, b);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.slack, 0.0, 1e-8);
  }
}

TEST(NuclearConcatUpper, DuplicateColumnIsStrict) {
  const auto r = check_nuclear_concat_upper(basis_column(2, 0), basis_column(2, 0));
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.slack, 2.0 - kSqrt2, 1e-12);
}

TEST(TransferabilityWitness, KnownValues) {
  Rng rng(5);
  {
    const auto [a, b] = make_transferability_witness(2, 5, 1.0, rng);
    EXPECT_NEAR(nuclear_norm(a), 2.0, 1e-10);
    EXPECT_NEAR(spectral_norm(a), 1.0, 1e-10);
    EXPECT_NEAR(domain_coherence_global(a, b).value, (2.0 - kSqrt2) * 2.0, 1e-10);
  }
  {
    const auto [a, b] = make_transferability_witness(3, 4, 0.5, rng);
    EXPECT_NEAR(domain_coherence_global(a, b).value, (2.0 - kSqrt2) * 1.5, 1e-10);
  }
}

TEST(TransferabilityBound, WitnessResidualTiny) {
  Rng rng(6);
  for (std::size_t d : {2u, 4u, 7u}) {
    const auto [a, b] = make_transferability_witness(d, d + 2, 1.0, rng);
    const auto r = check_transferability_bound(a, b, 1.0);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.slack, 0.0, 1e-8);
  }
}

TEST(TransferabilityBound, RejectsHypothesisViolation) {
  const Matrix big = Matrix::identity(3) * 2.0;
  EXPECT_THROW(check_transferability_bound(big, big, 1.0), std::invalid_argument);
}

TEST(TradeoffWitness, OrthogonalRegimeKnownValue) {
  Rng rng(7);
  const auto w = make_tradeoff_witness(3, 3, 1.0, TradeoffRegime::OrthogonalClasses, rng);
  // Each class occupies a distinct rotated axis; orthogonality term vanishes.
  const auto asm_ = detail::assemble_clusters(w);
  EXPECT_NEAR(class_orthogonality(asm_.z, asm_.partition).value, 0.0, 1e-8);
  const double l_dc = domain_coherence_classwise(asm_.z, asm_.partition).value;
  EXPECT_NEAR(0.0 - 1.0 * l_dc, (kSqrt2 - 2.0) * 3.0, 1e-10);

  const auto ga = geometry_aware(asm_.z, asm_.partition, 1.0, 1.0);
  EXPECT_NEAR(ga.value, (kSqrt2 - 2.0) * 3.0, 1e-10);
}

TEST(TradeoffWitness, SharedRegimeKnownValue) {
  Rng rng(8);
  const auto w = make_tradeoff_witness(4, 4, 1.0, TradeoffRegime::SharedSubspace, rng);
  const auto asm_ = detail::assemble_clusters(w);
  const double co = class_orthogonality(asm_.z, asm_.partition).value;
  const double dc = domain_coherence_classwise(asm_.z, asm_.partition).value;
  const double lambda = 3.0;
  const double expected = (((kSqrt2 - 2.0) * lambda + kSqrt2) * 2.0 - kSqrt2) * 4.0;
  EXPECT_NEAR(co - lambda * dc, expected, 1e-9);
}

TEST(TradeoffWitness, OrthogonalRegimeRequiresDivisibility) {
  Rng rng(9);
  EXPECT_THROW(make_tradeoff_witness(3, 4, 1.0, TradeoffRegime::OrthogonalClasses, rng),
               std::invalid_argument);
}

TEST(TradeoffBound, WitnessesHitBothRegimes) {
  Rng rng(10);
  for (double lambda : {3.0, 5.0}) {
    const auto w = make_tradeoff_witness(3, 5, 1.0, TradeoffRegime::SharedSubspace, rng);
    const auto r = check_tradeoff_bound(w, lambda, 1.0, TradeoffRegime::SharedSubspace);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.slack, 0.0, 1e-8);
  }
  for (double lambda : {0.5, 1.0}) {
    const auto w = make_tradeoff_witness(3, 6, 1.0, TradeoffRegime::OrthogonalClasses, rng);
    const auto r = check_tradeoff_bound(w, lambda, 1.0, TradeoffRegime::OrthogonalClasses);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.slack, 0.0, 1e-8);
  }
}

TEST(TradeoffBound, RejectsHypothesisViolation) {
  TradeoffClusters c;
  c.source_blocks = {Matrix::identity(2) * 3.0, Matrix::identity(2)};
  c.target_blocks = {Matrix::identity(2), Matrix::identity(2)};
  EXPECT_THROW(check_tradeoff_bound(c, 1.0, 1.0, TradeoffRegime::OrthogonalClasses),
               std::invalid_argument);
}

TEST(TradeoffBound, BoundaryClosedFormsAgree) {
  const double lambda = 1.0 + kSqrt2;
  for (std::size_t k : {2u, 3u, 7u})
    for (std::size_t d : {2u, 5u}) {
      const double bi = tradeoff_bound(TradeoffRegime::SharedSubspace, lambda, 1.0, k, d);
      const double bii = tradeoff_bound(TradeoffRegime::OrthogonalClasses, lambda, 1.0, k, d);
      EXPECT_NEAR(bi, bii, 1e-8);
    }
}

TEST(TheorySuite, AllBoundsPassAndDeterministic) {
  const auto a = run_theory_suite(17, 60);
  const auto b = run_theory_suite(17, 60);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].violations, 0) << a[i].name;
    EXPECT_GE(a[i].trials, 1) << a[i].name;
    EXPECT_LE(a[i].witness_residual, 1e-8) << a[i].name;
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].trials, b[i].trials);
    EXPECT_EQ(a[i].witness_residual, b[i].witness_residual);
  }
}
