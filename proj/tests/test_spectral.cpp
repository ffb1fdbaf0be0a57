#include "getuda/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "getuda/random.hpp"
#include "test_util.hpp"

using namespace getuda;
using testutil::elimination_rank;
using testutil::finite_difference;

namespace {

void expect_valid_decomposition(const Matrix& m, const SpectralDecomposition& dec) {
  const std::size_t r = std::min(m.rows(), m.cols());
  ASSERT_EQ(dec.u.rows(), m.rows());
  ASSERT_EQ(dec.u.cols(), r);
  ASSERT_EQ(dec.v.rows(), m.cols());
  ASSERT_EQ(dec.v.cols(), r);
  ASSERT_EQ(dec.sigma.size(), r);

  for (std::size_t i = 0; i + 1 < r; ++i) EXPECT_GE(dec.sigma[i], dec.sigma[i + 1]);
  for (double s : dec.sigma) EXPECT_GE(s, 0.0);

  EXPECT_LT((dec.u.transposed() * dec.u - Matrix::identity(r)).max_abs(), 1e-10);
  EXPECT_LT((dec.v.transposed() * dec.v - Matrix::identity(r)).max_abs(), 1e-10);

  Matrix us = dec.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= dec.sigma[j];
  const double recon = (m - us * dec.v.transposed()).frobenius_norm();
  EXPECT_LE(recon, 1e-8 * std::max(1.0, m.frobenius_norm()));
}

}  // namespace

TEST(Svd, DiagonalMatrix) {
  const auto dec = svd(Matrix::from_rows({{3, 0}, {0, 4}}));
  ASSERT_EQ(dec.sigma.size(), 2u);
  EXPECT_NEAR(dec.sigma[0], 4.0, 1e-12);
  EXPECT_NEAR(dec.sigma[1], 3.0, 1e-12);
}

TEST(Svd, ZeroMatrix) {
  const Matrix z(2, 3);
  const auto dec = svd(z);
  ASSERT_EQ(dec.sigma.size(), 2u);
  EXPECT_EQ(dec.sigma[0], 0.0);
  EXPECT_EQ(dec.sigma[1], 0.0);
  expect_valid_decomposition(z, dec);
}

TEST(Svd, RandomReconstruction) {
  Rng rng(42);
  const Matrix m = gaussian_matrix(5, 8, rng);
  expect_valid_decomposition(m, svd(m));
}

TEST(Svd, ShapesAndRankDeficiency) {
  Rng rng(7);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{6, 3},
                      {3, 6},
                      {4, 4},
                      {1, 5},
                      {5, 1}}) {
    const Matrix m = gaussian_matrix(r, c, rng);
    expect_valid_decomposition(m, svd(m));
  }
  // Duplicated columns force rank deficiency; the decomposition must still be
  // fully orthonormal.
  const Matrix a = gaussian_matrix(4, 2, rng);
  const Matrix m = hconcat(a, a);
  expect_valid_decomposition(m, svd(m));
}

TEST(Svd, Deterministic) {
  Rng rng(11);
  const Matrix m = gaussian_matrix(6, 4, rng);
  const auto d1 = svd(m);
  const auto d2 = svd(m);
  EXPECT_EQ(d1.sigma, d2.sigma);
  EXPECT_EQ(d1.u.data(), d2.u.data());
  EXPECT_EQ(d1.v.data(), d2.v.data());
}

TEST(Svd, RejectsNonFinite) {
  Matrix m(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(svd(m), std::invalid_argument);
}

TEST(NuclearNorm, KnownValues) {
  EXPECT_NEAR(nuclear_norm(Matrix::from_rows({{3, 0}, {0, 4}})), 7.0, 1e-12);
  for (std::size_t d : {2u, 5u, 17u})
    EXPECT_NEAR(nuclear_norm(Matrix::identity(d)), static_cast<double>(d), 1e-10);
  EXPECT_NEAR(nuclear_norm(Matrix::from_rows({{1, 1}, {1, 1}})), 2.0, 1e-12);
}

TEST(SpectralNorm, KnownValues) {
  EXPECT_NEAR(spectral_norm(Matrix::from_rows({{3, 0}, {0, 4}})), 4.0, 1e-12);
  EXPECT_NEAR(spectral_norm(Matrix::identity(5)), 1.0, 1e-12);
  EXPECT_NEAR(spectral_norm(Matrix::from_rows({{1, 1}, {0, 0}})), std::sqrt(2.0), 1e-12);
}

TEST(NumericalRank, KnownValues) {
  EXPECT_EQ(numerical_rank(Matrix::identity(3), 1e-8), 3u);
  EXPECT_EQ(numerical_rank(Matrix::from_rows({{1, 1}, {1, 1}}), 1e-8), 1u);
  EXPECT_EQ(numerical_rank(Matrix(4, 3), 1e-8), 0u);
}

TEST(NumericalRank, DuplicateColumnsAgainstEliminationOracle) {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = gaussian_matrix(5, 3, rng);
    const Matrix m = hconcat(a, a);
    EXPECT_EQ(numerical_rank(m, 1e-8), elimination_rank(a));
    EXPECT_EQ(numerical_rank(m, 1e-8), elimination_rank(m));
  }
}

TEST(Subgradient, DiagonalGivesIdentity) {
  const Matrix g = nuclear_norm_subgradient(Matrix::from_rows({{3, 0}, {0, 4}}), 1e-8);
  EXPECT_LT((g - Matrix::identity(2)).max_abs(), 1e-12);
}

TEST(Subgradient, ZeroMatrixGivesZero) {
  EXPECT_EQ(nuclear_norm_subgradient(Matrix(3, 4)).max_abs(), 0.0);
}

TEST(Subgradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  const Matrix m =
      testutil::separated_matrix(4, 6, rng, [](const Matrix& x) { return svd(x); });
  const Matrix g = nuclear_norm_subgradient(m, 1e-8);
  const Matrix fd = finite_difference([](const Matrix& x) { return nuclear_norm(x); }, m);
  EXPECT_LT(testutil::rel_error(g, fd), 1e-4);
}

TEST(Subgradient, SpectralNormAtMostOne) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = gaussian_matrix(3, 7, rng);
    EXPECT_LE(spectral_norm(nuclear_norm_subgradient(m)), 1.0 + 1e-8);
  }
}

TEST(Subgradient, SubgradientInequality) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = gaussian_matrix(4, 5, rng);
    const Matrix p = gaussian_matrix(4, 5, rng, 0.3);
    const Matrix g = nuclear_norm_subgradient(m);
    EXPECT_GE(nuclear_norm(m + p), nuclear_norm(m) + frobenius_dot(g, p) - 1e-8);
  }
}

TEST(OrthonormalBasis, SpansColumnSpace) {
  Rng rng(9);
  const Matrix a = gaussian_matrix(5, 2, rng);
  const Matrix m = hconcat(a, a);  // rank 2
  const Matrix b = orthonormal_basis(m, 1e-6);
  ASSERT_EQ(b.cols(), 2u);
  // Every column of m must be reproduced by its projection onto the basis.
  const Matrix proj = b * (b.transposed() * m);
  EXPECT_LT((proj - m).max_abs(), 1e-9);
}

TEST(OrthonormalBasis, ZeroMatrixIsError) {
  EXPECT_THROW(orthonormal_basis(Matrix(3, 2), 1e-6), std::invalid_argument);
}

TEST(PrincipalAngles, AxisCases) {
  const Matrix e1 = Matrix::from_rows({{1}, {0}});
  const Matrix e2 = Matrix::from_rows({{0}, {1}});
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Matrix diag = Matrix::from_rows({{inv_sqrt2}, {inv_sqrt2}});

  auto a11 = principal_angles(e1, e1);
  ASSERT_EQ(a11.size(), 1u);
  EXPECT_NEAR(a11[0], 0.0, 1e-10);

  auto a12 = principal_angles(e1, e2);
  ASSERT_EQ(a12.size(), 1u);
  EXPECT_NEAR(a12[0], M_PI / 2.0, 1e-10);

  auto a1d = principal_angles(e1, diag);
  ASSERT_EQ(a1d.size(), 1u);
  EXPECT_NEAR(a1d[0], M_PI / 4.0, 1e-10);
}

TEST(PrincipalAngles, SymmetricInArguments) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix b1 = orthonormal_basis(gaussian_matrix(6, 2, rng));
    const Matrix b2 = orthonormal_basis(gaussian_matrix(6, 3, rng));
    const auto a = principal_angles(b1, b2);
    const auto b = principal_angles(b2, b1);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8);
    for (double ang : a) {
      EXPECT_GE(ang, 0.0);
      EXPECT_LE(ang, M_PI / 2.0 + 1e-12);
    }
  }
}

TEST(PrincipalAngles, RejectsNonOrthonormal) {
  const Matrix bad = Matrix::from_rows({{1, 1}, {0, 1}});
  const Matrix ok = Matrix::identity(2);
  EXPECT_THROW(principal_angles(bad, ok), std::invalid_argument);
  EXPECT_THROW(principal_angles(ok, bad), std::invalid_argument);
}

TEST(SpectralProperties, NormOrderingChain) {
  Rng rng(314);
  for (int trial = 0; trial < 40; ++trial) {
    const Matrix m = gaussian_matrix(4, 6, rng);
    const double spec = spectral_norm(m);
    const double nuc = nuclear_norm(m);
    const std::size_t rank = numerical_rank(m, 1e-6);
    EXPECT_LE(spec, nuc + 1e-12);
    const double slack = 1e-6 * spec * std::min(m.rows(), m.cols()) + 1e-10;
    EXPECT_LE(nuc, static_cast<double>(rank) * spec + slack);
  }
}

TEST(SpectralProperties, PositiveHomogeneity) {
  Rng rng(55);
  std::uniform_real_distribution<double> coeff(-3.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix m = gaussian_matrix(3, 5, rng);
    const double c = coeff(rng);
    const double got = nuclear_norm(m * c);
    const double want = std::fabs(c) * nuclear_norm(m);
    EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, want));
  }
}

TEST(SpectralProperties, OrthogonalInvariance) {
  Rng rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = gaussian_matrix(4, 6, rng);
    const Matrix q = random_orthogonal(4, rng);
    const Matrix r = random_orthogonal(6, rng);
    const double base = nuclear_norm(m);
    EXPECT_NEAR(nuclear_norm(q * m * r), base, 1e-8 * std::max(1.0, base));
  }
}
