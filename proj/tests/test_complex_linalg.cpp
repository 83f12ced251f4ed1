#include <gtest/gtest.h>

#include <random>

#include "cvnn/complex_linalg.hpp"
#include "oracles.hpp"

using namespace cvnn;

namespace {

const Complex I{0.0, 1.0};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(HermitianTranspose, IdentityAndConjugation) {
  EXPECT_EQ(hermitian_transpose(CMatrix::identity(2)), CMatrix::identity(2));
  EXPECT_EQ(hermitian_transpose(CMatrix(1, 1, I))(0, 0), -I);
}

TEST(HermitianTranspose, TwiceIsIdentity) {
  std::mt19937_64 rng(1);
  const CMatrix a = oracle::random_cmatrix(4, 3, rng);
  const CMatrix t = hermitian_transpose(a);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t(2, 1), std::conj(a(1, 2)));
  EXPECT_EQ(hermitian_transpose(t), a);
}

TEST(Matmul, IdentityAndImaginaryUnit) {
  std::mt19937_64 rng(2);
  const CMatrix a = oracle::random_cmatrix(3, 3, rng);
  EXPECT_EQ(matmul(a, CMatrix::identity(3)), a);
  EXPECT_EQ(matmul(CMatrix(1, 1, I), CMatrix(1, 1, I))(0, 0), Complex(-1.0, 0.0));
}

TEST(Matmul, MatchesRealEmbeddingProduct) {
  std::mt19937_64 rng(3);
  const CMatrix a = oracle::random_cmatrix(3, 3, rng);
  const CMatrix b = oracle::random_cmatrix(3, 3, rng);
  const CMatrix c = matmul(a, b);
  const RMatrix ec = matmul(real_embedding(a), real_embedding(b));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(c(i, j).real(), ec(i, j), 1e-12);
      EXPECT_NEAR(c(i, j).imag(), ec(i + 3, j), 1e-12);
    }
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(CMatrix(2, 3), CMatrix(2, 3)), ShapeError);
  EXPECT_THROW(CMatrix(2, 2, std::vector<Complex>(3)), ShapeError);
}

TEST(FrobeniusNorm, Examples) {
  EXPECT_DOUBLE_EQ(frobenius_norm(CMatrix::identity(2)), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(frobenius_norm(CMatrix(1, 1, Complex(3, 4))), 5.0);
}

TEST(FrobeniusNorm, MatchesModulusMatrix) {
  std::mt19937_64 rng(4);
  const CMatrix a = oracle::random_cmatrix(5, 5, rng);
  const RMatrix m = entrywise_modulus_matrix(a);
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  EXPECT_LE(rel(frobenius_norm(a), std::sqrt(s)), 1e-14);
}

TEST(PqNorm, Examples) {
  EXPECT_DOUBLE_EQ(pq_norm(CMatrix::identity(2), 2, 1), 2.0);
  CMatrix a(2, 2);
  a(0, 0) = 3;
  a(1, 0) = 4;
  EXPECT_DOUBLE_EQ(pq_norm(a, 2, 1), 5.0);
  EXPECT_DOUBLE_EQ(pq_norm(a, 2, INFINITY), 5.0);
  EXPECT_THROW(pq_norm(a, 0.5, 1), DomainError);
}

TEST(PqNorm, TwoTwoIsFrobeniusAndModulusConsistent) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const CMatrix a = oracle::random_cmatrix(4, 6, rng);
    EXPECT_LE(rel(pq_norm(a, 2, 2), frobenius_norm(a)), 1e-14);
    EXPECT_LE(rel(pq_norm(a, 3, 1.5), pq_norm(entrywise_modulus_matrix(a), 3, 1.5)), 1e-15);
  }
}

TEST(EntrywiseModulus, Examples) {
  EXPECT_DOUBLE_EQ(entrywise_modulus_matrix(CMatrix(1, 1, Complex(3, 4)))(0, 0), 5.0);
  CMatrix r(1, 2);
  r(0, 0) = -2.0;
  r(0, 1) = 7.0;
  const RMatrix m = entrywise_modulus_matrix(r);
  EXPECT_EQ(m(0, 0), 2.0);
  EXPECT_EQ(m(0, 1), 7.0);
}

TEST(RealEmbedding, Examples) {
  const RMatrix e = real_embedding(CMatrix(1, 1, I));
  EXPECT_EQ(e, RMatrix(2, 2, std::vector<double>{0, -1, 1, 0}));
  EXPECT_EQ(real_embedding(CMatrix::identity(2)), RMatrix::identity(4));
}

TEST(SpectralNorm, Examples) {
  EXPECT_NEAR(spectral_norm(CMatrix::identity(3)).value, 1.0, 1e-12);
  CMatrix d(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  EXPECT_NEAR(spectral_norm(d).value, 3.0, 1e-9);
  const auto z = spectral_norm(CMatrix(3, 3));
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.iterations, 0);
  EXPECT_THROW(spectral_norm(d, {0.0, 10, 0}), DomainError);
}

TEST(SpectralNorm, MatchesJacobiOracle16x16) {
  std::mt19937_64 rng(6);
  const CMatrix a = oracle::random_cmatrix(16, 16, rng);
  const auto r = spectral_norm(a);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(rel(r.value, oracle::complex_sigma_max(a)), 1e-8);
}

TEST(SpectralNorm, EmbeddingAndAdjointAgree) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 5; ++t) {
    const CMatrix a = oracle::random_cmatrix(8, 8, rng);
    const double s = spectral_norm(a).value;
    EXPECT_LE(rel(spectral_norm(real_embedding(a)).value, s), 1e-8);
    EXPECT_LE(rel(spectral_norm(hermitian_transpose(a)).value, s), 1e-8);
  }
}

TEST(SpectralNorm, NormSandwichAndOperatorBound) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int t = 0; t < 30; ++t) {
    const std::size_t r = dim(rng), c = dim(rng);
    const CMatrix a = oracle::random_cmatrix(r, c, rng);
    const double s = spectral_norm(a).value;
    const double f = frobenius_norm(a);
    EXPECT_LE(s, f * (1 + 1e-10));
    EXPECT_LE(f, std::sqrt(double(std::min(r, c))) * s * (1 + 1e-10));
    const CMatrix v = oracle::random_cmatrix(c, 1, rng);
    const double vn = frobenius_norm(v);
    const CMatrix av = matmul(a, v);
    EXPECT_LE(frobenius_norm(av) / vn, s * (1 + 1e-8));
  }
}

TEST(SpectralNorm, NonConvergenceIsFlagged) {
  std::mt19937_64 rng(9);
  const CMatrix a = oracle::random_cmatrix(20, 20, rng);
  const auto r = spectral_norm(a, {1e-300, 3, 0});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_GT(r.value, 0.0);
}
