#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unlearn/matrix.hpp"
#include "unlearn/svd.hpp"

namespace {

using namespace unlearn;
using testutil::gram;
using testutil::jacobi_symmetric_eigen;
using testutil::power_iteration_top_eigenvalue;
using testutil::random_matrix;
using testutil::random_orthonormal;
using testutil::random_vector;

double reconstruction_error(const Matrix& z, const SvdBasis& basis) {
  // V = Z^T U diag(1/sigma) on the nonzero part; compare U diag(sigma) V^T
  // against Z.
  const std::size_t d = z.rows();
  Matrix recon(d, z.cols());
  for (std::size_t c = 0; c < basis.effective_rank; ++c) {
    Vector u_col(d);
    for (std::size_t i = 0; i < d; ++i) u_col[i] = basis.u(i, c);
    // row of sigma * v^T = u^T Z
    for (std::size_t j = 0; j < z.cols(); ++j) {
      double coeff = 0.0;
      for (std::size_t i = 0; i < d; ++i) coeff += u_col[i] * z(i, j);
      for (std::size_t i = 0; i < d; ++i) recon(i, j) += u_col[i] * coeff;
    }
  }
  double num = 0.0;
  for (std::size_t i = 0; i < z.data().size(); ++i) {
    const double e = z.data()[i] - recon.data()[i];
    num += e * e;
  }
  return std::sqrt(num) / std::max(1.0, frobenius_norm(z));
}

TEST(Matrix, MultiplyAndTranspose) {
  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
  Matrix c = multiply(a, b);
  EXPECT_DOUBLE_EQ(c(0, 0), 19);
  EXPECT_DOUBLE_EQ(c(0, 1), 22);
  EXPECT_DOUBLE_EQ(c(1, 0), 43);
  EXPECT_DOUBLE_EQ(c(1, 1), 50);
  Matrix at = transpose(a);
  EXPECT_DOUBLE_EQ(at(0, 1), 3);
  EXPECT_THROW(multiply(a, Matrix(3, 2)), std::invalid_argument);
}

TEST(Matrix, RequireFiniteNamesEntry) {
  Matrix a(2, 2, 1.0);
  a(1, 0) = std::nan("");
  try {
    require_finite(a, "probe");
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 0)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("probe"), std::string::npos);
  }
}

TEST(SvdComplete, IdentityInput) {
  const SvdBasis basis = svd_complete(Matrix::identity(3));
  ASSERT_EQ(basis.sigma.size(), 3u);
  for (double s : basis.sigma) EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(basis.effective_rank, 3u);
  // U is a signed permutation of the identity.
  for (std::size_t j = 0; j < 3; ++j) {
    int nonzero = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      if (std::abs(basis.u(i, j)) > 1e-9) {
        ++nonzero;
        EXPECT_NEAR(std::abs(basis.u(i, j)), 1.0, 1e-12);
      }
    }
    EXPECT_EQ(nonzero, 1);
  }
}

TEST(SvdComplete, RankOneOuterProduct) {
  // u with norm 2, v with norm 1.
  Vector u = {2.0 * 0.6, 0.0, 2.0 * 0.8};
  Vector v = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0, 0.0};
  Matrix z(3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) z(i, j) = u[i] * v[j];
  }
  const SvdBasis basis = svd_complete(z);
  EXPECT_NEAR(basis.sigma[0], 2.0, 1e-10);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_NEAR(basis.sigma[i], 0.0, 1e-10);
  EXPECT_EQ(basis.effective_rank, 1u);
  const double align = basis.u(0, 0) * u[0] / 2.0 + basis.u(1, 0) * u[1] / 2.0 +
                       basis.u(2, 0) * u[2] / 2.0;
  EXPECT_NEAR(std::abs(align), 1.0, 1e-10);
}

TEST(SvdComplete, RandomAgainstGramEigenOracle) {
  const Matrix z = random_matrix(8, 100, 17);
  const SvdBasis basis = svd_complete(z);

  EXPECT_LE(orthonormality_error(basis.u), 1e-8);
  EXPECT_LE(reconstruction_error(z, basis), 1e-6);

  const auto eig = jacobi_symmetric_eigen(gram(z));
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = std::sqrt(std::max(0.0, eig.values[i]));
    EXPECT_NEAR(basis.sigma[i], expected, 1e-6 * std::max(1.0, expected))
        << "singular value " << i;
  }
  // Power iteration cross-checks the oracle itself.
  const double top = power_iteration_top_eigenvalue(gram(z), 3);
  EXPECT_NEAR(eig.values[0], top, 1e-6 * top);
}

TEST(SvdComplete, SingularValuesMatchEigenOnSmallInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 2 + seed;
    const Matrix z = random_matrix(d, 3 * d + 1, 1000 + seed);
    const SvdBasis basis = svd_complete(z);
    const auto eig = jacobi_symmetric_eigen(gram(z));
    for (std::size_t i = 0; i < d; ++i) {
      const double expected = std::sqrt(std::max(0.0, eig.values[i]));
      EXPECT_NEAR(basis.sigma[i], expected, 1e-6 * std::max(1.0, expected));
    }
  }
}

TEST(SvdComplete, RankDeficientGetsCompleteBasis) {
  // 6x5 matrix of rank 2.
  const Matrix a = random_matrix(6, 2, 5);
  const Matrix b = random_matrix(2, 5, 6);
  const Matrix z = multiply(a, b);
  const SvdBasis basis = svd_complete(z);
  EXPECT_EQ(basis.effective_rank, 2u);
  EXPECT_LE(orthonormality_error(basis.u), 1e-8);
  EXPECT_EQ(basis.u.cols(), 6u);
}

TEST(SvdComplete, ZeroMatrix) {
  const SvdBasis basis = svd_complete(Matrix(4, 7));
  EXPECT_EQ(basis.effective_rank, 0u);
  for (double s : basis.sigma) EXPECT_EQ(s, 0.0);
  EXPECT_LE(orthonormality_error(basis.u), 1e-12);
}

TEST(SvdComplete, RejectsNonFinite) {
  Matrix z(2, 2, 1.0);
  z(0, 1) = std::numeric_limits<double>::infinity();
  try {
    svd_complete(z);
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos);
  }
}

TEST(SvdComplete, DeterministicPerInput) {
  const Matrix z = random_matrix(8, 40, 99);
  const SvdBasis a = svd_complete(z);
  const SvdBasis b = svd_complete(z);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.sigma, b.sigma);
}

TEST(ProjectorApply, FullBasisIsIdentity) {
  const Matrix basis = random_orthonormal(6, 6, 21);
  const Vector z = random_vector(6, 22);
  const Vector out = projector_apply(basis, z);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out[i], z[i], 1e-10);
}

TEST(ProjectorApply, AxisProjection) {
  Matrix basis(2, 1);
  basis(0, 0) = 1.0;
  const Vector out = projector_apply(basis, {3.0, 4.0});
  EXPECT_NEAR(out[0], 3.0, 1e-12);
  EXPECT_NEAR(out[1], 0.0, 1e-12);
}

TEST(ProjectorApply, Idempotent) {
  const Matrix basis = random_orthonormal(16, 5, 31);
  const Vector z = random_vector(16, 32);
  const Vector once = projector_apply(basis, z);
  const Vector twice = projector_apply(basis, once);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(twice[i], once[i], 1e-10);
}

TEST(ProjectorApply, RejectsWideOrSkewedBasis) {
  EXPECT_THROW(projector_apply(Matrix(3, 4), Vector(3, 0.0)), std::invalid_argument);
  Matrix skew(3, 2, 0.5);  // columns not orthonormal
  EXPECT_THROW(projector_apply(skew, Vector(3, 0.0)), std::invalid_argument);
}

TEST(ProjectorProperties, IdempotenceSymmetryTrace) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t d = 4 + seed % 13;
    const std::size_t r = 1 + seed % d;
    const Matrix b = random_orthonormal(d, r, 500 + seed);
    const Matrix p = multiply(b, transpose(b));
    EXPECT_LE(max_abs_diff(multiply(p, p), p), 1e-8);
    EXPECT_LE(max_abs_diff(p, transpose(p)), 1e-12);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += p(i, i);
    EXPECT_NEAR(trace, static_cast<double>(r), 1e-6);
  }
}

TEST(OrthonormalComplete, FullInputReturnsInput) {
  const Matrix basis = random_orthonormal(5, 5, 41);
  const Matrix out = orthonormal_complete(basis);
  EXPECT_LE(max_abs_diff(out, basis), 0.0);
}

TEST(OrthonormalComplete, CompletesAnAxis) {
  Matrix e1(3, 1);
  e1(0, 0) = 1.0;
  const Matrix out = orthonormal_complete(e1);
  EXPECT_LE(orthonormality_error(out), 1e-10);
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
  // Completion columns live in the e2/e3 plane.
  EXPECT_NEAR(out(0, 1), 0.0, 1e-10);
  EXPECT_NEAR(out(0, 2), 0.0, 1e-10);
}

TEST(OrthonormalComplete, RandomPartial) {
  const Matrix partial = random_orthonormal(32, 7, 51);
  const Matrix out = orthonormal_complete(partial, 99);
  EXPECT_LE(orthonormality_error(out), 1e-8);
  for (std::size_t i = 0; i < 32; ++i) {
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(out(i, j), partial(i, j));
  }
}

TEST(OrthonormalComplete, DeterministicPerSeed) {
  const Matrix partial = random_orthonormal(12, 3, 61);
  EXPECT_EQ(orthonormal_complete(partial, 7), orthonormal_complete(partial, 7));
}

TEST(OrthonormalComplete, RejectsNonOrthonormal) {
  EXPECT_THROW(orthonormal_complete(Matrix(3, 2, 0.7)), std::invalid_argument);
  EXPECT_THROW(orthonormal_complete(Matrix(2, 3)), std::invalid_argument);
}

}  // namespace
