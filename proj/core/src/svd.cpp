#include "unlearn/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "unlearn/rng.hpp"

namespace unlearn {

namespace {

constexpr double kRankTolFactor = 1e-10;  // sigma_i > factor * sigma_0 counts toward the rank
constexpr int kMaxSweeps = 64;

double row_dot(const Matrix& m, std::size_t i, std::size_t j) {
  const double* a = m.row(i);
  const double* b = m.row(j);
  double acc = 0.0;
  for (std::size_t k = 0; k < m.cols(); ++k) acc += a[k] * b[k];
  return acc;
}

void rotate_rows(Matrix& m, std::size_t i, std::size_t j, double c, double s) {
  double* a = m.row(i);
  double* b = m.row(j);
  for (std::size_t k = 0; k < m.cols(); ++k) {
    const double ai = a[k];
    const double bj = b[k];
    a[k] = c * ai - s * bj;
    b[k] = s * ai + c * bj;
  }
}

void rotate_columns(Matrix& m, std::size_t i, std::size_t j, double c, double s) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ai = m(r, i);
    const double bj = m(r, j);
    m(r, i) = c * ai - s * bj;
    m(r, j) = s * ai + c * bj;
  }
}

// ||Z - U * scaled_v||_F / max(1, ||Z||_F)
double max_recon_error(const Matrix& original, const Matrix& u, const Matrix& scaled_v) {
  const Matrix recon = multiply(u, scaled_v);
  double diff = 0.0;
  for (std::size_t i = 0; i < original.data().size(); ++i) {
    const double e = original.data()[i] - recon.data()[i];
    diff += e * e;
  }
  return std::sqrt(diff) / std::max(1.0, frobenius_norm(original));
}

}  // namespace

double orthonormality_error(const Matrix& cols) {
  double worst = 0.0;
  for (std::size_t i = 0; i < cols.cols(); ++i) {
    for (std::size_t j = i; j < cols.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < cols.rows(); ++r) acc += cols(r, i) * cols(r, j);
      const double target = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(acc - target));
    }
  }
  return worst;
}

// One-sided Jacobi: plane rotations orthogonalize the rows of a working copy
// of the input while the same rotations accumulate into the columns of U.
// The accumulated U is a product of rotations and therefore a complete
// orthonormal basis even when the input is rank deficient. Wide inputs are
// first reduced by a row-space LQ factorization so the sweeps run on a d x d
// factor instead of d x N data.
SvdBasis svd_complete(const Matrix& features) {
  if (features.rows() < 1 || features.cols() < 1) {
    throw std::invalid_argument("svd_complete: input must have at least one row and column");
  }
  require_finite(features, "svd_complete input");

  const std::size_t d = features.rows();
  const std::size_t n = features.cols();

  // Z = L Q with orthonormal rows of Q; rank-deficient rows of Z leave a
  // zero row in both L and Q, which the rotation accumulation handles. Rows
  // that lose most of their mass in the first Gram-Schmidt pass get a second
  // pass (twice-is-enough criterion).
  Matrix l_factor(d, d);
  Matrix q(d, n);
  {
    Matrix residual = features;
    for (std::size_t i = 0; i < d; ++i) {
      double* v = residual.row(i);
      double before = 0.0;
      for (std::size_t k = 0; k < n; ++k) before += v[k] * v[k];
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < i; ++j) {
          const double* qj = q.row(j);
          double proj = 0.0;
          for (std::size_t k = 0; k < n; ++k) proj += v[k] * qj[k];
          l_factor(i, j) += proj;
          for (std::size_t k = 0; k < n; ++k) v[k] -= proj * qj[k];
        }
        double after = 0.0;
        for (std::size_t k = 0; k < n; ++k) after += v[k] * v[k];
        if (after > 0.25 * before) break;
        before = after;
      }
      double len = 0.0;
      for (std::size_t k = 0; k < n; ++k) len += v[k] * v[k];
      len = std::sqrt(len);
      l_factor(i, i) = len;
      if (len > 0.0) {
        double* qi = q.row(i);
        for (std::size_t k = 0; k < n; ++k) qi[k] = v[k] / len;
      }
    }
  }

  Matrix work = std::move(l_factor);
  Matrix u = Matrix::identity(d);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        const double alpha = row_dot(work, i, i);
        const double beta = row_dot(work, j, j);
        const double gamma = row_dot(work, i, j);
        const double denom = std::sqrt(alpha * beta);
        if (denom == 0.0 || std::abs(gamma) <= 1e-14 * denom) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_rows(work, i, j, c, s);
        rotate_columns(u, i, j, c, s);
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  Vector sigma(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) sigma[i] = std::sqrt(row_dot(work, i, i));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  SvdBasis basis;
  basis.u = Matrix(d, d);
  basis.sigma.resize(d);
  Matrix permuted(d, d);
  for (std::size_t col = 0; col < d; ++col) {
    const std::size_t src = order[col];
    basis.sigma[col] = sigma[src];
    // Sign convention: the largest-magnitude component of each basis vector
    // is positive, so the factorization is unique up to ties.
    std::size_t peak = 0;
    for (std::size_t r = 1; r < d; ++r) {
      if (std::abs(u(r, src)) > std::abs(u(peak, src))) peak = r;
    }
    const double flip = (u(peak, src) < 0.0) ? -1.0 : 1.0;
    for (std::size_t r = 0; r < d; ++r) basis.u(r, col) = flip * u(r, src);
    const double* w_row = work.row(src);
    for (std::size_t c = 0; c < d; ++c) permuted(col, c) = flip * w_row[c];
  }
  const Matrix scaled_v = multiply(permuted, q);  // row i = sigma_i * v_i^T

  const double sigma0 = basis.sigma.empty() ? 0.0 : basis.sigma.front();
  basis.effective_rank = 0;
  for (double s : basis.sigma) {
    if (s > kRankTolFactor * sigma0 && s > 0.0) ++basis.effective_rank;
  }

  const double ortho = orthonormality_error(basis.u);
  if (ortho > kOrthoTol) {
    throw std::runtime_error("svd_complete: basis orthonormality error " + std::to_string(ortho) +
                             " exceeds tolerance");
  }
  const double recon_err = max_recon_error(features, basis.u, scaled_v);
  if (recon_err > 1e-6) {
    throw std::runtime_error("svd_complete: reconstruction error " + std::to_string(recon_err) +
                             " exceeds tolerance");
  }
  return basis;
}

Vector projector_apply(const Matrix& basis_cols, const Vector& z) {
  if (basis_cols.cols() > basis_cols.rows()) {
    throw std::invalid_argument("projector_apply: more columns (" +
                                std::to_string(basis_cols.cols()) + ") than rows (" +
                                std::to_string(basis_cols.rows()) + ")");
  }
  if (z.size() != basis_cols.rows()) {
    throw std::invalid_argument("projector_apply: vector length mismatch");
  }
  const double err = orthonormality_error(basis_cols);
  if (err > kOrthoTol) {
    throw std::invalid_argument("projector_apply: basis columns not orthonormal (error " +
                                std::to_string(err) + ")");
  }
  Vector coeffs(basis_cols.cols(), 0.0);
  for (std::size_t j = 0; j < basis_cols.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < basis_cols.rows(); ++r) acc += basis_cols(r, j) * z[r];
    coeffs[j] = acc;
  }
  Vector out(basis_cols.rows(), 0.0);
  for (std::size_t r = 0; r < basis_cols.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < basis_cols.cols(); ++j) acc += basis_cols(r, j) * coeffs[j];
    out[r] = acc;
  }
  return out;
}

Matrix orthonormal_complete(const Matrix& partial, std::uint64_t seed) {
  const std::size_t d = partial.rows();
  const std::size_t r = partial.cols();
  if (r > d) {
    throw std::invalid_argument("orthonormal_complete: more columns than rows");
  }
  if (r > 0) {
    const double err = orthonormality_error(partial);
    if (err > kOrthoTol) {
      throw std::invalid_argument("orthonormal_complete: input columns not orthonormal (error " +
                                  std::to_string(err) + ")");
    }
  }

  Matrix out(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < r; ++j) out(i, j) = partial(i, j);
  }

  Rng rng(seed);
  std::size_t col = r;
  while (col < d) {
    Vector candidate(d);
    for (double& v : candidate) v = rng.normal();
    // Modified Gram-Schmidt, run twice for numerical headroom.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < col; ++j) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += out(i, j) * candidate[i];
        for (std::size_t i = 0; i < d; ++i) candidate[i] -= proj * out(i, j);
      }
    }
    const double len = norm(candidate);
    if (len < 1e-8) continue;  // degenerate draw, take the next one
    for (std::size_t i = 0; i < d; ++i) out(i, col) = candidate[i] / len;
    ++col;
  }
  return out;
}

}  // namespace unlearn
