#pragma once

#include <cstdint>

#include "unlearn/matrix.hpp"

namespace unlearn {

// Complete left-singular basis of a d x N feature matrix. The first
// effective_rank columns of u are singular vectors sorted by descending
// singular value; the remaining columns span the orthogonal complement.
struct SvdBasis {
  Matrix u;       // d x d, orthonormal within kOrthoTol
  Vector sigma;   // length d, descending, zero-padded past the rank
  std::size_t effective_rank = 0;
};

inline constexpr double kOrthoTol = 1e-8;
inline constexpr std::uint64_t kCompletionSeed = 0x5EEDBA515ULL;

// max |B^T B - I| over all entries.
double orthonormality_error(const Matrix& cols);

SvdBasis svd_complete(const Matrix& features);

// B (B^T z) for orthonormal columns B.
Vector projector_apply(const Matrix& basis_cols, const Vector& z);

// Extends d x r orthonormal columns to a full d x d orthonormal matrix whose
// first r columns equal the input. Deterministic per seed.
Matrix orthonormal_complete(const Matrix& partial, std::uint64_t seed = kCompletionSeed);

}  // namespace unlearn
