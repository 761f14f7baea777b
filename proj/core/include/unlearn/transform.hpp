#pragma once

#include <stdexcept>
#include <string>

#include "unlearn/matrix.hpp"

namespace unlearn {

// Linear edit of the feature space, applied between extractor and head:
// z -> m * z. Erasure projections and their compositions live here.
struct FeatureMap {
  Matrix m;  // d x d

  static FeatureMap identity(std::size_t d) { return {Matrix::identity(d)}; }

  std::size_t dim() const { return m.rows(); }

  Vector apply(const Vector& z) const { return multiply(m, z); }

  // Feature columns (d x N) in, transformed columns out.
  Matrix apply_columns(const Matrix& features) const { return multiply(m, features); }
};

// The map that applies `first`, then `second`.
inline FeatureMap merge(const FeatureMap& first, const FeatureMap& second) {
  if (first.dim() != second.dim()) {
    throw std::invalid_argument("merge: feature dimensions " + std::to_string(first.dim()) +
                                " and " + std::to_string(second.dim()) + " differ");
  }
  return {multiply(second.m, first.m)};
}

}  // namespace unlearn
