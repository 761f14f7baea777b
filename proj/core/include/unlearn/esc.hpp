#pragma once

#include <cstdint>

#include "unlearn/matrix.hpp"
#include "unlearn/model.hpp"
#include "unlearn/svd.hpp"
#include "unlearn/transform.hpp"

namespace unlearn {

struct EscConfig {
  double p = 3.0;        // pruning percentage in [0, 100)
  bool center = false;   // subtract the feature mean before the decomposition
};

// Complete basis with the top-k principal directions removed.
struct PrunedBasis {
  Matrix u;    // full d x d basis
  std::size_t k = 0;
  Matrix u_p;  // columns k..d-1 of u
};

// k = 0 when p = 0, otherwise max(1, round-half-even(d * p / 100)), capped
// below d.
std::size_t compute_k(double p, std::size_t d);

// Decomposes the forgetting data's features and prunes the leading
// directions. Reads the model only; no parameter is touched. feature_hook,
// when present, is an erasure transform already in effect (incremental
// unlearning fits on top of it).
PrunedBasis esc_fit(const MlpModel& model, const Matrix& forget_inputs, const EscConfig& cfg,
                    const FeatureMap* feature_hook = nullptr);

// U_P (U_P^T z): projection onto the retained subspace.
Vector esc_apply(const PrunedBasis& basis, const Vector& z);

FeatureMap to_feature_map(const PrunedBasis& basis);

}  // namespace unlearn
