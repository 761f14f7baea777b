#pragma once

#include <cstdint>
#include <vector>

#include "unlearn/dataset.hpp"
#include "unlearn/matrix.hpp"
#include "unlearn/model.hpp"
#include "unlearn/transform.hpp"

namespace unlearn {

struct EscTConfig {
  int epochs = 50;             // T
  double learning_rate = 1.0;  // eta; clipping keeps large steps safe
  double tau = 0.75;           // binarization threshold in (0, 1)
  int batch_size = 32;
  std::uint64_t seed = 42;
};

// Refining mask over the basis: entries live in [0,1] while training and in
// {0,1} once binarized.
struct MaskState {
  Matrix m;      // d x d
  bool binarized = false;
  Matrix m_r;    // binary mask, valid once binarized
};

struct RefinedBasis {
  Matrix u;    // full d x d basis
  Matrix m_r;  // binary mask
  Matrix u_r;  // u (.) m_r
};

struct MaskTrainStats {
  int epochs_run = 0;
  long steps = 0;
  double min_after_update = 1.0;  // extrema over all post-clip mask states
  double max_after_update = 1.0;
  bool early_stopped = false;
};

struct MaskTrainResult {
  MaskState state;
  MaskTrainStats stats;
};

// Negative cross-entropy when the prediction matches the label, zero
// otherwise. Argmax ties resolve to the lowest class index.
double pce_loss(const Vector& logits, int label);

// Gradient of the mean penalized cross-entropy with respect to the mask,
// through logits = head((U (.) M)(U (.) M)^T h(x)).
Matrix mask_gradient(const MlpModel& model, const Matrix& u, const Matrix& mask,
                     const Matrix& batch_inputs, const std::vector<int>& batch_labels);

// Mini-batch mask descent with [0,1] clipping; stops early at an epoch
// boundary once every forgetting sample is misclassified, then binarizes at
// cfg.tau. Deterministic per seed. feature_hook is an erasure transform
// already in effect, as in esc_fit.
MaskTrainResult train_mask(const MlpModel& model, const Matrix& u, const LabeledSet& forget,
                           const EscTConfig& cfg, const FeatureMap* feature_hook = nullptr);

RefinedBasis refine(const Matrix& u, const Matrix& m_r);

// U_R (U_R^T z).
Vector esc_t_apply(const RefinedBasis& basis, const Vector& z);

FeatureMap to_feature_map(const RefinedBasis& basis);

}  // namespace unlearn
