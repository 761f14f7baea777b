#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unlearn/dataset.hpp"
#include "unlearn/matrix.hpp"
#include "unlearn/transform.hpp"

namespace unlearn {

enum class Activation { kRelu, kIdentity };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation act = Activation::kRelu;
};

struct ModelMeta {
  int input_dim = 0;
  int feature_dim = 0;
  int classes = 0;
  std::uint64_t seed = 0;
};

// Feature extractor (layer stack) plus linear classification head.
struct MlpModel {
  std::vector<Layer> extractor;
  Matrix head_weight;  // classes x feature_dim
  Vector head_bias;    // classes
  ModelMeta meta;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 42;
  bool shuffle = true;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_losses;
  double final_train_accuracy = 0.0;  // percent
};

// Seeded He-style uniform init; hidden layers are relu, head is linear.
MlpModel init_mlp(int input_dim, const std::vector<int>& hidden, int classes, std::uint64_t seed);

// Mini-batch SGD with momentum on mean cross-entropy. Deterministic per seed.
// Throws if the loss becomes non-finite, naming the epoch.
TrainResult train(const LabeledSet& data, const std::vector<int>& hidden, const TrainConfig& cfg);

// Extractor output for a batch of row-samples, feature-dimension-major (d x N).
Matrix forward_features(const MlpModel& model, const Matrix& inputs);

// Head logits (classes x N). feature_hook, when present, edits features
// before the head; null means identity.
Matrix forward_logits(const MlpModel& model, const Matrix& inputs,
                      const FeatureMap* feature_hook = nullptr);

std::vector<int> predict(const MlpModel& model, const Matrix& inputs,
                         const FeatureMap* feature_hook = nullptr);

// Per-sample cross-entropy of the (optionally wrapped) model on true labels.
Vector per_sample_cross_entropy(const MlpModel& model, const Matrix& inputs,
                                const std::vector<int>& labels,
                                const FeatureMap* feature_hook = nullptr);

double mean_cross_entropy(const MlpModel& model, const Matrix& inputs,
                          const std::vector<int>& labels,
                          const FeatureMap* feature_hook = nullptr);

// Parameter-shaped gradients of mean cross-entropy over the given batch.
struct Gradients {
  std::vector<Layer> extractor;
  Matrix head_weight;
  Vector head_bias;
};
Gradients ce_gradients(const MlpModel& model, const Matrix& inputs,
                       const std::vector<int>& labels);

void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const MlpModel& model);

bool same_architecture(const MlpModel& a, const MlpModel& b);

}  // namespace unlearn
