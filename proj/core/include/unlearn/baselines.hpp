#pragma once

#include <cstdint>

#include "unlearn/dataset.hpp"
#include "unlearn/model.hpp"

namespace unlearn {

struct BaselineConfig {
  int epochs = 5;
  double learning_rate = 0.02;
  int batch_size = 32;
  std::uint64_t seed = 42;
};

struct BaselineResult {
  MlpModel model;
  bool divergence_warning = false;  // negative gradient only
};

// Gradient ascent of cross-entropy on the forgetting data. If an epoch
// produces non-finite parameters the last finite state is returned and the
// warning flag is set.
BaselineResult negative_gradient(const MlpModel& model, const LabeledSet& forget,
                                 const BaselineConfig& cfg);

// Reassigns every forgetting sample a seeded random wrong label, then runs
// standard descent on the relabeled set only.
BaselineResult random_label(const MlpModel& model, const LabeledSet& forget,
                            const BaselineConfig& cfg);

// Continued training on the remaining data only.
BaselineResult finetune(const MlpModel& model, const LabeledSet& remain,
                        const BaselineConfig& cfg);

// From-scratch training on the remaining data; the gold standard.
TrainResult retrain(const LabeledSet& remain, const std::vector<int>& hidden,
                    const TrainConfig& cfg);

// The relabeling used by random_label, exposed for inspection: deterministic
// per seed and never equal to the true label.
std::vector<int> random_wrong_labels(const std::vector<int>& labels, int classes,
                                     std::uint64_t seed);

}  // namespace unlearn
