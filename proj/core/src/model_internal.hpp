#pragma once

#include <cstdint>
#include <vector>

#include "unlearn/model.hpp"

// Training machinery shared between the trainer and the fine-tuning baselines.
namespace unlearn::detail {

struct BatchGrads {
  double loss = 0.0;
  Gradients grads;
};

double softmax_ce_inplace(Matrix& logits, const std::vector<int>& labels);

BatchGrads batch_gradients(const MlpModel& model, const Matrix& batch,
                           const std::vector<int>& labels);

// direction +1 descends, -1 ascends. Returns the last epoch's mean loss.
// Throws on non-finite loss naming the epoch.
double sgd_epochs(MlpModel& model, const LabeledSet& data, int epochs, double learning_rate,
                  double momentum, int batch_size, std::uint64_t shuffle_seed, bool shuffle,
                  double direction, std::vector<double>* epoch_losses);

// Extractor output with samples kept as rows (N x d).
Matrix feature_rows_for(const MlpModel& model, const Matrix& inputs);

}  // namespace unlearn::detail
