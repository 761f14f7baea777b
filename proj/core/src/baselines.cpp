#include "unlearn/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "unlearn/rng.hpp"
#include "model_internal.hpp"

namespace unlearn {

namespace {

bool parameters_finite(const MlpModel& model) {
  auto ok = [](const Vector& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  for (const Layer& layer : model.extractor) {
    if (!ok(layer.weight.data()) || !ok(layer.bias)) return false;
  }
  return ok(model.head_weight.data()) && ok(model.head_bias);
}

void check_config(const BaselineConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("baseline: epochs must be >= 1");
  if (cfg.learning_rate < 0.0) {
    throw std::invalid_argument("baseline: learning_rate must be >= 0");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("baseline: batch_size must be >= 1");
}

}  // namespace

BaselineResult negative_gradient(const MlpModel& model, const LabeledSet& forget,
                                 const BaselineConfig& cfg) {
  check_config(cfg);
  if (forget.empty()) throw std::invalid_argument("negative_gradient: forgetting set is empty");

  BaselineResult result{model, false};
  MlpModel last_finite = model;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      detail::sgd_epochs(result.model, forget, 1, cfg.learning_rate, /*momentum=*/0.0,
                         cfg.batch_size, Rng::derive(cfg.seed, 100 + epoch), true,
                         /*direction=*/-1.0, nullptr);
    } catch (const std::runtime_error&) {
      result.model = last_finite;
      result.divergence_warning = true;
      return result;
    }
    if (!parameters_finite(result.model)) {
      result.model = last_finite;
      result.divergence_warning = true;
      return result;
    }
    last_finite = result.model;
  }
  return result;
}

BaselineResult random_label(const MlpModel& model, const LabeledSet& forget,
                            const BaselineConfig& cfg) {
  check_config(cfg);
  if (forget.empty()) throw std::invalid_argument("random_label: forgetting set is empty");
  if (forget.classes < 2) {
    throw std::invalid_argument("random_label: needs at least two classes");
  }

  LabeledSet relabeled = forget;
  relabeled.labels = random_wrong_labels(forget.labels, forget.classes, cfg.seed);

  BaselineResult result{model, false};
  detail::sgd_epochs(result.model, relabeled, cfg.epochs, cfg.learning_rate, /*momentum=*/0.0,
                     cfg.batch_size, Rng::derive(cfg.seed, 200), true,
                     /*direction=*/1.0, nullptr);
  return result;
}

BaselineResult finetune(const MlpModel& model, const LabeledSet& remain,
                        const BaselineConfig& cfg) {
  check_config(cfg);
  if (remain.empty()) throw std::invalid_argument("finetune: remaining set is empty");

  BaselineResult result{model, false};
  detail::sgd_epochs(result.model, remain, cfg.epochs, cfg.learning_rate, /*momentum=*/0.0,
                     cfg.batch_size, Rng::derive(cfg.seed, 300), true,
                     /*direction=*/1.0, nullptr);
  return result;
}

TrainResult retrain(const LabeledSet& remain, const std::vector<int>& hidden,
                    const TrainConfig& cfg) {
  return train(remain, hidden, cfg);
}

std::vector<int> random_wrong_labels(const std::vector<int>& labels, int classes,
                                     std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("random_wrong_labels: needs >= 2 classes");
  Rng rng(Rng::derive(seed, 4));
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
    out[i] = (draw >= labels[i]) ? draw + 1 : draw;
  }
  return out;
}

}  // namespace unlearn
