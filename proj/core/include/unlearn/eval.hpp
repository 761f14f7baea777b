#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "unlearn/dataset.hpp"
#include "unlearn/matrix.hpp"
#include "unlearn/model.hpp"
#include "unlearn/transform.hpp"

namespace unlearn {

// Combined unlearning scores from forget/remain accuracy percentages.
//   AM = (acc_r + (100 - acc_f)) / 2
//   GM = sqrt(acc_r * (100 - acc_f))
//   HM = 2 (100 - acc_f) acc_r / ((100 - acc_f) + acc_r), 0 on zero denominator
//   US = (exp(acc_r/100) + exp(1 - acc_f/100) - 2) / (2 (e - 1))
struct MeanMetrics {
  double hm = 0;
  double am = 0;
  double gm = 0;
  double us = 0;
};
MeanMetrics mean_metrics(double acc_f, double acc_r);

// Percent of argmax-correct predictions; empty sets are "not applicable",
// never zero. Ties resolve to the lowest class index.
std::optional<double> accuracy(const MlpModel& model, const FeatureMap* feature_hook,
                               const LabeledSet& set);

struct ProbeConfig {
  int epochs = 10;
  double learning_rate = 0.001;
  int batch_size = 64;
  std::uint64_t seed = 42;
};

struct EvalReport {
  std::string method;
  std::optional<double> acc_f, acc_r, acc_ft, acc_rt;  // percentages
  std::optional<double> hm, hm_t, am, gm, us;
  std::optional<double> mia;  // percent, ~50 means indistinguishable
  std::optional<double> zrf;  // in [0, 1], higher is closer to scratch
  std::shared_ptr<const EvalReport> kr;  // accuracies under linear probing
  double seconds = 0.0;       // unlearning method phase wall clock
  std::string dataset;        // identifier echoed into merged reports
};

// Linear probing: freezes the extractor (and any erasure transform), trains a
// fresh seeded head on all training data, reports accuracies on the splits.
EvalReport kr_probe(const MlpModel& model, const FeatureMap* feature_hook,
                    const LabeledSet& full_train, const SplitDataset& splits,
                    const ProbeConfig& cfg);

std::optional<double> recovery_rate(std::optional<double> probed_forget_acc,
                                    std::optional<double> original_forget_acc);

// Loss-threshold membership inference: balanced attack accuracy in percent
// under the best single threshold (exhaustive sweep over loss midpoints).
// The seed is accepted for interface stability; the sweep is deterministic.
std::optional<double> mia_score(const MlpModel& model, const FeatureMap* feature_hook,
                                const LabeledSet& members, const LabeledSet& nonmembers,
                                std::uint64_t seed);

// Jensen-Shannon divergence with base-2 logarithms, bounded by 1.
double js_divergence_base2(const Vector& p, const Vector& q);

// 1 - mean JS divergence between the wrapped model's and a fresh random
// model's output distributions on the forgetting data.
double zrf(const MlpModel& unlearned, const FeatureMap* feature_hook,
           const MlpModel& random_model, const LabeledSet& forget);

// Per-layer gamma_l * ||theta_ori - theta_ul||_F / ||theta_ori||_F where
// gamma_l is the layer's share of the total original parameter norm. The
// head is the last entry.
struct WeightDiff {
  std::vector<double> per_layer;
  double head = 0.0;
  double extractor_sum = 0.0;
};
WeightDiff weight_diff(const MlpModel& original, const MlpModel& unlearned);

// Cosine similarity between per-class mean feature vectors; undefined
// entries (zero-norm means) are NaN.
Matrix class_cosine_matrix(const std::map<int, Matrix>& features_by_class);
Matrix class_cosine_matrix(const std::map<int, Matrix>& a, const std::map<int, Matrix>& b);

// Feature columns grouped by true class.
std::map<int, Matrix> features_by_class(const MlpModel& model, const FeatureMap* feature_hook,
                                        const LabeledSet& set);

struct EvalOptions {
  std::string method_label = "model";
  std::uint64_t mia_seed = 0;
  std::uint64_t zrf_seed = 9001;
  bool with_mia = true;
  bool with_zrf = true;
  bool with_kr = false;
  ProbeConfig probe;
  std::string dataset_id;
  double method_seconds = 0.0;
};

EvalReport evaluate(const MlpModel& model, const FeatureMap* feature_hook,
                    const SplitDataset& splits, const EvalOptions& options);

// Report persistence and merging.
void save_report_json(const std::string& path, const EvalReport& report);
EvalReport load_report_json(const std::string& path);
std::string report_to_json_string(const EvalReport& report);
void save_report_csv(const std::string& path, const std::vector<EvalReport>& reports);
std::string report_csv_row(const EvalReport& report);

// Markdown comparison table sorted by method; mean and std across seeds when
// a method appears more than once. Dataset mismatches append to warnings.
std::string reports_to_markdown(const std::vector<EvalReport>& reports,
                                std::vector<std::string>* warnings = nullptr);

}  // namespace unlearn
