#include "unlearn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "unlearn/rng.hpp"
#include "model_internal.hpp"

namespace unlearn {

MeanMetrics mean_metrics(double acc_f, double acc_r) {
  if (acc_f < 0 || acc_f > 100 || acc_r < 0 || acc_r > 100) {
    throw std::invalid_argument("mean_metrics: accuracies must lie in [0, 100]");
  }
  const double err_f = 100.0 - acc_f;
  MeanMetrics m;
  m.am = (acc_r + err_f) / 2.0;
  m.gm = std::sqrt(acc_r * err_f);
  const double denom = err_f + acc_r;
  m.hm = (denom == 0.0) ? 0.0 : 2.0 * err_f * acc_r / denom;
  m.us = (std::exp(acc_r / 100.0) + std::exp(1.0 - acc_f / 100.0) - 2.0) /
         (2.0 * (std::exp(1.0) - 1.0));
  return m;
}

std::optional<double> accuracy(const MlpModel& model, const FeatureMap* feature_hook,
                               const LabeledSet& set) {
  if (set.empty()) return std::nullopt;
  const std::vector<int> predicted = predict(model, set.inputs, feature_hook);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == set.labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(set.size());
}

namespace {

// Feature rows of a set under the frozen extractor (+ optional transform).
LabeledSet to_feature_set(const MlpModel& model, const FeatureMap* hook,
                          const LabeledSet& set) {
  LabeledSet out;
  out.classes = set.classes;
  out.labels = set.labels;
  if (set.empty()) {
    out.inputs = Matrix(0, static_cast<std::size_t>(model.meta.feature_dim));
    return out;
  }
  Matrix features = forward_features(model, set.inputs);
  if (hook) features = hook->apply_columns(features);
  out.inputs = transpose(features);
  return out;
}

std::optional<double> plain_accuracy(const MlpModel& head_model, const LabeledSet& set) {
  return accuracy(head_model, nullptr, set);
}

}  // namespace

EvalReport kr_probe(const MlpModel& model, const FeatureMap* feature_hook,
                    const LabeledSet& full_train, const SplitDataset& splits,
                    const ProbeConfig& cfg) {
  if (full_train.empty()) throw std::invalid_argument("kr_probe: training set is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate < 0.0) {
    throw std::invalid_argument("kr_probe: invalid probe configuration");
  }

  const LabeledSet probe_train = to_feature_set(model, feature_hook, full_train);
  const int d = model.meta.feature_dim;
  const int classes = full_train.classes;

  // Fresh head over identity features; the extractor never enters the loop.
  MlpModel head_model = init_mlp(d, {}, classes, Rng::derive(cfg.seed, 5));
  detail::sgd_epochs(head_model, probe_train, cfg.epochs, cfg.learning_rate,
                     /*momentum=*/0.0, cfg.batch_size, Rng::derive(cfg.seed, 6), true,
                     /*direction=*/1.0, nullptr);

  EvalReport report;
  report.method = "probe";
  report.acc_f = plain_accuracy(head_model, to_feature_set(model, feature_hook, splits.forget_train));
  report.acc_r = plain_accuracy(head_model, to_feature_set(model, feature_hook, splits.remain_train));
  report.acc_ft = plain_accuracy(head_model, to_feature_set(model, feature_hook, splits.forget_test));
  report.acc_rt = plain_accuracy(head_model, to_feature_set(model, feature_hook, splits.remain_test));
  if (report.acc_f && report.acc_r) {
    const MeanMetrics m = mean_metrics(*report.acc_f, *report.acc_r);
    report.hm = m.hm;
    report.am = m.am;
    report.gm = m.gm;
    report.us = m.us;
  }
  if (report.acc_ft && report.acc_rt) {
    report.hm_t = mean_metrics(*report.acc_ft, *report.acc_rt).hm;
  }
  return report;
}

std::optional<double> recovery_rate(std::optional<double> probed_forget_acc,
                                    std::optional<double> original_forget_acc) {
  if (!probed_forget_acc || !original_forget_acc || *original_forget_acc == 0.0) {
    return std::nullopt;
  }
  return *probed_forget_acc / *original_forget_acc;
}

std::optional<double> mia_score(const MlpModel& model, const FeatureMap* feature_hook,
                                const LabeledSet& members, const LabeledSet& nonmembers,
                                std::uint64_t /*seed*/) {
  if (members.empty() || nonmembers.empty()) return std::nullopt;

  Vector member_losses =
      per_sample_cross_entropy(model, members.inputs, members.labels, feature_hook);
  Vector nonmember_losses =
      per_sample_cross_entropy(model, nonmembers.inputs, nonmembers.labels, feature_hook);
  std::sort(member_losses.begin(), member_losses.end());
  std::sort(nonmember_losses.begin(), nonmember_losses.end());

  Vector all = member_losses;
  all.insert(all.end(), nonmember_losses.begin(), nonmember_losses.end());
  std::sort(all.begin(), all.end());

  // Candidate thresholds: below the minimum, every midpoint, above the maximum.
  Vector candidates;
  candidates.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    if (all[i] < all[i + 1]) candidates.push_back(0.5 * (all[i] + all[i + 1]));
  }
  candidates.push_back(all.back() + 1.0);

  const auto n_m = static_cast<double>(member_losses.size());
  const auto n_n = static_cast<double>(nonmember_losses.size());
  double best = 0.0;
  for (double t : candidates) {
    // Members are predicted where the loss does not exceed the threshold.
    const auto m_hit = static_cast<double>(
        std::upper_bound(member_losses.begin(), member_losses.end(), t) -
        member_losses.begin());
    const auto n_hit = static_cast<double>(
        nonmember_losses.end() -
        std::upper_bound(nonmember_losses.begin(), nonmember_losses.end(), t));
    best = std::max(best, 0.5 * (m_hit / n_m + n_hit / n_n));
  }
  return 100.0 * best;
}

double js_divergence_base2(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("js_divergence: length mismatch");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return js;
}

namespace {

Matrix softmax_columns(Matrix logits) {
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    double peak = logits(0, j);
    for (std::size_t i = 1; i < logits.rows(); ++i) peak = std::max(peak, logits(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      logits(i, j) = std::exp(logits(i, j) - peak);
      sum += logits(i, j);
    }
    for (std::size_t i = 0; i < logits.rows(); ++i) logits(i, j) /= sum;
  }
  return logits;
}

}  // namespace

double zrf(const MlpModel& unlearned, const FeatureMap* feature_hook,
           const MlpModel& random_model, const LabeledSet& forget) {
  if (unlearned.head_weight.rows() != random_model.head_weight.rows()) {
    throw std::invalid_argument("zrf: class counts differ");
  }
  if (forget.empty()) throw std::invalid_argument("zrf: forgetting set is empty");

  const Matrix p = softmax_columns(forward_logits(unlearned, forget.inputs, feature_hook));
  const Matrix q = softmax_columns(forward_logits(random_model, forget.inputs, nullptr));
  double total = 0.0;
  Vector pc(p.rows()), qc(q.rows());
  for (std::size_t j = 0; j < p.cols(); ++j) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
      pc[i] = p(i, j);
      qc[i] = q(i, j);
    }
    total += js_divergence_base2(pc, qc);
  }
  return 1.0 - total / static_cast<double>(p.cols());
}

namespace {

double layer_norm(const Matrix& weight, const Vector& bias) {
  double acc = 0.0;
  for (double v : weight.data()) acc += v * v;
  for (double v : bias) acc += v * v;
  return std::sqrt(acc);
}

double layer_diff(const Matrix& wa, const Vector& ba, const Matrix& wb, const Vector& bb) {
  double acc = 0.0;
  for (std::size_t i = 0; i < wa.data().size(); ++i) {
    const double e = wa.data()[i] - wb.data()[i];
    acc += e * e;
  }
  for (std::size_t i = 0; i < ba.size(); ++i) {
    const double e = ba[i] - bb[i];
    acc += e * e;
  }
  return std::sqrt(acc);
}

}  // namespace

WeightDiff weight_diff(const MlpModel& original, const MlpModel& unlearned) {
  if (!same_architecture(original, unlearned)) {
    throw std::invalid_argument("weight_diff: architectures differ");
  }
  const std::size_t n_layers = original.extractor.size();
  std::vector<double> norms(n_layers + 1), diffs(n_layers + 1);
  for (std::size_t l = 0; l < n_layers; ++l) {
    norms[l] = layer_norm(original.extractor[l].weight, original.extractor[l].bias);
    diffs[l] = layer_diff(original.extractor[l].weight, original.extractor[l].bias,
                          unlearned.extractor[l].weight, unlearned.extractor[l].bias);
  }
  norms[n_layers] = layer_norm(original.head_weight, original.head_bias);
  diffs[n_layers] = layer_diff(original.head_weight, original.head_bias,
                               unlearned.head_weight, unlearned.head_bias);

  const double total = std::accumulate(norms.begin(), norms.end(), 0.0);
  WeightDiff out;
  out.per_layer.resize(norms.size());
  for (std::size_t l = 0; l < norms.size(); ++l) {
    // gamma_l * rel_l = (norm_l / total) * (diff_l / norm_l) = diff_l / total.
    out.per_layer[l] = (total > 0.0) ? diffs[l] / total : 0.0;
  }
  out.head = out.per_layer.back();
  out.extractor_sum =
      std::accumulate(out.per_layer.begin(), out.per_layer.end() - 1, 0.0);
  return out;
}

namespace {

Vector column_mean(const Matrix& features) {
  Vector mean(features.rows(), 0.0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < features.cols(); ++j) acc += features(i, j);
    mean[i] = acc / static_cast<double>(features.cols());
  }
  return mean;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return dot(a, b) / (na * nb);
}

std::vector<Vector> class_means(const std::map<int, Matrix>& by_class) {
  std::vector<Vector> means;
  means.reserve(by_class.size());
  for (const auto& [cls, features] : by_class) {
    if (features.cols() == 0) {
      throw std::invalid_argument("class_cosine_matrix: class " + std::to_string(cls) +
                                  " has no feature columns");
    }
    means.push_back(column_mean(features));
  }
  return means;
}

}  // namespace

Matrix class_cosine_matrix(const std::map<int, Matrix>& features_by_class) {
  return class_cosine_matrix(features_by_class, features_by_class);
}

Matrix class_cosine_matrix(const std::map<int, Matrix>& a, const std::map<int, Matrix>& b) {
  std::set<int> keys_a, keys_b;
  for (const auto& [k, v] : a) keys_a.insert(k);
  for (const auto& [k, v] : b) keys_b.insert(k);
  if (keys_a != keys_b) {
    throw std::invalid_argument("class_cosine_matrix: class sets differ");
  }
  const std::vector<Vector> means_a = class_means(a);
  const std::vector<Vector> means_b = class_means(b);
  Matrix out(means_a.size(), means_b.size());
  for (std::size_t i = 0; i < means_a.size(); ++i) {
    for (std::size_t j = 0; j < means_b.size(); ++j) {
      out(i, j) = cosine(means_a[i], means_b[j]);
    }
  }
  return out;
}

std::map<int, Matrix> features_by_class(const MlpModel& model, const FeatureMap* feature_hook,
                                        const LabeledSet& set) {
  if (set.empty()) throw std::invalid_argument("features_by_class: empty set");
  Matrix features = forward_features(model, set.inputs);
  if (feature_hook) features = feature_hook->apply_columns(features);

  std::map<int, std::vector<std::size_t>> columns;
  for (std::size_t j = 0; j < set.size(); ++j) columns[set.labels[j]].push_back(j);

  std::map<int, Matrix> out;
  for (const auto& [cls, cols] : columns) {
    Matrix m(features.rows(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (std::size_t i = 0; i < features.rows(); ++i) m(i, j) = features(i, cols[j]);
    }
    out.emplace(cls, std::move(m));
  }
  return out;
}

EvalReport evaluate(const MlpModel& model, const FeatureMap* feature_hook,
                    const SplitDataset& splits, const EvalOptions& options) {
  EvalReport report;
  report.method = options.method_label;
  report.dataset = options.dataset_id;
  report.seconds = options.method_seconds;

  report.acc_f = accuracy(model, feature_hook, splits.forget_train);
  report.acc_r = accuracy(model, feature_hook, splits.remain_train);
  report.acc_ft = accuracy(model, feature_hook, splits.forget_test);
  report.acc_rt = accuracy(model, feature_hook, splits.remain_test);
  if (report.acc_f && report.acc_r) {
    const MeanMetrics m = mean_metrics(*report.acc_f, *report.acc_r);
    report.hm = m.hm;
    report.am = m.am;
    report.gm = m.gm;
    report.us = m.us;
  }
  if (report.acc_ft && report.acc_rt) {
    report.hm_t = mean_metrics(*report.acc_ft, *report.acc_rt).hm;
  }

  if (options.with_mia) {
    report.mia = mia_score(model, feature_hook, splits.forget_train, splits.forget_test,
                           options.mia_seed);
  }
  if (options.with_zrf && !splits.forget_train.empty()) {
    std::vector<int> hidden;
    for (const Layer& layer : model.extractor) {
      hidden.push_back(static_cast<int>(layer.weight.rows()));
    }
    const MlpModel random_model =
        init_mlp(model.meta.input_dim, hidden, model.meta.classes, options.zrf_seed);
    report.zrf = zrf(model, feature_hook, random_model, splits.forget_train);
  }
  if (options.with_kr) {
    const LabeledSet full_train = concat(splits.forget_train, splits.remain_train);
    report.kr = std::make_shared<const EvalReport>(
        kr_probe(model, feature_hook, full_train, splits, options.probe));
  }
  return report;
}

}  // namespace unlearn
