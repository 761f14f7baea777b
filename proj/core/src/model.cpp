#include "unlearn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "unlearn/rng.hpp"
#include "model_internal.hpp"

namespace unlearn {

namespace {

using nlohmann::json;

Matrix apply_activation(Matrix z, Activation act) {
  if (act == Activation::kRelu) {
    for (double& v : z.data()) v = std::max(0.0, v);
  }
  return z;
}

// rows of `inputs` through one layer: act(inputs * W^T + b)
Matrix layer_forward(const Layer& layer, const Matrix& inputs) {
  Matrix z(inputs.rows(), layer.weight.rows());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const double* in = inputs.row(i);
    double* out = z.row(i);
    for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
      const double* w = layer.weight.row(o);
      double acc = layer.bias[o];
      for (std::size_t j = 0; j < layer.weight.cols(); ++j) acc += w[j] * in[j];
      out[o] = acc;
    }
  }
  return apply_activation(std::move(z), layer.act);
}

void check_input_dim(const MlpModel& model, const Matrix& inputs) {
  if (static_cast<int>(inputs.cols()) != model.meta.input_dim) {
    throw std::invalid_argument("forward: input width " + std::to_string(inputs.cols()) +
                                " does not match model input_dim " +
                                std::to_string(model.meta.input_dim));
  }
}

Layer zeros_like(const Layer& layer) {
  return {Matrix(layer.weight.rows(), layer.weight.cols()), Vector(layer.bias.size(), 0.0),
          layer.act};
}

}  // namespace

namespace detail {

// Softmax rows of `logits` in place; returns mean cross-entropy on labels.
double softmax_ce_inplace(Matrix& logits, const std::vector<int>& labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double* row = logits.row(i);
    const std::size_t c = logits.cols();
    const double peak = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - peak);
    const double log_sum = std::log(sum);
    loss -= row[labels[i]] - peak - log_sum;
    for (std::size_t j = 0; j < c; ++j) row[j] = std::exp(row[j] - peak - log_sum);
  }
  return loss / static_cast<double>(logits.rows());
}

BatchGrads batch_gradients(const MlpModel& model, const Matrix& batch,
                           const std::vector<int>& labels) {
  const std::size_t n_layers = model.extractor.size();
  std::vector<Matrix> activations;  // activations[0] = batch, then per layer
  activations.reserve(n_layers + 1);
  activations.push_back(batch);
  for (const Layer& layer : model.extractor) {
    activations.push_back(layer_forward(layer, activations.back()));
  }

  Matrix probs(batch.rows(), model.head_weight.rows());
  {
    const Matrix& feats = activations.back();
    for (std::size_t i = 0; i < feats.rows(); ++i) {
      const double* in = feats.row(i);
      double* out = probs.row(i);
      for (std::size_t o = 0; o < model.head_weight.rows(); ++o) {
        const double* w = model.head_weight.row(o);
        double acc = model.head_bias[o];
        for (std::size_t j = 0; j < model.head_weight.cols(); ++j) acc += w[j] * in[j];
        out[o] = acc;
      }
    }
  }

  BatchGrads out;
  out.loss = softmax_ce_inplace(probs, labels);

  const double inv_n = 1.0 / static_cast<double>(batch.rows());
  Matrix dlogits = std::move(probs);
  for (std::size_t i = 0; i < dlogits.rows(); ++i) {
    dlogits(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    double* row = dlogits.row(i);
    for (std::size_t j = 0; j < dlogits.cols(); ++j) row[j] *= inv_n;
  }

  out.grads.head_weight = multiply(transpose(dlogits), activations.back());
  out.grads.head_bias.assign(dlogits.cols(), 0.0);
  for (std::size_t i = 0; i < dlogits.rows(); ++i) {
    for (std::size_t j = 0; j < dlogits.cols(); ++j) out.grads.head_bias[j] += dlogits(i, j);
  }

  Matrix upstream = multiply(dlogits, model.head_weight);  // d(loss)/d(features)
  out.grads.extractor.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const Layer& layer = model.extractor[l];
    if (layer.act == Activation::kRelu) {
      const Matrix& activated = activations[l + 1];
      for (std::size_t i = 0; i < upstream.data().size(); ++i) {
        if (activated.data()[i] <= 0.0) upstream.data()[i] = 0.0;
      }
    }
    out.grads.extractor[l].act = layer.act;
    out.grads.extractor[l].weight = multiply(transpose(upstream), activations[l]);
    out.grads.extractor[l].bias.assign(layer.bias.size(), 0.0);
    for (std::size_t i = 0; i < upstream.rows(); ++i) {
      for (std::size_t j = 0; j < upstream.cols(); ++j) {
        out.grads.extractor[l].bias[j] += upstream(i, j);
      }
    }
    if (l > 0) upstream = multiply(upstream, layer.weight);
  }
  return out;
}

double sgd_epochs(MlpModel& model, const LabeledSet& data, int epochs, double learning_rate,
                  double momentum, int batch_size, std::uint64_t shuffle_seed, bool shuffle,
                  double direction, std::vector<double>* epoch_losses) {
  Gradients velocity;
  velocity.head_weight = Matrix(model.head_weight.rows(), model.head_weight.cols());
  velocity.head_bias.assign(model.head_bias.size(), 0.0);
  for (const Layer& layer : model.extractor) velocity.extractor.push_back(zeros_like(layer));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(shuffle_seed);

  double last_epoch_loss = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (shuffle) shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    const auto stride = static_cast<std::size_t>(batch_size);
    for (std::size_t start = 0; start < order.size(); start += stride) {
      const std::size_t end = std::min(order.size(), start + stride);
      Matrix batch(end - start, data.inputs.cols());
      std::vector<int> labels(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const double* src = data.inputs.row(order[i]);
        std::copy(src, src + data.inputs.cols(), batch.row(i - start));
        labels[i - start] = data.labels[order[i]];
      }
      BatchGrads bg = batch_gradients(model, batch, labels);
      if (!std::isfinite(bg.loss)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      loss_sum += bg.loss * static_cast<double>(end - start);
      seen += end - start;

      const double step = direction * learning_rate;
      auto update = [&](Matrix& param, Matrix& vel, const Matrix& grad) {
        for (std::size_t i = 0; i < param.data().size(); ++i) {
          vel.data()[i] = momentum * vel.data()[i] - step * grad.data()[i];
          param.data()[i] += vel.data()[i];
        }
      };
      auto update_vec = [&](Vector& param, Vector& vel, const Vector& grad) {
        for (std::size_t i = 0; i < param.size(); ++i) {
          vel[i] = momentum * vel[i] - step * grad[i];
          param[i] += vel[i];
        }
      };
      for (std::size_t l = 0; l < model.extractor.size(); ++l) {
        update(model.extractor[l].weight, velocity.extractor[l].weight,
               bg.grads.extractor[l].weight);
        update_vec(model.extractor[l].bias, velocity.extractor[l].bias,
                   bg.grads.extractor[l].bias);
      }
      update(model.head_weight, velocity.head_weight, bg.grads.head_weight);
      update_vec(model.head_bias, velocity.head_bias, bg.grads.head_bias);
    }
    last_epoch_loss = loss_sum / static_cast<double>(seen);
    if (epoch_losses) epoch_losses->push_back(last_epoch_loss);
    if (!std::isfinite(last_epoch_loss)) {
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    }
  }
  return last_epoch_loss;
}

Matrix feature_rows_for(const MlpModel& model, const Matrix& inputs) {
  check_input_dim(model, inputs);
  Matrix current = inputs;
  for (const Layer& layer : model.extractor) current = layer_forward(layer, current);
  return current;
}

}  // namespace detail

MlpModel init_mlp(int input_dim, const std::vector<int>& hidden, int classes,
                  std::uint64_t seed) {
  if (input_dim < 1 || classes < 1) {
    throw std::invalid_argument("init_mlp: input_dim and classes must be >= 1");
  }
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("init_mlp: layer sizes must be >= 1");
  }
  MlpModel model;
  Rng rng(Rng::derive(seed, 0));
  int fan_in = input_dim;
  for (int width : hidden) {
    Layer layer;
    layer.act = Activation::kRelu;
    layer.weight = Matrix(width, fan_in);
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& v : layer.weight.data()) v = rng.uniform(-limit, limit);
    layer.bias.assign(width, 0.0);
    model.extractor.push_back(std::move(layer));
    fan_in = width;
  }
  model.head_weight = Matrix(classes, fan_in);
  const double limit = std::sqrt(6.0 / fan_in);
  for (double& v : model.head_weight.data()) v = rng.uniform(-limit, limit);
  model.head_bias.assign(classes, 0.0);
  model.meta = {input_dim, fan_in, classes, seed};
  return model;
}

TrainResult train(const LabeledSet& data, const std::vector<int>& hidden,
                  const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  }
  if (cfg.learning_rate < 0.0) {
    throw std::invalid_argument("train: learning_rate must be >= 0");
  }
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  require_finite(data.inputs, "train inputs");

  TrainResult result;
  result.model =
      init_mlp(static_cast<int>(data.input_dim()), hidden, data.classes, cfg.seed);
  detail::sgd_epochs(result.model, data, cfg.epochs, cfg.learning_rate, cfg.momentum,
                     cfg.batch_size, Rng::derive(cfg.seed, 1), cfg.shuffle,
                     /*direction=*/1.0, &result.epoch_losses);

  const std::vector<int> predicted = predict(result.model, data.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == data.labels[i]) ++correct;
  }
  result.final_train_accuracy = 100.0 * static_cast<double>(correct) / data.size();
  return result;
}

Matrix forward_features(const MlpModel& model, const Matrix& inputs) {
  check_input_dim(model, inputs);
  Matrix current = inputs;
  for (const Layer& layer : model.extractor) current = layer_forward(layer, current);
  return transpose(current);
}

Matrix forward_logits(const MlpModel& model, const Matrix& inputs,
                      const FeatureMap* feature_hook) {
  Matrix features = forward_features(model, inputs);  // d x N
  if (feature_hook) {
    if (feature_hook->dim() != features.rows()) {
      throw std::invalid_argument("forward_logits: hook dimension " +
                                  std::to_string(feature_hook->dim()) +
                                  " does not match feature_dim " +
                                  std::to_string(features.rows()));
    }
    features = feature_hook->apply_columns(features);
  }
  Matrix logits = multiply(model.head_weight, features);  // C x N
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double* row = logits.row(i);
    for (std::size_t j = 0; j < logits.cols(); ++j) row[j] += model.head_bias[i];
  }
  return logits;
}

std::vector<int> predict(const MlpModel& model, const Matrix& inputs,
                         const FeatureMap* feature_hook) {
  const Matrix logits = forward_logits(model, inputs, feature_hook);
  std::vector<int> out(logits.cols());
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.rows(); ++i) {
      if (logits(i, j) > logits(best, j)) best = i;  // ties keep the lowest index
    }
    out[j] = static_cast<int>(best);
  }
  return out;
}

Vector per_sample_cross_entropy(const MlpModel& model, const Matrix& inputs,
                                const std::vector<int>& labels,
                                const FeatureMap* feature_hook) {
  if (labels.size() != inputs.rows()) {
    throw std::invalid_argument("per_sample_cross_entropy: label count mismatch");
  }
  const Matrix logits = forward_logits(model, inputs, feature_hook);
  Vector losses(labels.size(), 0.0);
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    double peak = logits(0, j);
    for (std::size_t i = 1; i < logits.rows(); ++i) peak = std::max(peak, logits(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) sum += std::exp(logits(i, j) - peak);
    losses[j] = -(logits(static_cast<std::size_t>(labels[j]), j) - peak - std::log(sum));
  }
  return losses;
}

double mean_cross_entropy(const MlpModel& model, const Matrix& inputs,
                          const std::vector<int>& labels, const FeatureMap* feature_hook) {
  const Vector losses = per_sample_cross_entropy(model, inputs, labels, feature_hook);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / losses.size();
}

Gradients ce_gradients(const MlpModel& model, const Matrix& inputs,
                       const std::vector<int>& labels) {
  check_input_dim(model, inputs);
  return detail::batch_gradients(model, inputs, labels).grads;
}

namespace {

json layer_to_json(const Layer& layer) {
  std::vector<Vector> rows(layer.weight.rows());
  for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
    rows[i].assign(layer.weight.row(i), layer.weight.row(i) + layer.weight.cols());
  }
  return json{{"w", rows},
              {"b", layer.bias},
              {"act", layer.act == Activation::kRelu ? "relu" : "identity"}};
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  std::vector<Vector> rows;
  try {
    rows = j.get<std::vector<Vector>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint field '" + what + "': " + e.what());
  }
  if (rows.empty()) throw std::runtime_error("checkpoint field '" + what + "' is empty");
  try {
    return Matrix::from_rows(rows);
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint field '" + what + "': " + e.what());
  }
}

}  // namespace

std::string checkpoint_to_string(const MlpModel& model) {
  json extractor = json::array();
  for (const Layer& layer : model.extractor) extractor.push_back(layer_to_json(layer));
  std::vector<Vector> head_rows(model.head_weight.rows());
  for (std::size_t i = 0; i < model.head_weight.rows(); ++i) {
    head_rows[i].assign(model.head_weight.row(i),
                        model.head_weight.row(i) + model.head_weight.cols());
  }
  json j{{"version", 1},
         {"meta",
          {{"input_dim", model.meta.input_dim},
           {"feature_dim", model.meta.feature_dim},
           {"classes", model.meta.classes},
           {"seed", model.meta.seed}}},
         {"extractor", extractor},
         {"head", {{"w", head_rows}, {"b", model.head_bias}}}};
  return j.dump(2);
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << checkpoint_to_string(model) << '\n';
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
  }

  MlpModel model;
  try {
    const int version = j.at("version").get<int>();
    if (version != 1) {
      throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const json& meta = j.at("meta");
    model.meta.input_dim = meta.at("input_dim").get<int>();
    model.meta.feature_dim = meta.at("feature_dim").get<int>();
    model.meta.classes = meta.at("classes").get<int>();
    model.meta.seed = meta.at("seed").get<std::uint64_t>();

    for (const json& jl : j.at("extractor")) {
      Layer layer;
      layer.weight = matrix_from_json(jl.at("w"), "extractor.w");
      layer.bias = jl.at("b").get<Vector>();
      const std::string act = jl.at("act").get<std::string>();
      if (act == "relu") {
        layer.act = Activation::kRelu;
      } else if (act == "identity") {
        layer.act = Activation::kIdentity;
      } else {
        throw std::runtime_error("unknown activation '" + act + "'");
      }
      model.extractor.push_back(std::move(layer));
    }
    model.head_weight = matrix_from_json(j.at("head").at("w"), "head.w");
    model.head_bias = j.at("head").at("b").get<Vector>();
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
  }

  // Dimension chain: input_dim -> layers -> feature_dim -> classes.
  int expected_in = model.meta.input_dim;
  for (std::size_t l = 0; l < model.extractor.size(); ++l) {
    const Layer& layer = model.extractor[l];
    if (static_cast<int>(layer.weight.cols()) != expected_in ||
        layer.bias.size() != layer.weight.rows()) {
      throw std::runtime_error("load_checkpoint: " + path + ": extractor layer " +
                               std::to_string(l) + " has inconsistent dimensions");
    }
    expected_in = static_cast<int>(layer.weight.rows());
  }
  if (expected_in != model.meta.feature_dim) {
    throw std::runtime_error("load_checkpoint: " + path + ": extractor output " +
                             std::to_string(expected_in) + " does not match feature_dim " +
                             std::to_string(model.meta.feature_dim));
  }
  if (static_cast<int>(model.head_weight.rows()) != model.meta.classes ||
      static_cast<int>(model.head_weight.cols()) != model.meta.feature_dim ||
      static_cast<int>(model.head_bias.size()) != model.meta.classes) {
    throw std::runtime_error("load_checkpoint: " + path + ": head dimensions inconsistent");
  }
  for (const Layer& layer : model.extractor) require_finite(layer.weight, "checkpoint weights");
  require_finite(model.head_weight, "checkpoint head weights");
  return model;
}

bool same_architecture(const MlpModel& a, const MlpModel& b) {
  if (a.extractor.size() != b.extractor.size()) return false;
  for (std::size_t l = 0; l < a.extractor.size(); ++l) {
    if (a.extractor[l].weight.rows() != b.extractor[l].weight.rows() ||
        a.extractor[l].weight.cols() != b.extractor[l].weight.cols() ||
        a.extractor[l].act != b.extractor[l].act) {
      return false;
    }
  }
  return a.head_weight.rows() == b.head_weight.rows() &&
         a.head_weight.cols() == b.head_weight.cols();
}

}  // namespace unlearn
