#include "unlearn/esc_t.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "unlearn/rng.hpp"
#include "model_internal.hpp"

namespace unlearn {

namespace {

std::size_t argmax_lowest(const double* values, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// out = x * y, written into a preallocated buffer. Plain ikj so the inner
// loop vectorizes.
void mm(const Matrix& x, const Matrix& y, Matrix& out) {
  std::fill(out.data().begin(), out.data().end(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* out_row = out.row(i);
    const double* x_row = x.row(i);
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = x_row[k];
      const double* y_row = y.row(k);
      for (std::size_t j = 0; j < y.cols(); ++j) out_row[j] += xik * y_row[j];
    }
  }
}


// Masked basis, its transpose, and the fused head H = W_head * A; logits of
// a sample reduce to (A^T z)^T H^T + bias, so the projected feature is never
// materialized.
struct MaskScratch {
  Matrix a;       // U (.) M
  Matrix a_t;
  Matrix head_t;  // d x C, fixed for the run
  Matrix h_t;     // d x C, A^T head^T

  explicit MaskScratch(const Matrix& head_weight)
      : a(head_weight.cols(), head_weight.cols()),
        a_t(head_weight.cols(), head_weight.cols()),
        head_t(transpose(head_weight)),
        h_t(head_weight.cols(), head_weight.rows()) {}

  void rebuild(const Matrix& u, const Matrix& mask) {
    const std::size_t d = a.rows();
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double value = u(i, j) * mask(i, j);
        a(i, j) = value;
        a_t(j, i) = value;
      }
    }
    mm(a_t, head_t, h_t);
  }
};


struct BatchScratch {
  Matrix w;       // B x d, rows (A^T z)^T
  Matrix logits;  // B x C
  Matrix gmat;    // rows head^T dlogits, correct samples only
  Matrix vmat;    // rows (A^T g)^T
  Matrix grad;    // d x d accumulator
  std::vector<std::size_t> correct;  // positions within the batch

  BatchScratch(std::size_t batch, std::size_t d, std::size_t classes)
      : w(batch, d), logits(batch, classes), gmat(batch, d), vmat(batch, d), grad(d, d) {}
};

// Logits for the selected feature rows under the masked basis; records which
// batch positions the model still classifies correctly. Returns that count.
std::size_t batch_logits_pass(const MlpModel& model, const MaskScratch& s, BatchScratch& b,
                              const Matrix& feature_rows, const std::size_t* ids,
                              std::size_t count, const std::vector<int>& labels) {
  const std::size_t d = s.a.rows();
  const std::size_t classes = b.logits.cols();
  for (std::size_t r = 0; r < count; ++r) {
    const double* z = feature_rows.row(ids[r]);
    double* w_row = b.w.row(r);
    std::fill(w_row, w_row + d, 0.0);
    // z^T A and (z^T A) (A^T head^T) in one sweep over the rows of A.
    for (std::size_t k = 0; k < d; ++k) {
      const double zk = z[k];
      const double* a_row = s.a.row(k);
      for (std::size_t j = 0; j < d; ++j) w_row[j] += zk * a_row[j];
    }
    double* l_row = b.logits.row(r);
    std::fill(l_row, l_row + classes, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const double wk = w_row[k];
      const double* ht_row = s.h_t.row(k);
      for (std::size_t c = 0; c < classes; ++c) l_row[c] += wk * ht_row[c];
    }
    for (std::size_t c = 0; c < classes; ++c) l_row[c] += model.head_bias[c];
  }

  b.correct.clear();
  for (std::size_t r = 0; r < count; ++r) {
    const double* row = b.logits.row(r);
    for (std::size_t c = 0; c < classes; ++c) {
      if (!std::isfinite(row[c])) {
        throw std::runtime_error("mask_gradient: non-finite logits at sample " +
                                 std::to_string(r));
      }
    }
    if (argmax_lowest(row, classes) == static_cast<std::size_t>(labels[ids[r]])) {
      b.correct.push_back(r);
    }
  }
  return b.correct.size();
}

// Summed PCE gradient over the selected rows, written into b.grad (before
// the elementwise U factor). batch_logits_pass must have run on this state.
// The two rank-one families (g z^T + z g^T) A collapse into per-sample
// outer products with w = A^T z and v = A^T g.
void pce_gradient_on_features(const MlpModel& model, const MaskScratch& s, BatchScratch& b,
                              const Matrix& feature_rows, const std::size_t* ids,
                              const std::vector<int>& labels) {
  const std::size_t d = s.a.rows();
  const std::size_t classes = b.logits.cols();
  std::fill(b.grad.data().begin(), b.grad.data().end(), 0.0);
  for (std::size_t r : b.correct) {
    const double* row = b.logits.row(r);
    const auto label = static_cast<std::size_t>(labels[ids[r]]);
    const double peak = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - peak);
    double* g_row = b.gmat.row(r);
    std::fill(g_row, g_row + d, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
      const double dlogit = ((c == label) ? 1.0 : 0.0) - std::exp(row[c] - peak) / sum;
      const double* head_row = model.head_weight.row(c);
      for (std::size_t i = 0; i < d; ++i) g_row[i] += head_row[i] * dlogit;
    }
    double* v_row = b.vmat.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const double* at_row = s.a_t.row(j);
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += at_row[i] * g_row[i];
      v_row[j] = acc;
    }
  }
  // Rank-one terms summed with the gradient row as the outer loop, so each
  // output row is written once per batch rather than once per sample.
  for (std::size_t i = 0; i < d; ++i) {
    double* grad_row = b.grad.row(i);
    for (std::size_t r : b.correct) {
      const double gi = b.gmat.row(r)[i];
      const double zi = feature_rows.row(ids[r])[i];
      const double* w_row = b.w.row(r);
      const double* v_row = b.vmat.row(r);
      for (std::size_t j = 0; j < d; ++j) grad_row[j] += gi * w_row[j] + zi * v_row[j];
    }
  }
}

}  // namespace

double pce_loss(const Vector& logits, int label) {
  if (logits.empty()) throw std::invalid_argument("pce_loss: empty logits");
  const std::size_t predicted = argmax_lowest(logits.data(), logits.size());
  if (predicted != static_cast<std::size_t>(label)) return 0.0;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - peak);
  const double ce = -(logits[static_cast<std::size_t>(label)] - peak - std::log(sum));
  return -ce;
}

Matrix mask_gradient(const MlpModel& model, const Matrix& u, const Matrix& mask,
                     const Matrix& batch_inputs, const std::vector<int>& batch_labels) {
  if (u.rows() != u.cols() || static_cast<int>(u.rows()) != model.meta.feature_dim) {
    throw std::invalid_argument("mask_gradient: basis must be feature_dim x feature_dim");
  }
  if (mask.rows() != u.rows() || mask.cols() != u.cols()) {
    throw std::invalid_argument("mask_gradient: mask shape does not match basis");
  }
  if (batch_labels.size() != batch_inputs.rows()) {
    throw std::invalid_argument("mask_gradient: label count mismatch");
  }
  const Matrix feature_rows = transpose(forward_features(model, batch_inputs));
  MaskScratch scratch(model.head_weight);
  scratch.rebuild(u, mask);
  BatchScratch batch(feature_rows.rows(), u.rows(), model.head_weight.rows());
  std::vector<std::size_t> ids(feature_rows.rows());
  std::iota(ids.begin(), ids.end(), 0);
  batch_logits_pass(model, scratch, batch, feature_rows, ids.data(), ids.size(),
                    batch_labels);
  pce_gradient_on_features(model, scratch, batch, feature_rows, ids.data(), batch_labels);
  Matrix grad = hadamard(batch.grad, u);
  const double inv = 1.0 / static_cast<double>(batch_inputs.rows());
  for (double& g : grad.data()) g *= inv;
  return grad;
}

MaskTrainResult train_mask(const MlpModel& model, const Matrix& u, const LabeledSet& forget,
                           const EscTConfig& cfg, const FeatureMap* feature_hook) {
  if (forget.empty()) throw std::invalid_argument("train_mask: forgetting set is empty");
  if (cfg.epochs < 1) throw std::invalid_argument("train_mask: epochs must be >= 1");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) {
    throw std::invalid_argument("train_mask: tau must lie in (0, 1)");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("train_mask: batch_size must be >= 1");
  if (cfg.learning_rate < 0.0) {
    throw std::invalid_argument("train_mask: learning_rate must be >= 0");
  }
  if (u.rows() != u.cols() || static_cast<int>(u.rows()) != model.meta.feature_dim) {
    throw std::invalid_argument("train_mask: basis must be feature_dim x feature_dim");
  }

  const std::size_t d = u.rows();
  // The extractor is frozen, so features are computed once; rows = samples.
  Matrix feature_rows = detail::feature_rows_for(model, forget.inputs);
  if (feature_hook) {
    feature_rows = transpose(feature_hook->apply_columns(transpose(feature_rows)));
  }

  MaskTrainResult result;
  Matrix mask(d, d, 1.0);
  const std::size_t classes = model.head_weight.rows();
  MaskScratch scratch(model.head_weight);
  const auto stride = std::min<std::size_t>(cfg.batch_size, forget.size());
  BatchScratch batch(stride, d, classes);

  std::vector<std::size_t> order(forget.size());
  std::iota(order.begin(), order.end(), 0);

  scratch.rebuild(u, mask);
  bool degenerate = false;
  {
    BatchScratch full(forget.size(), d, classes);
    degenerate = batch_logits_pass(model, scratch, full, feature_rows, order.data(),
                                   order.size(), forget.labels) == 0;
  }

  if (degenerate) {
    // Every forgetting sample is already misclassified: stop before any step.
    result.stats.early_stopped = true;
  } else {
    Rng rng(Rng::derive(cfg.seed, 3));
    bool scratch_stale = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::size_t epoch_correct = 0;
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += stride) {
        const std::size_t end = std::min(order.size(), start + stride);
        const std::size_t count = end - start;
        if (scratch_stale) {
          scratch.rebuild(u, mask);
          scratch_stale = false;
        }
        const std::size_t correct = batch_logits_pass(
            model, scratch, batch, feature_rows, order.data() + start, count,
            forget.labels);
        ++result.stats.steps;
        if (correct > 0) {
          epoch_correct += correct;
          pce_gradient_on_features(model, scratch, batch, feature_rows,
                                   order.data() + start, forget.labels);
          const double scale = cfg.learning_rate / static_cast<double>(count);
          double lo = 1.0;
          double hi = 0.0;
          for (std::size_t i = 0; i < mask.data().size(); ++i) {
            const double value = std::clamp(
                mask.data()[i] - scale * batch.grad.data()[i] * u.data()[i], 0.0, 1.0);
            mask.data()[i] = value;
            lo = std::min(lo, value);
            hi = std::max(hi, value);
          }
          result.stats.min_after_update = std::min(result.stats.min_after_update, lo);
          result.stats.max_after_update = std::max(result.stats.max_after_update, hi);
          scratch_stale = true;
        }
      }
      ++result.stats.epochs_run;
      // An epoch that applied no update certifies that every sample was
      // misclassified at the epoch-boundary mask, which is the stop rule.
      if (epoch_correct == 0) {
        result.stats.early_stopped = true;
        break;
      }
    }
  }

  result.state.m = mask;
  result.state.binarized = true;
  result.state.m_r = Matrix(d, d);
  for (std::size_t i = 0; i < mask.data().size(); ++i) {
    result.state.m_r.data()[i] = (mask.data()[i] > cfg.tau) ? 1.0 : 0.0;
  }
  return result;
}

RefinedBasis refine(const Matrix& u, const Matrix& m_r) {
  if (u.rows() != u.cols()) throw std::invalid_argument("refine: basis must be square");
  if (m_r.rows() != u.rows() || m_r.cols() != u.cols()) {
    throw std::invalid_argument("refine: mask shape does not match basis");
  }
  for (double v : m_r.data()) {
    if (v != 0.0 && v != 1.0) {
      throw std::invalid_argument("refine: mask entries must be 0 or 1");
    }
  }
  return {u, m_r, hadamard(u, m_r)};
}

Vector esc_t_apply(const RefinedBasis& basis, const Vector& z) {
  if (z.size() != basis.u_r.rows()) {
    throw std::invalid_argument("esc_t_apply: vector length " + std::to_string(z.size()) +
                                " does not match feature dimension " +
                                std::to_string(basis.u_r.rows()));
  }
  const Vector w = multiply(transpose(basis.u_r), z);
  return multiply(basis.u_r, w);
}

FeatureMap to_feature_map(const RefinedBasis& basis) {
  return {multiply(basis.u_r, transpose(basis.u_r))};
}

}  // namespace unlearn
