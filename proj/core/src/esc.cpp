#include "unlearn/esc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unlearn {

std::size_t compute_k(double p, std::size_t d) {
  if (!(p >= 0.0 && p < 100.0)) {
    throw std::invalid_argument("compute_k: p must lie in [0, 100)");
  }
  if (d < 1) throw std::invalid_argument("compute_k: d must be >= 1");
  if (p == 0.0) return 0;
  const double exact = static_cast<double>(d) * p / 100.0;
  auto k = static_cast<std::size_t>(std::nearbyint(exact));  // ties to even
  if (k < 1) k = 1;
  if (k >= d) k = d - 1;
  return k;
}

PrunedBasis esc_fit(const MlpModel& model, const Matrix& forget_inputs, const EscConfig& cfg,
                    const FeatureMap* feature_hook) {
  if (forget_inputs.rows() == 0) {
    throw std::invalid_argument("esc_fit: forgetting inputs are empty");
  }
  Matrix features = forward_features(model, forget_inputs);  // d x N
  if (feature_hook) features = feature_hook->apply_columns(features);
  if (cfg.center) {
    for (std::size_t i = 0; i < features.rows(); ++i) {
      double* row = features.row(i);
      double mean = 0.0;
      for (std::size_t j = 0; j < features.cols(); ++j) mean += row[j];
      mean /= static_cast<double>(features.cols());
      for (std::size_t j = 0; j < features.cols(); ++j) row[j] -= mean;
    }
  }
  SvdBasis svd = svd_complete(features);

  PrunedBasis out;
  out.k = compute_k(cfg.p, svd.u.cols());
  out.u_p = select_columns(svd.u, out.k, svd.u.cols());
  out.u = std::move(svd.u);
  return out;
}

Vector esc_apply(const PrunedBasis& basis, const Vector& z) {
  if (z.size() != basis.u_p.rows()) {
    throw std::invalid_argument("esc_apply: vector length " + std::to_string(z.size()) +
                                " does not match feature dimension " +
                                std::to_string(basis.u_p.rows()));
  }
  return projector_apply(basis.u_p, z);
}

FeatureMap to_feature_map(const PrunedBasis& basis) {
  return {multiply(basis.u_p, transpose(basis.u_p))};
}

}  // namespace unlearn
