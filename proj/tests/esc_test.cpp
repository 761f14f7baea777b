#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/esc.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/model.hpp"
#include "unlearn/transform.hpp"

namespace {

using namespace unlearn;
using testutil::random_matrix;
using testutil::random_orthonormal;
using testutil::random_vector;

TEST(ComputeK, PaperValuesAndRounding) {
  EXPECT_EQ(compute_k(50.0, 200), 100u);
  EXPECT_EQ(compute_k(0.0, 512), 0u);
  EXPECT_EQ(compute_k(1.7, 512), 9u);   // 8.704 rounds up
  EXPECT_EQ(compute_k(1.7, 32), 1u);    // 0.544 floors at one direction
  EXPECT_EQ(compute_k(3.0, 32), 1u);    // 0.96 rounds to 1
  EXPECT_EQ(compute_k(2.5, 100), 2u);   // half rounds to even
  EXPECT_EQ(compute_k(3.5, 100), 4u);
  EXPECT_EQ(compute_k(99.0, 3), 2u);    // capped below d
  EXPECT_THROW(compute_k(-1.0, 8), std::invalid_argument);
  EXPECT_THROW(compute_k(100.0, 8), std::invalid_argument);
}

struct DeskSetup {
  LabeledSet train;
  LabeledSet test;
  SplitDataset split;
  MlpModel model;
};

DeskSetup small_experiment(std::uint64_t seed) {
  BlobSpec spec;
  spec.classes = 4;
  spec.per_class_train = 60;
  spec.per_class_test = 20;
  spec.input_dim = 8;
  spec.separation = 7.0;
  spec.seed = seed;
  DeskSetup setup;
  std::tie(setup.train, setup.test) = generate_blobs(spec);
  setup.split = split_by_classes(setup.train, setup.test, {0});
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.seed = seed + 1;
  setup.model = train(setup.train, {16, 8}, cfg).model;
  return setup;
}

TEST(EscFit, ZeroPruningReproducesOriginalLogits) {
  const DeskSetup setup = small_experiment(3);
  const PrunedBasis basis = esc_fit(setup.model, setup.split.forget_train.inputs, {0.0, false});
  EXPECT_EQ(basis.k, 0u);
  const FeatureMap map = to_feature_map(basis);

  const Matrix probe = random_matrix(200, 8, 7);
  const Matrix plain = forward_logits(setup.model, probe);
  const Matrix wrapped = forward_logits(setup.model, probe, &map);
  EXPECT_LE(max_abs_diff(plain, wrapped), 1e-6);
}

TEST(EscFit, RankOneForgettingSubspaceVanishes) {
  // Identity extractor and forget inputs on a single line: pruning one
  // direction must annihilate the features.
  MlpModel model;
  Layer layer;
  layer.weight = Matrix::identity(4);
  layer.bias.assign(4, 0.0);
  layer.act = Activation::kIdentity;
  model.extractor.push_back(layer);
  model.head_weight = Matrix::identity(4);
  model.head_bias.assign(4, 0.0);
  model.meta = {4, 4, 4, 0};

  const Vector direction = {0.5, -0.5, 0.5, 0.5};
  Matrix inputs(10, 4);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      inputs(i, j) = (1.0 + static_cast<double>(i)) * direction[j];
    }
  }
  const PrunedBasis basis = esc_fit(model, inputs, {25.0, false});  // k = 1
  ASSERT_EQ(basis.k, 1u);
  for (std::size_t i = 0; i < 10; ++i) {
    Vector z(4);
    for (std::size_t j = 0; j < 4; ++j) z[j] = inputs(i, j);
    const Vector projected = esc_apply(basis, z);
    EXPECT_LE(norm(projected), 1e-6 * norm(z));
  }
}

TEST(EscFit, DeskScaleForgettingTrend) {
  const DeskSetup setup = small_experiment(11);
  const auto original_forget = accuracy(setup.model, nullptr, setup.split.forget_train);
  const auto original_remain = accuracy(setup.model, nullptr, setup.split.remain_train);
  ASSERT_TRUE(original_forget && original_remain);
  EXPECT_GE(*original_forget, 95.0);

  // d = 8, p = 13 gives k = 1.
  const PrunedBasis basis = esc_fit(setup.model, setup.split.forget_train.inputs, {13.0, false});
  ASSERT_EQ(basis.k, 1u);
  const FeatureMap map = to_feature_map(basis);
  const auto esc_forget = accuracy(setup.model, &map, setup.split.forget_train);
  const auto esc_remain = accuracy(setup.model, &map, setup.split.remain_train);
  EXPECT_LE(*esc_forget, 10.0);
  EXPECT_GE(*esc_remain, *original_remain - 10.0);
}

TEST(EscFit, DoesNotTouchParameters) {
  const DeskSetup setup = small_experiment(13);
  const std::string before = checkpoint_to_string(setup.model);
  esc_fit(setup.model, setup.split.forget_train.inputs, {10.0, false});
  EXPECT_EQ(checkpoint_to_string(setup.model), before);
}

TEST(EscFit, CenteringFlagChangesBasis) {
  const DeskSetup setup = small_experiment(17);
  const PrunedBasis plain = esc_fit(setup.model, setup.split.forget_train.inputs, {13.0, false});
  const PrunedBasis centered =
      esc_fit(setup.model, setup.split.forget_train.inputs, {13.0, true});
  EXPECT_GT(max_abs_diff(plain.u, centered.u), 1e-6);
}

TEST(EscApply, RetainedAndPrunedDirections) {
  const Matrix u = random_orthonormal(8, 8, 23);
  PrunedBasis basis;
  basis.u = u;
  basis.k = 2;
  basis.u_p = select_columns(u, 2, 8);

  Vector pruned_direction(8), retained_direction(8);
  for (std::size_t i = 0; i < 8; ++i) {
    pruned_direction[i] = u(i, 0);
    retained_direction[i] = u(i, 7);
  }
  const Vector zeroed = esc_apply(basis, pruned_direction);
  EXPECT_LE(norm(zeroed), 1e-8);
  const Vector kept = esc_apply(basis, retained_direction);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(kept[i], retained_direction[i], 1e-8);
}

TEST(EscApply, IdempotentAndPythagoras) {
  const Matrix u = random_orthonormal(16, 16, 29);
  PrunedBasis basis;
  basis.u = u;
  basis.k = 5;
  basis.u_p = select_columns(u, 5, 16);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector z = random_vector(16, 100 + seed);
    const Vector once = esc_apply(basis, z);
    const Vector twice = esc_apply(basis, once);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(twice[i], once[i], 1e-10);

    // ||z||^2 splits between the retained projection and the pruned part.
    const Matrix pruned_cols = select_columns(u, 0, 5);
    const Vector pruned_part = projector_apply(pruned_cols, z);
    const double total = dot(z, z);
    const double split = dot(once, once) + dot(pruned_part, pruned_part);
    EXPECT_NEAR(total, split, 1e-8 * std::max(1.0, total));
  }
}

TEST(Merge, MatchesSequentialApplication) {
  const Matrix u1 = random_orthonormal(12, 12, 31);
  const Matrix u2 = random_orthonormal(12, 12, 37);
  const FeatureMap first{multiply(select_columns(u1, 1, 12), transpose(select_columns(u1, 1, 12)))};
  const FeatureMap second{multiply(select_columns(u2, 2, 12), transpose(select_columns(u2, 2, 12)))};
  const FeatureMap merged = merge(first, second);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Vector z = random_vector(12, 200 + seed);
    const Vector sequential = second.apply(first.apply(z));
    const Vector direct = merged.apply(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(direct[i], sequential[i], 1e-10);
  }
}

TEST(Merge, IdentityOperandIsNeutral) {
  const Matrix u = random_orthonormal(6, 6, 41);
  const FeatureMap projector{multiply(select_columns(u, 1, 6), transpose(select_columns(u, 1, 6)))};
  const FeatureMap identity = FeatureMap::identity(6);
  const Vector z = random_vector(6, 43);
  const Vector a = merge(identity, projector).apply(z);
  const Vector b = merge(projector, identity).apply(z);
  const Vector direct = projector.apply(z);
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(a[i], direct[i], 1e-10);
    EXPECT_NEAR(b[i], direct[i], 1e-10);
  }
}

TEST(Merge, AssociativeComposition) {
  const FeatureMap a{random_matrix(5, 5, 47, 0.5)};
  const FeatureMap b{random_matrix(5, 5, 53, 0.5)};
  const FeatureMap c{random_matrix(5, 5, 59, 0.5)};
  const Vector z = random_vector(5, 61);
  const Vector left = merge(merge(a, b), c).apply(z);
  const Vector right = merge(a, merge(b, c)).apply(z);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(left[i], right[i], 1e-10);
  EXPECT_THROW(merge(a, FeatureMap::identity(7)), std::invalid_argument);
}

TEST(Merge, SequentialTwoClassUnlearning) {
  const DeskSetup setup = small_experiment(67);
  // Forget class 0, then class 1 on top of the first erasure. At d = 8 each
  // class needs two pruned directions (p = 25) to vanish.
  const SplitDataset first_split = split_by_classes(setup.train, setup.test, {0});
  const PrunedBasis first =
      esc_fit(setup.model, first_split.forget_train.inputs, {25.0, false});
  const FeatureMap map1 = to_feature_map(first);

  const SplitDataset second_split = split_by_classes(setup.train, setup.test, {1});
  const PrunedBasis second =
      esc_fit(setup.model, second_split.forget_train.inputs, {25.0, false}, &map1);
  const FeatureMap merged = merge(map1, to_feature_map(second));

  const SplitDataset both = split_by_classes(setup.train, setup.test, {0, 1});
  const auto forget_acc = accuracy(setup.model, &merged, both.forget_train);
  const auto remain_acc = accuracy(setup.model, &merged, both.remain_train);
  const auto original_remain = accuracy(setup.model, nullptr, both.remain_train);
  ASSERT_TRUE(forget_acc && remain_acc && original_remain);
  EXPECT_LE(*forget_acc, 10.0);
  EXPECT_GE(*remain_acc, *original_remain - 10.0);
}

TEST(CosineDisentanglement, ProjectedForgetMeansLoseAlignment) {
  const DeskSetup setup = small_experiment(71);
  const PrunedBasis basis = esc_fit(setup.model, setup.split.forget_train.inputs, {13.0, false});
  const FeatureMap map = to_feature_map(basis);

  const auto original = features_by_class(setup.model, nullptr, setup.train);
  const auto erased = features_by_class(setup.model, &map, setup.train);
  const Matrix within = class_cosine_matrix(original);
  const Matrix cross = class_cosine_matrix(original, erased);

  double min_off_diagonal = 1.0;
  for (std::size_t i = 0; i < within.rows(); ++i) {
    for (std::size_t j = 0; j < within.cols(); ++j) {
      if (i != j) min_off_diagonal = std::min(min_off_diagonal, within(i, j));
    }
  }
  // Class 0 was forgotten: its original-vs-erased alignment drops below the
  // weakest original inter-class alignment.
  EXPECT_LT(cross(0, 0), min_off_diagonal);
}

}  // namespace
