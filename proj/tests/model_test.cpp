#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/model.hpp"

namespace {

using namespace unlearn;
namespace fs = std::filesystem;
using testutil::random_matrix;

LabeledSet small_blobs(int classes, int per_class, int dim, std::uint64_t seed,
                       double separation = 8.0) {
  BlobSpec spec;
  spec.classes = classes;
  spec.per_class_train = per_class;
  spec.per_class_test = 1;
  spec.input_dim = dim;
  spec.separation = separation;
  spec.seed = seed;
  return generate_blobs(spec).first;
}

TEST(Train, SeparableBlobsReachHighAccuracy) {
  const LabeledSet data = small_blobs(2, 100, 2, 3, 10.0);
  TrainConfig cfg;
  cfg.epochs = 20;
  const TrainResult result = train(data, {8}, cfg);
  EXPECT_GE(result.final_train_accuracy, 99.0);
}

TEST(Train, ZeroLearningRateLeavesInitUntouched) {
  const LabeledSet data = small_blobs(3, 10, 4, 5);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  const TrainResult result = train(data, {6}, cfg);
  const MlpModel fresh = init_mlp(4, {6}, 3, cfg.seed);
  EXPECT_EQ(result.model.extractor[0].weight, fresh.extractor[0].weight);
  EXPECT_EQ(result.model.head_weight, fresh.head_weight);
}

TEST(Train, DeterministicPerSeed) {
  const LabeledSet data = small_blobs(3, 20, 4, 7);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 123;
  const TrainResult a = train(data, {6}, cfg);
  const TrainResult b = train(data, {6}, cfg);
  EXPECT_EQ(a.model.head_weight, b.model.head_weight);
  EXPECT_EQ(a.model.extractor[0].weight, b.model.extractor[0].weight);
  cfg.seed = 124;
  const TrainResult c = train(data, {6}, cfg);
  EXPECT_NE(a.model.head_weight, c.model.head_weight);
}

TEST(Train, MonotoneLossOnFullBatchSmallRate) {
  const LabeledSet data = small_blobs(3, 30, 4, 11);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = static_cast<int>(data.size());
  cfg.learning_rate = 1e-3;
  cfg.momentum = 0.0;
  cfg.shuffle = false;
  const TrainResult result = train(data, {6}, cfg);
  for (std::size_t e = 1; e < result.epoch_losses.size(); ++e) {
    EXPECT_LE(result.epoch_losses[e], result.epoch_losses[e - 1] + 1e-12) << "epoch " << e;
  }
}

TEST(Train, DivergenceNamesEpoch) {
  const LabeledSet data = small_blobs(3, 30, 4, 13);
  TrainConfig cfg;
  cfg.learning_rate = 1e12;
  cfg.epochs = 5;
  try {
    train(data, {6}, cfg);
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

MlpModel identity_model(int dim, Activation act) {
  MlpModel model;
  Layer layer;
  layer.weight = Matrix::identity(dim);
  layer.bias.assign(dim, 0.0);
  layer.act = act;
  model.extractor.push_back(layer);
  model.head_weight = Matrix::identity(dim);
  model.head_bias.assign(dim, 0.0);
  model.meta = {dim, dim, dim, 0};
  return model;
}

TEST(ForwardFeatures, IdentityLayerTransposesInput) {
  const MlpModel model = identity_model(3, Activation::kIdentity);
  const Matrix inputs = random_matrix(5, 3, 17);
  const Matrix features = forward_features(model, inputs);
  ASSERT_EQ(features.rows(), 3u);
  ASSERT_EQ(features.cols(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(features(j, i), inputs(i, j));
  }
}

TEST(ForwardFeatures, BatchIndependence) {
  const MlpModel model = init_mlp(4, {6, 5}, 3, 19);
  const Matrix inputs = random_matrix(8, 4, 21);
  const Matrix batch_features = forward_features(model, inputs);
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    Matrix single(1, 4);
    for (std::size_t j = 0; j < 4; ++j) single(0, j) = inputs(i, j);
    const Matrix one = forward_features(model, single);
    for (std::size_t j = 0; j < one.rows(); ++j) {
      EXPECT_NEAR(one(j, 0), batch_features(j, i), 1e-12);
    }
  }
}

TEST(ForwardFeatures, ReluKillsNegatedPositiveSample) {
  const MlpModel model = identity_model(4, Activation::kRelu);
  Matrix inputs(1, 4);
  for (std::size_t j = 0; j < 4; ++j) inputs(0, j) = -(1.0 + static_cast<double>(j));
  const Matrix features = forward_features(model, inputs);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(features(j, 0), 0.0);
}

TEST(ForwardLogits, FullBasisHookMatchesNoHook) {
  const MlpModel model = init_mlp(4, {6}, 3, 23);
  const Matrix inputs = random_matrix(10, 4, 29);
  const Matrix basis = testutil::random_orthonormal(6, 6, 31);
  const FeatureMap hook{multiply(basis, transpose(basis))};
  const Matrix plain = forward_logits(model, inputs);
  const Matrix hooked = forward_logits(model, inputs, &hook);
  EXPECT_LE(max_abs_diff(plain, hooked), 1e-10);
}

TEST(ForwardLogits, ZeroHookGivesBiasBroadcast) {
  MlpModel model = init_mlp(4, {6}, 3, 37);
  model.head_bias = {0.5, -1.0, 2.0};
  const FeatureMap zero{Matrix(6, 6)};
  const Matrix logits = forward_logits(model, random_matrix(4, 4, 39), &zero);
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    EXPECT_DOUBLE_EQ(logits(0, j), 0.5);
    EXPECT_DOUBLE_EQ(logits(1, j), -1.0);
    EXPECT_DOUBLE_EQ(logits(2, j), 2.0);
  }
}

TEST(ForwardLogits, ArgmaxReproducesLoggedTrainAccuracy) {
  const LabeledSet data = small_blobs(3, 40, 4, 41);
  TrainConfig cfg;
  cfg.epochs = 10;
  const TrainResult result = train(data, {6}, cfg);
  const std::vector<int> predicted = predict(result.model, data.inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == data.labels[i]) ++hits;
  }
  EXPECT_DOUBLE_EQ(100.0 * static_cast<double>(hits) / data.size(),
                   result.final_train_accuracy);
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  // 2-layer model, d <= 8, against (L(p+h) - L(p-h)) / 2h for every
  // parameter.
  const double h = 1e-5;
  MlpModel model = init_mlp(5, {6, 4}, 3, 43);
  const Matrix inputs = random_matrix(6, 5, 47);
  std::vector<int> labels = {0, 1, 2, 0, 1, 2};

  const Gradients analytic = ce_gradients(model, inputs, labels);

  auto loss_at = [&]() { return mean_cross_entropy(model, inputs, labels); };
  auto check = [&](double& param, double grad, const std::string& what) {
    const double saved = param;
    param = saved + h;
    const double up = loss_at();
    param = saved - h;
    const double down = loss_at();
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(grad), std::abs(fd), 1e-8});
    EXPECT_LE(std::abs(grad - fd) / denom, 1e-4) << what;
  };

  for (std::size_t l = 0; l < model.extractor.size(); ++l) {
    for (std::size_t i = 0; i < model.extractor[l].weight.data().size(); ++i) {
      check(model.extractor[l].weight.data()[i], analytic.extractor[l].weight.data()[i],
            "layer " + std::to_string(l) + " w" + std::to_string(i));
    }
    for (std::size_t i = 0; i < model.extractor[l].bias.size(); ++i) {
      check(model.extractor[l].bias[i], analytic.extractor[l].bias[i],
            "layer " + std::to_string(l) + " b" + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < model.head_weight.data().size(); ++i) {
    check(model.head_weight.data()[i], analytic.head_weight.data()[i],
          "head w" + std::to_string(i));
  }
  for (std::size_t i = 0; i < model.head_bias.size(); ++i) {
    check(model.head_bias[i], analytic.head_bias[i], "head b" + std::to_string(i));
  }
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("unlearn_model_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsBitIdentical) {
  const LabeledSet data = small_blobs(3, 20, 4, 53);
  TrainConfig cfg;
  cfg.epochs = 3;
  const TrainResult result = train(data, {6, 5}, cfg);
  save_checkpoint(result.model, path("m.json"));
  const MlpModel loaded = load_checkpoint(path("m.json"));
  EXPECT_EQ(loaded.head_weight, result.model.head_weight);
  EXPECT_EQ(loaded.head_bias, result.model.head_bias);
  ASSERT_EQ(loaded.extractor.size(), result.model.extractor.size());
  for (std::size_t l = 0; l < loaded.extractor.size(); ++l) {
    EXPECT_EQ(loaded.extractor[l].weight, result.model.extractor[l].weight);
    EXPECT_EQ(loaded.extractor[l].bias, result.model.extractor[l].bias);
  }
  EXPECT_EQ(loaded.meta.seed, result.model.meta.seed);

  const Matrix probe = random_matrix(4, 4, 59);
  EXPECT_EQ(forward_logits(loaded, probe), forward_logits(result.model, probe));
}

TEST_F(CheckpointTest, TruncatedFileRejected) {
  const MlpModel model = init_mlp(3, {4}, 2, 61);
  save_checkpoint(model, path("full.json"));
  std::ifstream in(path("full.json"));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream out(path("cut.json"));
  out << text.substr(0, text.size() / 2);
  out.close();
  EXPECT_THROW(load_checkpoint(path("cut.json")), std::runtime_error);
}

TEST_F(CheckpointTest, VersionMismatchRejected) {
  std::ofstream out(path("v2.json"));
  out << R"({"version": 2, "meta": {}, "extractor": [], "head": {}})";
  out.close();
  try {
    load_checkpoint(path("v2.json"));
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST_F(CheckpointTest, DimensionMismatchRejected) {
  MlpModel model = init_mlp(3, {4}, 2, 67);
  model.meta.feature_dim = 9;  // no longer matches the extractor
  save_checkpoint(model, path("bad.json"));
  EXPECT_THROW(load_checkpoint(path("bad.json")), std::runtime_error);
}

}  // namespace
