#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unlearn/matrix.hpp"

namespace unlearn {

// Samples as rows plus dense integer class labels in [0, classes).
struct LabeledSet {
  Matrix inputs;             // N x m
  std::vector<int> labels;   // length N
  int classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t input_dim() const { return inputs.cols(); }
};

// Which part of the training set is to be forgotten.
struct ForgetSpec {
  std::vector<int> classes;             // class-wise split
  std::vector<std::size_t> indices;     // index-wise split (random forgetting)
};

struct SplitDataset {
  LabeledSet forget_train;   // D_f
  LabeledSet remain_train;   // D_r
  LabeledSet forget_test;    // D_ft (may be empty for random forgetting)
  LabeledSet remain_test;    // D_rt
  ForgetSpec spec;
};

struct BlobSpec {
  int classes = 10;
  int per_class_train = 500;
  int per_class_test = 100;
  int input_dim = 20;
  double separation = 10.0;
  std::uint64_t seed = 42;
};

// Well-separated Gaussian clusters; returns (train, test). Class means sit on
// a seeded random rotation of a scaled simplex (or hypercube corners when
// classes exceed the dimension), pairwise distance >= separation.
std::pair<LabeledSet, LabeledSet> generate_blobs(const BlobSpec& spec);

SplitDataset split_by_classes(const LabeledSet& train, const LabeledSet& test,
                              const std::vector<int>& forget_classes);

// Uniform sample of floor(fraction * N) train indices as D_f. D_ft stays
// empty and D_rt is the whole test set.
SplitDataset split_random(const LabeledSet& train, const LabeledSet& test, double fraction,
                          std::uint64_t seed);

LabeledSet load_csv(const std::string& path, std::optional<int> declared_classes = {});
void save_csv(const std::string& path, const LabeledSet& set);

LabeledSet concat(const LabeledSet& a, const LabeledSet& b);

struct DatasetManifest {
  int classes = 0;
  int input_dim = 0;
  std::string train;
  std::string test;
  std::uint64_t seed = 0;
};

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

// Loads both CSVs named by a manifest, paths resolved relative to it.
std::pair<LabeledSet, LabeledSet> load_dataset(const std::string& manifest_path);

}  // namespace unlearn
