#include "unlearn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "unlearn/rng.hpp"
#include "unlearn/svd.hpp"

namespace unlearn {

namespace {

using nlohmann::json;

LabeledSet take_rows(const LabeledSet& src, const std::vector<std::size_t>& rows) {
  LabeledSet out;
  out.classes = src.classes;
  out.inputs = Matrix(rows.size(), src.inputs.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* from = src.inputs.row(rows[i]);
    double* to = out.inputs.row(i);
    std::copy(from, from + src.inputs.cols(), to);
    out.labels.push_back(src.labels[rows[i]]);
  }
  return out;
}

std::pair<LabeledSet, LabeledSet> partition_by_class(const LabeledSet& set,
                                                     const std::set<int>& forget) {
  std::vector<std::size_t> in, out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    (forget.count(set.labels[i]) ? in : out).push_back(i);
  }
  return {take_rows(set, in), take_rows(set, out)};
}

void fill_gaussian_rows(Matrix& inputs, std::vector<int>& labels, const Matrix& means,
                        int per_class, Rng& rng) {
  const std::size_t dim = means.cols();
  std::size_t row = 0;
  for (std::size_t c = 0; c < means.rows(); ++c) {
    for (int n = 0; n < per_class; ++n, ++row) {
      double* out = inputs.row(row);
      const double* mean = means.row(c);
      for (std::size_t j = 0; j < dim; ++j) out[j] = mean[j] + rng.normal();
      labels[row] = static_cast<int>(c);
    }
  }
}

}  // namespace

std::pair<LabeledSet, LabeledSet> generate_blobs(const BlobSpec& spec) {
  if (spec.classes < 1 || spec.per_class_train < 1 || spec.per_class_test < 1 ||
      spec.input_dim < 1) {
    throw std::invalid_argument("generate_blobs: all counts must be >= 1");
  }
  if (spec.separation <= 0.0) {
    throw std::invalid_argument("generate_blobs: separation must be positive");
  }
  const int dim = spec.input_dim;
  if (dim < 63 && static_cast<std::uint64_t>(spec.classes) > (std::uint64_t{1} << dim)) {
    throw std::invalid_argument(
        "generate_blobs: cannot place " + std::to_string(spec.classes) + " class means in " +
        std::to_string(dim) + " dimensions; raise input_dim");
  }

  // Class means: scaled simplex on the standard basis when it fits, otherwise
  // distinct hypercube corners (minimum pairwise distance = separation), then
  // centered and passed through a seeded random rotation.
  Matrix means(spec.classes, dim);
  if (spec.classes <= dim) {
    const double scale = spec.separation / std::sqrt(2.0);
    for (int c = 0; c < spec.classes; ++c) means(c, c) = scale;
  } else {
    for (int c = 0; c < spec.classes; ++c) {
      for (int j = 0; j < dim; ++j) {
        if ((static_cast<std::uint64_t>(c) >> j) & 1ULL) means(c, j) = spec.separation;
      }
    }
  }
  for (int j = 0; j < dim; ++j) {
    double centroid = 0.0;
    for (int c = 0; c < spec.classes; ++c) centroid += means(c, j);
    centroid /= spec.classes;
    for (int c = 0; c < spec.classes; ++c) means(c, j) -= centroid;
  }
  const Matrix rotation =
      orthonormal_complete(Matrix(static_cast<std::size_t>(dim), 0), Rng::derive(spec.seed, 0));
  means = multiply(means, transpose(rotation));

  LabeledSet train, test;
  train.classes = test.classes = spec.classes;
  train.inputs = Matrix(static_cast<std::size_t>(spec.classes) * spec.per_class_train, dim);
  train.labels.resize(train.inputs.rows());
  test.inputs = Matrix(static_cast<std::size_t>(spec.classes) * spec.per_class_test, dim);
  test.labels.resize(test.inputs.rows());

  Rng train_rng(Rng::derive(spec.seed, 1));
  Rng test_rng(Rng::derive(spec.seed, 2));
  fill_gaussian_rows(train.inputs, train.labels, means, spec.per_class_train, train_rng);
  fill_gaussian_rows(test.inputs, test.labels, means, spec.per_class_test, test_rng);
  return {std::move(train), std::move(test)};
}

SplitDataset split_by_classes(const LabeledSet& train, const LabeledSet& test,
                              const std::vector<int>& forget_classes) {
  if (forget_classes.empty()) {
    throw std::invalid_argument("split_by_classes: forget class list is empty");
  }
  std::set<int> forget(forget_classes.begin(), forget_classes.end());
  for (int c : forget) {
    if (c < 0 || c >= train.classes) {
      throw std::invalid_argument("split_by_classes: class " + std::to_string(c) +
                                  " outside [0, " + std::to_string(train.classes) + ")");
    }
  }
  std::set<int> present(train.labels.begin(), train.labels.end());
  if (std::includes(forget.begin(), forget.end(), present.begin(), present.end())) {
    throw std::invalid_argument("split_by_classes: forget classes cover every class present");
  }

  SplitDataset out;
  std::tie(out.forget_train, out.remain_train) = partition_by_class(train, forget);
  std::tie(out.forget_test, out.remain_test) = partition_by_class(test, forget);
  out.spec.classes.assign(forget.begin(), forget.end());
  return out;
}

SplitDataset split_random(const LabeledSet& train, const LabeledSet& test, double fraction,
                          std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split_random: fraction must lie in (0, 1)");
  }
  const std::size_t n = train.size();
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> forget(order.begin(), order.begin() + k);
  std::vector<std::size_t> remain(order.begin() + k, order.end());
  std::sort(forget.begin(), forget.end());
  std::sort(remain.begin(), remain.end());

  SplitDataset out;
  out.forget_train = take_rows(train, forget);
  out.remain_train = take_rows(train, remain);
  out.forget_test = LabeledSet{Matrix(0, test.inputs.cols()), {}, test.classes};
  out.remain_test = test;
  out.spec.indices = std::move(forget);
  return out;
}

LabeledSet load_csv(const std::string& path, std::optional<int> declared_classes) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv: " + path + " is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label") {
    throw std::runtime_error("load_csv: " + path + ": header must end with a 'label' column");
  }
  const std::size_t m = header.size() - 1;
  for (std::size_t j = 0; j < m; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw std::runtime_error("load_csv: " + path + ": header column " + std::to_string(j) +
                               " is '" + header[j] + "', expected 'f" + std::to_string(j) + "'");
    }
  }

  std::vector<Vector> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != m + 1) {
      throw std::runtime_error("load_csv: " + path + ": row " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(m + 1));
    }
    Vector row(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::string& s = cells[j];
      const char* first = s.data();
      const char* last = s.data() + s.size();
      auto [ptr, ec] = std::from_chars(first, last, row[j]);
      if (ec != std::errc{} || ptr != last) {
        throw std::runtime_error("load_csv: " + path + ": row " + std::to_string(line_no) +
                                 ", column " + std::to_string(j) + ": '" + s + "' is not numeric");
      }
    }
    int label = 0;
    {
      const std::string& s = cells[m];
      const char* first = s.data();
      const char* last = s.data() + s.size();
      auto [ptr, ec] = std::from_chars(first, last, label);
      if (ec != std::errc{} || ptr != last) {
        throw std::runtime_error("load_csv: " + path + ": row " + std::to_string(line_no) +
                                 ": label '" + s + "' is not an integer");
      }
    }
    if (label < 0 || (declared_classes && label >= *declared_classes)) {
      throw std::runtime_error("load_csv: " + path + ": row " + std::to_string(line_no) +
                               ": label " + std::to_string(label) + " outside [0, " +
                               std::to_string(declared_classes.value_or(0)) + ")");
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) {
    throw std::runtime_error("load_csv: " + path + " has no data rows");
  }

  LabeledSet out;
  out.inputs = Matrix::from_rows(rows);
  out.labels = std::move(labels);
  out.classes = declared_classes.value_or(*std::max_element(out.labels.begin(), out.labels.end()) + 1);
  require_finite(out.inputs, "load_csv " + path);
  return out;
}

void save_csv(const std::string& path, const LabeledSet& set) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_csv: cannot open " + path + " for writing");
  }
  for (std::size_t j = 0; j < set.inputs.cols(); ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[40];
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double* row = set.inputs.row(i);
    for (std::size_t j = 0; j < set.inputs.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", row[j]);
      out << buf << ',';
    }
    out << set.labels[i] << '\n';
  }
}

LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.inputs.cols() != b.inputs.cols()) {
    throw std::invalid_argument("concat: input dimensions differ");
  }
  LabeledSet out;
  out.classes = std::max(a.classes, b.classes);
  out.inputs = Matrix(a.size() + b.size(), a.inputs.cols());
  std::copy(a.inputs.data().begin(), a.inputs.data().end(), out.inputs.data().begin());
  std::copy(b.inputs.data().begin(), b.inputs.data().end(),
            out.inputs.data().begin() + static_cast<std::ptrdiff_t>(a.inputs.data().size()));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  json j{{"classes", manifest.classes},
         {"input_dim", manifest.input_dim},
         {"train", manifest.train},
         {"test", manifest.test},
         {"seed", manifest.seed}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_manifest: " + path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.classes = j.at("classes").get<int>();
    m.input_dim = j.at("input_dim").get<int>();
    m.train = j.at("train").get<std::string>();
    m.test = j.at("test").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::runtime_error("load_manifest: " + path + ": " + e.what());
  }
  return m;
}

std::pair<LabeledSet, LabeledSet> load_dataset(const std::string& manifest_path) {
  const DatasetManifest m = load_manifest(manifest_path);
  const auto base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  LabeledSet train = load_csv(resolve(m.train), m.classes);
  LabeledSet test = load_csv(resolve(m.test), m.classes);
  if (static_cast<int>(train.input_dim()) != m.input_dim) {
    throw std::runtime_error("load_dataset: train input_dim " + std::to_string(train.input_dim()) +
                             " does not match manifest " + std::to_string(m.input_dim));
  }
  return {std::move(train), std::move(test)};
}

}  // namespace unlearn
