#include "unlearn/sidecar.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "unlearn/svd.hpp"

namespace unlearn {

namespace {

using nlohmann::json;

json matrix_rows(const Matrix& m) {
  std::vector<Vector> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows[i].assign(m.row(i), m.row(i) + m.cols());
  }
  return json(rows);
}

Matrix rows_to_matrix(const json& j, const std::string& what) {
  try {
    return Matrix::from_rows(j.get<std::vector<Vector>>());
  } catch (const std::exception& e) {
    throw std::runtime_error("sidecar field '" + what + "': " + e.what());
  }
}

void write(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_sidecar: cannot open " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

void save_sidecar(const std::string& path, const PrunedBasis& basis) {
  write(path, json{{"version", 1},
                   {"kind", "esc"},
                   {"d", basis.u_p.rows()},
                   {"k", basis.k},
                   {"basis", matrix_rows(basis.u_p)}});
}

void save_sidecar(const std::string& path, const RefinedBasis& basis, double tau) {
  std::vector<std::vector<int>> mask_rows(basis.m_r.rows());
  for (std::size_t i = 0; i < basis.m_r.rows(); ++i) {
    mask_rows[i].resize(basis.m_r.cols());
    for (std::size_t j = 0; j < basis.m_r.cols(); ++j) {
      mask_rows[i][j] = basis.m_r(i, j) != 0.0 ? 1 : 0;
    }
  }
  write(path, json{{"version", 1},
                   {"kind", "esc-t"},
                   {"d", basis.u.rows()},
                   {"tau", tau},
                   {"mask", mask_rows},
                   {"basis_u", matrix_rows(basis.u)}});
}

LoadedSidecar load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_sidecar: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_sidecar: " + path + ": " + e.what());
  }

  LoadedSidecar out;
  try {
    const int version = j.at("version").get<int>();
    if (version != 1) {
      throw std::runtime_error("unsupported sidecar version " + std::to_string(version));
    }
    out.kind = j.at("kind").get<std::string>();
    out.d = j.at("d").get<std::size_t>();
    if (out.kind == "esc") {
      const Matrix basis = rows_to_matrix(j.at("basis"), "basis");
      if (basis.rows() != out.d) {
        throw std::runtime_error("sidecar basis has " + std::to_string(basis.rows()) +
                                 " rows, expected " + std::to_string(out.d));
      }
      const double err = orthonormality_error(basis);
      if (err > kOrthoTol) {
        throw std::runtime_error("sidecar basis columns not orthonormal (error " +
                                 std::to_string(err) + ")");
      }
      out.map = {multiply(basis, transpose(basis))};
    } else if (out.kind == "esc-t") {
      const Matrix u = rows_to_matrix(j.at("basis_u"), "basis_u");
      const Matrix mask = rows_to_matrix(j.at("mask"), "mask");
      if (u.rows() != out.d || u.cols() != out.d) {
        throw std::runtime_error("sidecar basis_u must be d x d");
      }
      const RefinedBasis refined = refine(u, mask);
      out.map = to_feature_map(refined);
    } else {
      throw std::runtime_error("unknown sidecar kind '" + out.kind + "'");
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("load_sidecar: " + path + ": " + e.what());
  }
  return out;
}

}  // namespace unlearn
