#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/errors.hpp"
#include "aoi/linalg.hpp"

namespace aoi {

/// Plant x[k+1] = A x[k] observed by N nodes through y_i[k] = C_i x[k].
class LtiSystem {
 public:
  LtiSystem(Matrix a, std::vector<Matrix> c, std::vector<std::string> labels = {})
      : a_(std::move(a)), c_(std::move(c)), labels_(std::move(labels)) {
    if (a_.rows() != a_.cols()) throw DimensionMismatch("LtiSystem: A must be square");
    if (c_.empty()) throw DimensionMismatch("LtiSystem: at least one node is required");
    for (std::size_t i = 0; i < c_.size(); ++i) {
      if (c_[i].rows() == 0 && c_[i].cols() == 0) c_[i].resize(0, a_.cols());
      if (c_[i].cols() != a_.cols()) {
        throw DimensionMismatch("LtiSystem: C_" + std::to_string(i) + " has " +
                                std::to_string(c_[i].cols()) + " columns, expected " +
                                std::to_string(a_.cols()));
      }
    }
    if (!labels_.empty() && labels_.size() != c_.size()) {
      throw DimensionMismatch("LtiSystem: labels must match node count");
    }
    if (!is_observable(a_, stacked_c())) {
      throw NotJointlyObservable("LtiSystem: (A, C) is not observable");
    }
  }

  const Matrix& a() const { return a_; }
  const Matrix& c(std::size_t node) const { return c_.at(node); }
  const std::vector<Matrix>& c_list() const { return c_; }
  const std::vector<std::string>& labels() const { return labels_; }
  int state_dim() const { return static_cast<int>(a_.rows()); }
  int node_count() const { return static_cast<int>(c_.size()); }
  Matrix stacked_c() const { return stack_rows(c_, a_.cols()); }

 private:
  Matrix a_;
  std::vector<Matrix> c_;
  std::vector<std::string> labels_;
};

/// Multi-sensor observability decomposition: z = T^{-1} x with A_bar block lower-triangular.
struct Decomposition {
  Matrix t;
  Matrix t_inv;
  std::vector<int> block_dims;
  std::vector<int> offsets;
  Matrix a_bar;
  std::vector<Matrix> c_bar;

  int node_count() const { return static_cast<int>(block_dims.size()); }
  int state_dim() const { return static_cast<int>(t.rows()); }
  bool is_source(int j) const { return block_dims.at(static_cast<std::size_t>(j)) > 0; }

  Matrix a_block(int j, int q) const {
    return a_bar.block(offsets[j], offsets[q], block_dims[j], block_dims[q]);
  }
  /// Column block q of node j's transformed observation matrix.
  Matrix c_block(int j, int q) const {
    const Matrix& cj = c_bar[static_cast<std::size_t>(j)];
    return cj.block(0, offsets[q], cj.rows(), block_dims[q]);
  }
  std::pair<Matrix, Matrix> diag_pair(int j) const { return {a_block(j, j), c_block(j, j)}; }
};

namespace detail {

inline std::vector<int> block_offsets(const std::vector<int>& dims) {
  std::vector<int> out(dims.size(), 0);
  int at = 0;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    out[j] = at;
    at += dims[j];
  }
  return out;
}

}  // namespace detail

/// Iterated Kalman observability decomposition, one node at a time.
///
/// Node j's block is the part of the state still unexplained by nodes 0..j-1 that node j
/// can observe. Each stage splits the remaining subspace into the observable subspace of
/// (A restricted, C_j restricted) and its unobservable, A-invariant complement using the
/// right singular vectors of the restricted observability matrix. T is orthogonal.
/// Entries above the block diagonal of A_bar and to the right of each C_bar_j's own block
/// are set to exact zeros after the transform.
inline Decomposition decompose(const LtiSystem& sys) {
  const int n = sys.state_dim();
  const int nodes = sys.node_count();
  const RankDecision joint = audited_rank(observability_matrix(sys.a(), sys.stacked_c()),
                                          "decompose: joint observability");
  if (joint.rank != n) throw NotJointlyObservable("decompose: (A, C) is not observable");

  Decomposition dec;
  dec.block_dims.assign(static_cast<std::size_t>(nodes), 0);
  std::vector<Matrix> columns;
  Matrix remaining = Matrix::Identity(n, n);

  for (int j = 0; j < nodes; ++j) {
    const Eigen::Index m = remaining.cols();
    const Matrix& cj = sys.c(static_cast<std::size_t>(j));
    if (m == 0 || cj.rows() == 0) continue;
    const Matrix a_r = remaining.transpose() * sys.a() * remaining;
    const Matrix c_r = cj * remaining;
    const Matrix obs = observability_matrix(a_r, c_r);
    const RankDecision d = audited_rank(obs, "decompose: node " + std::to_string(j));
    if (d.rank == 0) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(obs, Eigen::ComputeFullV);
    const Matrix v = svd.matrixV();
    Matrix observed = remaining * v.leftCols(d.rank);
    canonicalize_column_signs(observed);
    columns.push_back(observed);
    dec.block_dims[static_cast<std::size_t>(j)] = d.rank;
    remaining = (remaining * v.rightCols(m - d.rank)).eval();
  }
  if (remaining.cols() != 0) {
    throw NotJointlyObservable("decompose: " + std::to_string(remaining.cols()) +
                               " directions remain unobserved");
  }

  dec.t.resize(n, n);
  int at = 0;
  for (const auto& cols : columns) {
    dec.t.middleCols(at, cols.cols()) = cols;
    at += static_cast<int>(cols.cols());
  }
  dec.t_inv = dec.t.transpose();
  dec.offsets = detail::block_offsets(dec.block_dims);
  dec.a_bar = dec.t_inv * sys.a() * dec.t;
  for (int j = 0; j < nodes; ++j) {
    const int cols_after = n - dec.offsets[j] - dec.block_dims[j];
    dec.a_bar.block(dec.offsets[j], dec.offsets[j] + dec.block_dims[j], dec.block_dims[j],
                    cols_after)
        .setZero();
    Matrix cb = sys.c(static_cast<std::size_t>(j)) * dec.t;
    cb.rightCols(cols_after).setZero();
    dec.c_bar.push_back(std::move(cb));
  }
  return dec;
}

/// Sub-state blocks z^(j), block j of length n_j.
template <class Real = double>
struct SubStateVector {
  std::vector<VectorT<Real>> blocks;
};

inline SubStateVector<double> to_substate(const Decomposition& dec, const Vector& x) {
  if (x.size() != dec.state_dim()) throw DimensionMismatch("to_substate: wrong state length");
  const Vector z = dec.t_inv * x;
  SubStateVector<double> out;
  for (int j = 0; j < dec.node_count(); ++j) {
    out.blocks.push_back(z.segment(dec.offsets[j], dec.block_dims[j]));
  }
  return out;
}

inline Vector from_substate(const Decomposition& dec, const SubStateVector<double>& z) {
  if (static_cast<int>(z.blocks.size()) != dec.node_count()) {
    throw DimensionMismatch("from_substate: wrong block count");
  }
  Vector flat(dec.state_dim());
  for (int j = 0; j < dec.node_count(); ++j) {
    if (z.blocks[static_cast<std::size_t>(j)].size() != dec.block_dims[j]) {
      throw DimensionMismatch("from_substate: block " + std::to_string(j) + " has wrong length");
    }
    flat.segment(dec.offsets[j], dec.block_dims[j]) = z.blocks[static_cast<std::size_t>(j)];
  }
  return dec.t * flat;
}

/// Violations of the decomposition contract; empty when every invariant holds.
inline std::vector<std::string> decomposition_violations(const LtiSystem& sys,
                                                         const Decomposition& dec,
                                                         double rel_tol = 1e-8) {
  std::vector<std::string> out;
  const int n = sys.state_dim();
  int total = 0;
  for (int d : dec.block_dims) total += d;
  if (total != n) out.push_back("block dims sum to " + std::to_string(total));
  const double scale_a = std::max(1.0, sys.a().norm());
  if ((dec.t * dec.t_inv - Matrix::Identity(n, n)).norm() > rel_tol) {
    out.push_back("T * T_inv is not the identity");
  }
  if ((dec.t * dec.a_bar * dec.t_inv - sys.a()).norm() > rel_tol * scale_a) {
    out.push_back("T * A_bar * T_inv does not reproduce A");
  }
  for (int j = 0; j < dec.node_count(); ++j) {
    const Matrix& cj = sys.c(static_cast<std::size_t>(j));
    const double scale_c = std::max(1.0, cj.norm());
    if ((cj * dec.t - dec.c_bar[static_cast<std::size_t>(j)]).norm() > rel_tol * scale_c) {
      out.push_back("C_bar_" + std::to_string(j) + " != C_" + std::to_string(j) + " * T");
    }
    const int after = dec.offsets[j] + dec.block_dims[j];
    for (int r = dec.offsets[j]; r < after; ++r) {
      for (int c = after; c < n; ++c) {
        if (dec.a_bar(r, c) != 0.0) out.push_back("A_bar has a non-zero above the block diagonal");
      }
    }
    const Matrix& cb = dec.c_bar[static_cast<std::size_t>(j)];
    for (Eigen::Index r = 0; r < cb.rows(); ++r) {
      for (int c = after; c < n; ++c) {
        if (cb(r, c) != 0.0) out.push_back("C_bar_" + std::to_string(j) + " has a non-zero right of its block");
      }
    }
    if (dec.block_dims[j] > 0) {
      auto [ajj, cjj] = dec.diag_pair(j);
      if (!is_observable(ajj, cjj)) out.push_back("diagonal pair " + std::to_string(j) + " is not observable");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// System definition file: {"A": [[...]], "C": [[[...]], [], ...], "labels": [...]}
// An empty list for C_i means node i takes no measurements.

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index expected_cols, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of rows");
  if (j.empty()) return Matrix(0, expected_cols < 0 ? 0 : expected_cols);
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) throw ValidationError(where + ": rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError(where + ": row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ValidationError(where + ": non-numeric entry");
      out(r, c) = v.get<double>();
    }
  }
  return out;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline LtiSystem system_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("A") || !j.contains("C")) {
    throw ValidationError("system: keys \"A\" and \"C\" are required");
  }
  Matrix a = matrix_from_json(j.at("A"), -1, "system/A");
  if (!j.at("C").is_array()) throw ValidationError("system/C: expected a list of matrices");
  std::vector<Matrix> cs;
  for (std::size_t i = 0; i < j.at("C").size(); ++i) {
    cs.push_back(matrix_from_json(j.at("C")[i], a.cols(), "system/C/" + std::to_string(i)));
  }
  std::vector<std::string> labels;
  if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
  try {
    return LtiSystem(std::move(a), std::move(cs), std::move(labels));
  } catch (const DimensionMismatch& e) {
    throw ValidationError(e.what());
  }
}

inline nlohmann::json system_to_json(const LtiSystem& sys) {
  nlohmann::json out;
  out["A"] = matrix_to_json(sys.a());
  out["C"] = nlohmann::json::array();
  for (const auto& c : sys.c_list()) out["C"].push_back(matrix_to_json(c));
  if (!sys.labels().empty()) out["labels"] = sys.labels();
  return out;
}

}  // namespace aoi
