#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aoi/errors.hpp"

namespace aoi {

template <class Real>
using MatrixT = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using VectorT = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

/// Relative singular-value threshold factor and required gap at a rank decision.
inline constexpr double kRankRelTol = 1e-9;
inline constexpr double kRankGapRatio = 1e3;

struct RankDecision {
  int rank = 0;
  double sigma_max = 0.0;
  double threshold = 0.0;
  /// sigma_r / sigma_{r+1}; infinite when there is no trailing singular value or it is zero.
  double gap = std::numeric_limits<double>::infinity();
  Vector singular_values;
};

/// Numerical rank of M under threshold 1e-9 * sigma_max * max(rows, cols).
inline RankDecision rank_decision(const Matrix& m) {
  RankDecision out;
  if (m.rows() == 0 || m.cols() == 0) return out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  out.singular_values = svd.singularValues();
  const auto& s = out.singular_values;
  out.sigma_max = s.size() > 0 ? s(0) : 0.0;
  if (out.sigma_max == 0.0) return out;
  out.threshold = kRankRelTol * out.sigma_max * static_cast<double>(std::max(m.rows(), m.cols()));
  int r = 0;
  while (r < s.size() && s(r) > out.threshold) ++r;
  out.rank = r;
  if (r > 0 && r < s.size() && s(r) > 0.0) out.gap = s(r - 1) / s(r);
  return out;
}

/// Same as rank_decision but raises NumericalRankAmbiguity when the gap guard is violated.
inline RankDecision audited_rank(const Matrix& m, const std::string& what) {
  RankDecision d = rank_decision(m);
  if (d.gap <= kRankGapRatio) {
    throw NumericalRankAmbiguity(what + ": singular-value gap " + std::to_string(d.gap) +
                                 " at rank " + std::to_string(d.rank) + " is below " +
                                 std::to_string(kRankGapRatio));
  }
  return d;
}

/// Rows C, CA, ..., CA^(n-1) stacked.
inline Matrix observability_matrix(const Matrix& a, const Matrix& c) {
  if (a.rows() != a.cols()) throw DimensionMismatch("observability_matrix: A is not square");
  if (c.cols() != a.cols()) {
    throw DimensionMismatch("observability_matrix: C has " + std::to_string(c.cols()) +
                            " columns, A has " + std::to_string(a.cols()));
  }
  const Eigen::Index n = a.rows();
  const Eigen::Index m = c.rows();
  Matrix out(m * n, n);
  if (m == 0 || n == 0) return out;
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleRows(k * m, m) = block;
    if (k + 1 < n) block = (block * a).eval();
  }
  return out;
}

inline bool is_observable(const Matrix& a, const Matrix& c) {
  const Matrix o = observability_matrix(a, c);
  if (a.rows() == 0) return true;
  return rank_decision(o).rank == a.rows();
}

/// Vertical concatenation of a list of matrices with equal column counts.
inline Matrix stack_rows(const std::vector<Matrix>& blocks, Eigen::Index cols) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw DimensionMismatch("stack_rows: column count mismatch");
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

inline std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
  std::vector<std::complex<double>> out;
  if (m.rows() == 0) return out;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  return out;
}

inline double spectral_radius(const Matrix& m) {
  double r = 0.0;
  for (const auto& ev : eigenvalues(m)) r = std::max(r, std::abs(ev));
  return r;
}

/// Induced 2-norm.
inline double norm2(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

/// Flip column signs so each column's largest-magnitude entry is positive.
inline void canonicalize_column_signs(Matrix& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
}

template <class Real>
MatrixT<Real> cast_matrix(const Matrix& m) {
  return m.template cast<Real>();
}

}  // namespace aoi
