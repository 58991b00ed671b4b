#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/errors.hpp"
#include "aoi/linalg.hpp"
#include "aoi/lti.hpp"

namespace aoi {

inline constexpr int kNormHorizon = 500;
inline constexpr int kPlacementRetries = 16;
inline constexpr double kRhoShrink = 0.999;
inline constexpr double kChainFloor = 1e-200;

struct RateChain {
  double rho = 0.0;
  double delta_bar = 0.0;
  double gamma = 1.0;
  std::vector<double> rho_j;
  std::vector<double> lambda_j;
};

struct NormConstants {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
};

enum class GainMode { rate, nilpotent };

struct ObserverGainSet {
  GainMode mode = GainMode::rate;
  /// One entry per sub-state; an empty block has a 0 x r_j gain.
  std::vector<Matrix> l;
  std::optional<RateChain> chain;
  std::vector<NormConstants> norm_constants;
};

inline double delta_bar_for(double delta) { return delta > 0.0 ? 0.5 * (1.0 + delta) : 0.1; }

/// Rate chain from lambda_N = rho downwards: rho_j is the largest value meeting
/// gamma^db * rho_j^(1-db) <= lambda_j, shrunk slightly, and lambda_{j-1} sits just below rho_j.
inline RateChain build_rate_chain(int sub_states, double gamma, double rho, double delta) {
  if (!(rho > 0.0 && rho < 1.0)) throw InfeasibleChain("build_rate_chain: rho must lie in (0, 1)");
  if (!(delta >= 0.0 && delta < 1.0)) throw InfeasibleChain("build_rate_chain: delta must lie in [0, 1)");
  if (sub_states < 1) throw InfeasibleChain("build_rate_chain: need at least one sub-state");
  if (!(gamma >= 1.0)) throw InfeasibleChain("build_rate_chain: gamma must be at least 1");
  RateChain ch;
  ch.rho = rho;
  ch.gamma = gamma;
  ch.delta_bar = delta_bar_for(delta);
  const auto n = static_cast<std::size_t>(sub_states);
  ch.rho_j.assign(n, 0.0);
  ch.lambda_j.assign(n, 0.0);
  const double db = ch.delta_bar;
  const double shrink_lambda = 1.0 - 1.0 / (4.0 * sub_states);
  double lambda = rho;
  for (std::size_t j = n; j-- > 0;) {
    ch.lambda_j[j] = lambda;
    const double r = std::pow(lambda / std::pow(gamma, db), 1.0 / (1.0 - db)) * kRhoShrink;
    if (!(r > kChainFloor)) {
      throw InfeasibleChain("build_rate_chain: rho_" + std::to_string(j) + " fell below " +
                            std::to_string(kChainFloor));
    }
    ch.rho_j[j] = r;
    lambda = r * shrink_lambda;
  }
  return ch;
}

/// Violations of the interleaving and the per-stage inequality; empty when the chain is valid.
inline std::vector<std::string> rate_chain_violations(const RateChain& ch) {
  std::vector<std::string> out;
  const std::size_t n = ch.rho_j.size();
  if (n == 0 || ch.lambda_j.size() != n) return {"chain is empty or inconsistent"};
  if (ch.lambda_j.back() != ch.rho) out.push_back("lambda_N != rho");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(ch.rho_j[j] > 0.0 && ch.rho_j[j] < ch.lambda_j[j])) {
      out.push_back("rho_" + std::to_string(j) + " is not below lambda_" + std::to_string(j));
    }
    if (j + 1 < n && !(ch.lambda_j[j] < ch.rho_j[j + 1])) {
      out.push_back("lambda_" + std::to_string(j) + " is not below rho_" + std::to_string(j + 1));
    }
    const double lhs = std::pow(ch.gamma, ch.delta_bar) * std::pow(ch.rho_j[j], 1.0 - ch.delta_bar);
    if (!(lhs <= ch.lambda_j[j])) out.push_back("stage inequality fails at " + std::to_string(j));
  }
  return out;
}

/// beta = max_{0<=k<=K} ||M^k|| / gamma^k, certified by the ratio peaking in the first half.
inline double estimate_norm_constants(const Matrix& m, double gamma, int horizon = kNormHorizon) {
  if (m.rows() != m.cols()) throw DimensionMismatch("estimate_norm_constants: M is not square");
  if (m.rows() == 0) return 1.0;
  Matrix power = Matrix::Identity(m.rows(), m.cols());
  double scale = 1.0;
  double early = 0.0;
  double late = 0.0;
  const int half = horizon / 2;
  for (int k = 0; k <= horizon; ++k) {
    const double ratio = norm2(power) * scale;
    if (k < half) {
      early = std::max(early, ratio);
    } else {
      late = std::max(late, ratio);
    }
    power = (power * m).eval();
    scale /= gamma;
  }
  if (!(late < early)) {
    throw HorizonInconclusive("estimate_norm_constants: ||M^k||/gamma^k has not peaked by k=" +
                              std::to_string(horizon));
  }
  return early;
}

inline double growth_rate_for(const Matrix& a_jj) {
  return std::max(1.0, 1.05 * spectral_radius(a_jj));
}

/// Chain using gamma = max_j gamma_j over the non-empty diagonal blocks of the decomposition.
inline RateChain build_rate_chain(const Decomposition& dec, double rho, double delta) {
  double gamma = 1.0;
  for (int j = 0; j < dec.node_count(); ++j) {
    if (dec.is_source(j)) gamma = std::max(gamma, growth_rate_for(dec.a_block(j, j)));
  }
  return build_rate_chain(dec.node_count(), gamma, rho, delta);
}

/// Reduces a multi-output pair to a single output c = v^T C by a random row combination.
inline Matrix single_output_combination(const Matrix& c, std::mt19937_64& rng) {
  Matrix v(1, c.rows());
  if (c.rows() == 1) {
    v(0, 0) = 1.0;
    return v;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < c.rows(); ++i) v(0, i) = normal(rng);
  return v;
}

namespace detail {

/// Monic polynomial coefficients (highest degree first) with the given real roots.
inline std::vector<double> poly_from_roots(const std::vector<double>& roots) {
  std::vector<double> p{1.0};
  for (double r : roots) {
    std::vector<double> next(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      next[i] += p[i];
      next[i + 1] -= r * p[i];
    }
    p = std::move(next);
  }
  return p;
}

inline Matrix poly_of_matrix(const std::vector<double>& p, const Matrix& a) {
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (double coef : p) out = (out * a + coef * Matrix::Identity(a.rows(), a.cols())).eval();
  return out;
}

/// Ackermann's formula for the observer form: eig(A - l c) are the given roots.
inline Matrix ackermann_observer(const Matrix& a, const Matrix& c_row, const std::vector<double>& roots) {
  const Eigen::Index n = a.rows();
  const Matrix obs = observability_matrix(a, c_row);
  Vector e_n = Vector::Zero(n);
  e_n(n - 1) = 1.0;
  const Vector sol = obs.fullPivLu().solve(e_n);
  return poly_of_matrix(poly_from_roots(roots), a) * sol;
}

inline bool spectrum_matches(const Matrix& f, std::vector<double> targets, double tol) {
  auto ev = eigenvalues(f);
  if (ev.size() != targets.size()) return false;
  std::vector<double> re;
  for (const auto& z : ev) {
    if (std::abs(z.imag()) > tol) return false;
    re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  std::sort(targets.begin(), targets.end());
  for (std::size_t i = 0; i < re.size(); ++i) {
    if (std::abs(re[i] - targets[i]) > tol) return false;
  }
  return true;
}

inline double matrix_power_norm(const Matrix& m, int k) {
  Matrix p = Matrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) p = (p * m).eval();
  return m.rows() == 0 ? 0.0 : norm2(p);
}

}  // namespace detail

/// Gain L (n x r) with eig(A - L C) equal to the real targets.
inline Matrix place_observer_poles(const Matrix& a, const Matrix& c, const std::vector<double>& targets,
                                   std::mt19937_64& rng, double tol = 1e-6) {
  if (a.rows() != a.cols() || c.cols() != a.cols()) throw DimensionMismatch("place_observer_poles");
  if (static_cast<Eigen::Index>(targets.size()) != a.rows()) {
    throw DimensionMismatch("place_observer_poles: need one target per state");
  }
  if (c.rows() == 0) throw PlacementFailed("place_observer_poles: no measurements");
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    const Matrix v = single_output_combination(c, rng);
    const Matrix c_row = v * c;
    if (!is_observable(a, c_row)) continue;
    const Matrix l = detail::ackermann_observer(a, c_row, targets) * v;
    if (detail::spectrum_matches(a - l * c, targets, tol)) return l;
  }
  throw PlacementFailed("place_observer_poles: residual above tolerance after " +
                        std::to_string(kPlacementRetries) + " attempts");
}

inline std::vector<double> rate_targets(double rho_j, int n_j) {
  std::vector<double> out;
  for (int m = 1; m <= n_j; ++m) out.push_back(rho_j * static_cast<double>(m) / n_j);
  return out;
}

inline Matrix design_rate_gain(const Matrix& a_jj, const Matrix& c_jj, double rho_j, std::mt19937_64& rng) {
  if (a_jj.rows() == 0) throw DimensionMismatch("design_rate_gain: empty block");
  if (!(rho_j > 0.0 && rho_j < 1.0)) throw PlacementFailed("design_rate_gain: rho_j must lie in (0, 1)");
  return place_observer_poles(a_jj, c_jj, rate_targets(rho_j, static_cast<int>(a_jj.rows())), rng);
}

/// Deadbeat gain. Validated by (A - L C)^{n_j} ~ 0 rather than by its eigenvalues, which are
/// ill-conditioned for a defective matrix.
inline Matrix design_nilpotent_gain(const Matrix& a_jj, const Matrix& c_jj, std::mt19937_64& rng) {
  const Eigen::Index n = a_jj.rows();
  if (n == 0) throw DimensionMismatch("design_nilpotent_gain: empty block");
  if (c_jj.rows() == 0) throw PlacementFailed("design_nilpotent_gain: no measurements");
  const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    const Matrix v = single_output_combination(c_jj, rng);
    const Matrix c_row = v * c_jj;
    if (!is_observable(a_jj, c_row)) continue;
    const Matrix l = detail::ackermann_observer(a_jj, c_row, zeros) * v;
    if (detail::matrix_power_norm(a_jj - l * c_jj, static_cast<int>(n)) <= 1e-8) return l;
  }
  throw PlacementFailed("design_nilpotent_gain: (A - L C)^n is not zero after retries");
}

/// alpha with ||F^k|| <= alpha * rho^k: condition number of F's eigenvector matrix, which is
/// a valid bound whenever F is diagonalizable with spectral radius rho.
inline double rate_alpha(const Matrix& f) {
  if (f.rows() == 0) return 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(f);
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto& s = svd.singularValues();
  return (s(0) / s(s.size() - 1)) * (1.0 + 1e-9);
}

/// Full gain set for a decomposition.
inline ObserverGainSet design_gains(const Decomposition& dec, GainMode mode, double rho, double delta,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ObserverGainSet out;
  out.mode = mode;
  const int nodes = dec.node_count();
  out.norm_constants.assign(static_cast<std::size_t>(nodes), NormConstants{});
  double gamma = 1.0;
  for (int j = 0; j < nodes; ++j) {
    if (!dec.is_source(j)) continue;
    auto& nc = out.norm_constants[static_cast<std::size_t>(j)];
    const Matrix ajj = dec.a_block(j, j);
    nc.gamma = growth_rate_for(ajj);
    nc.beta = estimate_norm_constants(ajj, nc.gamma);
    gamma = std::max(gamma, nc.gamma);
  }
  if (mode == GainMode::rate) out.chain = build_rate_chain(nodes, gamma, rho, delta);
  for (int j = 0; j < nodes; ++j) {
    const Matrix& cj = dec.c_bar[static_cast<std::size_t>(j)];
    if (!dec.is_source(j)) {
      out.l.emplace_back(0, cj.rows());
      continue;
    }
    auto [ajj, cjj] = dec.diag_pair(j);
    Matrix l;
    if (mode == GainMode::rate) {
      l = design_rate_gain(ajj, cjj, out.chain->rho_j[static_cast<std::size_t>(j)], rng);
      out.norm_constants[static_cast<std::size_t>(j)].alpha = rate_alpha(ajj - l * cjj);
    } else {
      l = design_nilpotent_gain(ajj, cjj, rng);
      out.norm_constants[static_cast<std::size_t>(j)].alpha = 1.0;
    }
    out.l.push_back(std::move(l));
  }
  return out;
}

/// Gain set for a scalar plant from per-node gains l_i, so that the source's closed loop is
/// a - l_j c_j in original coordinates.
inline ObserverGainSet scalar_gain_set(const Decomposition& dec, const std::vector<double>& l) {
  if (dec.state_dim() != 1) throw ValidationError("scalar gains need a scalar system");
  if (static_cast<int>(l.size()) != dec.node_count()) throw ValidationError("one scalar gain per node is required");
  ObserverGainSet g;
  g.mode = GainMode::rate;
  g.norm_constants.assign(l.size(), NormConstants{});
  for (int j = 0; j < dec.node_count(); ++j) {
    const auto rows = dec.c_bar[static_cast<std::size_t>(j)].rows();
    if (!dec.is_source(j)) {
      g.l.emplace_back(0, rows);
      continue;
    }
    Matrix lj(1, rows);
    lj.setZero();
    lj(0, 0) = l[static_cast<std::size_t>(j)] * dec.t(0, 0);
    g.l.push_back(lj);
  }
  return g;
}

/// Per-sub-state closed-loop violations (spectrum, distinctness, nilpotency).
inline std::vector<std::string> gain_set_violations(const Decomposition& dec, const ObserverGainSet& g) {
  std::vector<std::string> out;
  if (static_cast<int>(g.l.size()) != dec.node_count()) return {"gain count differs from node count"};
  for (int j = 0; j < dec.node_count(); ++j) {
    if (!dec.is_source(j)) continue;
    auto [ajj, cjj] = dec.diag_pair(j);
    const Matrix& l = g.l[static_cast<std::size_t>(j)];
    if (l.rows() != ajj.rows() || l.cols() != cjj.rows()) {
      out.push_back("gain " + std::to_string(j) + " has the wrong shape");
      continue;
    }
    const Matrix f = ajj - l * cjj;
    const std::string tag = "sub-state " + std::to_string(j);
    if (g.mode == GainMode::nilpotent) {
      if (detail::matrix_power_norm(f, static_cast<int>(f.rows())) > 1e-8) out.push_back(tag + ": F^n_j != 0");
      continue;
    }
    if (!g.chain) {
      out.push_back("rate mode without a chain");
      return out;
    }
    const double rj = g.chain->rho_j[static_cast<std::size_t>(j)];
    if (std::abs(spectral_radius(f) - rj) > 1e-6) out.push_back(tag + ": spectral radius differs from rho_j");
    auto ev = eigenvalues(f);
    std::vector<double> re;
    for (const auto& z : ev) {
      if (std::abs(z.imag()) > 1e-9) out.push_back(tag + ": complex eigenvalue");
      re.push_back(z.real());
    }
    std::sort(re.begin(), re.end());
    for (std::size_t i = 1; i < re.size(); ++i) {
      if (re[i] - re[i - 1] < 1e-6 * rj) out.push_back(tag + ": eigenvalues not distinct");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gain file.

inline nlohmann::json gains_to_json(const ObserverGainSet& g) {
  nlohmann::json out;
  out["mode"] = g.mode == GainMode::rate ? "rate" : "nilpotent";
  out["L"] = nlohmann::json::array();
  for (const auto& l : g.l) out["L"].push_back(matrix_to_json(l));
  if (g.chain) {
    out["chain"] = {{"rho", g.chain->rho},
                    {"delta_bar", g.chain->delta_bar},
                    {"gamma", g.chain->gamma},
                    {"rho_j", g.chain->rho_j},
                    {"lambda_j", g.chain->lambda_j}};
  }
  out["norm_constants"] = nlohmann::json::array();
  for (const auto& nc : g.norm_constants) {
    out["norm_constants"].push_back({{"alpha", nc.alpha}, {"beta", nc.beta}, {"gamma", nc.gamma}});
  }
  return out;
}

inline ObserverGainSet gains_from_json(const nlohmann::json& j, const Decomposition& dec) {
  ObserverGainSet g;
  const std::string mode = j.value("mode", "rate");
  if (mode != "rate" && mode != "nilpotent") throw ValidationError("gains/mode must be rate or nilpotent");
  g.mode = mode == "rate" ? GainMode::rate : GainMode::nilpotent;
  if (!j.contains("L") || !j.at("L").is_array()) throw ValidationError("gains: \"L\" list is required");
  if (static_cast<int>(j.at("L").size()) != dec.node_count()) {
    throw ValidationError("gains: expected " + std::to_string(dec.node_count()) + " gain matrices");
  }
  for (int q = 0; q < dec.node_count(); ++q) {
    const auto rows = static_cast<Eigen::Index>(dec.block_dims[static_cast<std::size_t>(q)]);
    const auto cols = dec.c_bar[static_cast<std::size_t>(q)].rows();
    Matrix l = matrix_from_json(j.at("L")[static_cast<std::size_t>(q)], cols, "gains/L/" + std::to_string(q));
    if (l.rows() == 0) l.resize(0, cols);
    if (l.rows() != rows || l.cols() != cols) {
      throw ValidationError("gains/L/" + std::to_string(q) + ": expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
    }
    g.l.push_back(std::move(l));
  }
  if (j.contains("chain")) {
    const auto& c = j.at("chain");
    RateChain ch;
    ch.rho = c.at("rho").get<double>();
    ch.delta_bar = c.at("delta_bar").get<double>();
    ch.gamma = c.at("gamma").get<double>();
    ch.rho_j = c.at("rho_j").get<std::vector<double>>();
    ch.lambda_j = c.at("lambda_j").get<std::vector<double>>();
    g.chain = ch;
  }
  g.norm_constants.assign(static_cast<std::size_t>(dec.node_count()), NormConstants{});
  if (j.contains("norm_constants")) {
    const auto& arr = j.at("norm_constants");
    for (std::size_t q = 0; q < arr.size() && q < g.norm_constants.size(); ++q) {
      g.norm_constants[q] = {arr[q].value("alpha", 1.0), arr[q].value("beta", 1.0), arr[q].value("gamma", 1.0)};
    }
  }
  return g;
}

}  // namespace aoi
