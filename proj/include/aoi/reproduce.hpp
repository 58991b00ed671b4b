#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/bounds.hpp"
#include "aoi/gains.hpp"
#include "aoi/graph.hpp"
#include "aoi/invariants.hpp"
#include "aoi/lti.hpp"
#include "aoi/numeric.hpp"
#include "aoi/simulator.hpp"

namespace aoi::canned {

inline constexpr std::uint64_t kDefaultSeed = 20240601;

/// Four nodes, four states, each node contributing one new observable direction. Built as a
/// lower-triangular chain in hidden coordinates and rotated by a seeded orthogonal matrix.
inline LtiSystem chain_system(std::uint64_t seed, const std::vector<double>& diag = {1.05, -1.02, 0.95, 1.03}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(diag.size());
  Matrix a_hidden = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    a_hidden(r, r) = diag[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < r; ++c) a_hidden(r, c) = 0.5 * normal(rng);
  }
  std::vector<Matrix> c_hidden;
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix c = Matrix::Zero(1, n);
    for (Eigen::Index q = 0; q < j; ++q) c(0, q) = 0.5 * normal(rng);
    const double own = normal(rng);
    c(0, j) = (own < 0 ? -1.0 : 1.0) * (0.5 + std::abs(own));
    c_hidden.push_back(c);
  }
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) g(r, c) = normal(rng);
  }
  const Matrix q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  std::vector<Matrix> cs;
  for (const auto& c : c_hidden) cs.push_back(c * q.transpose());
  return LtiSystem(q * a_hidden * q.transpose(), cs);
}

inline Matrix scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

inline LtiSystem scalar_system(double a, const std::vector<double>& c) {
  std::vector<Matrix> cs;
  for (double ci : c) cs.push_back(scalar(ci));
  return LtiSystem(scalar(a), cs);
}

/// Three nodes alternating between 0->1, 1->2 (even k) and 0->2, 2->1 (odd k).
inline GraphSequence sec3_graph(std::int64_t horizon) {
  std::map<std::int64_t, EdgeSet> sched;
  for (std::int64_t k = 0; k <= horizon; ++k) {
    sched[k] = k % 2 == 0 ? EdgeSet{{0, 1}, {1, 2}} : EdgeSet{{0, 2}, {2, 1}};
  }
  return GraphSequence(3, make_intervals({IntervalKind::constant, 2, 0.0}, 3, horizon), std::move(sched), horizon,
                       {IntervalKind::constant, 2, 0.0});
}

inline Scenario sec3_scenario(ProtocolKind protocol, NaiveWeights weights = NaiveWeights::uniform,
                              std::uint64_t seed = kDefaultSeed, std::int64_t horizon = 60) {
  Scenario s;
  s.name = "sec3-example";
  s.system = scalar_system(2.0, {1.0, 0.0, 0.0});
  s.dec = decompose(*s.system);
  s.protocol = protocol;
  s.weights = weights;
  s.scalar_gains = {2.0, 0.0, 0.0};
  s.gains = scalar_gain_set(s.dec, s.scalar_gains);
  s.graph = sec3_graph(horizon);
  s.seed = seed;
  s.x0 = Vector::Constant(1, 1.0);
  return s;
}

/// Rate-gain scenario on the chain system: constant T = 3, or floor-sqrt intervals.
inline Scenario thm1_scenario(bool growing, std::uint64_t seed = kDefaultSeed, double rho = 0.7) {
  Scenario s;
  s.name = growing ? "thm1-growing" : "thm1-rate";
  s.system = chain_system(seed);
  s.dec = decompose(*s.system);
  s.gains = design_gains(s.dec, GainMode::rate, rho, 0.0, seed);
  GenerateParams p;
  p.kind = growing ? SequenceKind::growing_sqrt : SequenceKind::periodic_sc;
  p.period = 3;
  s.graph = generate_sequence(p, 4, seed, growing ? 2000 : 400);
  s.seed = seed;
  s.precision = Precision::mp100;
  return s;
}

inline Scenario cor1_scenario(std::uint64_t seed = kDefaultSeed) {
  Scenario s;
  s.name = "cor1-finite";
  s.system = chain_system(seed);
  s.dec = decompose(*s.system);
  s.gains = design_gains(s.dec, GainMode::nilpotent, 0.5, 0.0, seed);
  GenerateParams p;
  p.kind = SequenceKind::periodic_sc;
  p.period = 2;
  s.graph = generate_sequence(p, 4, seed, 100);
  s.seed = seed;
  return s;
}

inline Scenario sec5b_scenario(std::uint64_t seed = kDefaultSeed, std::int64_t horizon = 5000) {
  Scenario s;
  s.name = "sec5b-disturbance";
  s.system = scalar_system(1.5, {1.0, 0.0});
  s.dec = decompose(*s.system);
  s.scalar_gains = {1.5, 0.0};
  s.gains = scalar_gain_set(s.dec, s.scalar_gains);
  s.graph = source_broadcast_sequence({IntervalKind::floor_sqrt, 1, 0.0}, 2, 0, 1, horizon);
  s.disturbance = 0.1;
  s.seed = seed;
  s.precision = Precision::mp1000;
  return s;
}

inline constexpr int kResilientAdversary = 3;

inline Scenario thm2_scenario(std::optional<AdversaryKind> kind, bool deadbeat, std::uint64_t seed = kDefaultSeed) {
  Scenario s;
  s.name = "thm2-resilient";
  s.system = scalar_system(1.2, {1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0});
  s.dec = decompose(*s.system);
  s.protocol = ProtocolKind::resilient;
  const double l = deadbeat ? 1.2 : 0.4;  // a - l c = 0 or 0.8
  s.scalar_gains = {l, l, l, l, 0.0, 0.0, 0.0};
  s.f = 1;
  if (kind) {
    AdversarySpec a;
    a.node = kResilientAdversary;
    a.kind = *kind;
    s.adversaries.push_back(a);
  }
  GenerateParams p;
  p.kind = SequenceKind::robust;
  p.period = 3;
  p.r = 4;
  p.sources = {0, 1, 2, 3};
  s.graph = generate_sequence(p, 7, seed, deadbeat ? 60 : 1500);
  s.robust_period = 3;
  s.seed = seed;
  s.precision = deadbeat ? Precision::mp100 : Precision::mp1000;
  return s;
}

inline const std::vector<AdversaryKind>& bundled_adversaries() {
  static const std::vector<AdversaryKind> kinds{AdversaryKind::silent, AdversaryKind::zero_index_lie,
                                                AdversaryKind::colluding_bias, AdversaryKind::random_value,
                                                AdversaryKind::replay};
  return kinds;
}

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

template <class Real>
double max_error_at(const SimTrace<Real>& tr, std::size_t k, const std::vector<char>& mask) {
  double worst = 0.0;
  for (int i = 0; i < tr.nodes; ++i) {
    if (mask.empty() || mask[static_cast<std::size_t>(i)]) {
      worst = std::max(worst, to_double(tr.error_norm(k, static_cast<std::size_t>(i))));
    }
  }
  return worst;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace detail

inline std::vector<CriterionResult> reproduce_sec3(std::uint64_t seed = kDefaultSeed) {
  const auto uni = run<double>(sec3_scenario(ProtocolKind::naive, NaiveWeights::uniform, seed));
  const auto tree = run<double>(sec3_scenario(ProtocolKind::naive, NaiveWeights::tree, seed));
  const auto alg = run<double>(sec3_scenario(ProtocolKind::aoi, NaiveWeights::uniform, seed));
  double peak_uni = 0.0;
  double peak_tree = 0.0;
  for (std::size_t k = 0; k <= 60; ++k) {
    peak_uni = std::max(peak_uni, detail::max_error_at(uni, k, {}));
    peak_tree = std::max(peak_tree, detail::max_error_at(tree, k, {}));
  }
  const auto ft = verify_finite_time(alg, 5);
  CriterionResult r{1, "naive consensus diverges, freshness protocol converges by k=5", false, ""};
  r.pass = peak_uni > 1e6 && peak_tree > 1e6 && ft.pass;
  r.detail = "uniform peak " + detail::fmt(peak_uni) + ", tree peak " + detail::fmt(peak_tree) +
             ", protocol max error after k=5 " + detail::fmt(ft.worst_after);
  return {r};
}

inline std::vector<CriterionResult> reproduce_thm1(std::uint64_t seed = kDefaultSeed) {
  std::vector<CriterionResult> out;
  {
    const Scenario s = thm1_scenario(false, seed);
    const auto tr = run<mp100>(s);
    const std::int64_t k_n = burn_in_k_n(*s.graph, s.gains.chain->delta_bar, s.dec.node_count());
    const auto rep = verify_rate(tr, 0.7, k_n, k_n + 150);
    double worst = -1e300;
    for (double v : rep.node_slopes) worst = std::max(worst, v);
    out.push_back({2, "rate 0.7 on periodic T=3", rep.pass,
                   "window [" + std::to_string(rep.from) + ", " + std::to_string(rep.to) + "], worst slope " +
                       detail::fmt(worst) + " vs bound " + detail::fmt(rep.bound)});
    const auto v = assert_online_invariants(tr, s);
    out.push_back({5, "delayed-error identity on sub-state 1", v.empty(),
                   v.empty() ? "no violations" : v.front()});
  }
  {
    const Scenario s = thm1_scenario(true, seed);
    const auto tr = run<mp100>(s);
    double tail = 0.0;
    for (std::size_t k = tr.steps() - 100; k < tr.steps(); ++k) tail = std::max(tail, detail::max_error_at(tr, k, {}));
    const auto v = assert_online_invariants(tr, s);
    out.push_back({3, "floor-sqrt intervals converge with delay bound", tail <= 1e-6 && v.empty(),
                   "max error over last 100 steps " + detail::fmt(tail) + ", violations " + std::to_string(v.size())});
  }
  return out;
}

inline std::vector<CriterionResult> reproduce_cor1(std::uint64_t seed = kDefaultSeed) {
  const Scenario s = cor1_scenario(seed);
  const auto tr = run<double>(s);
  const std::int64_t bound = 4 + 2 * 4 * 3 * 2;
  const std::int64_t deadline = finite_time_deadline(s.dec, *s.graph);
  const auto rep = verify_finite_time(tr, bound);
  const auto rep_tight = verify_finite_time(tr, deadline);
  return {{4, "deadbeat gains finish by n+2N(N-1)T = 52", rep.pass && rep_tight.pass && deadline <= bound,
           "computed deadline " + std::to_string(deadline) + ", worst error from k=52 " + detail::fmt(rep.worst_after)}};
}

inline std::vector<CriterionResult> reproduce_sec5b(std::uint64_t seed = kDefaultSeed) {
  const Scenario s = sec5b_scenario(seed);
  const auto tr = run<mp1000>(s);
  const mp1000 a(1.5);
  const mp1000 d(0.1);
  const auto& t = s.graph->intervals();
  double worst_gap = 0.0;
  double peak = 0.0;
  for (std::size_t q = 0; q + 1 < t.size() && t[q + 1] <= s.horizon(); ++q) {
    const std::int64_t f = t[q + 1] - t[q];
    const auto tq = static_cast<std::size_t>(t[q]);
    const auto tq1 = static_cast<std::size_t>(t[q + 1]);
    // Errors as x - x_hat.
    const mp1000 e1 = tr.x[tq](0) - tr.x_hat[tq][0](0);
    const mp1000 e2 = tr.x[tq1](0) - tr.x_hat[tq1][1](0);
    const mp1000 af = ipow(a, f);
    const mp1000 closed = af * e1 + d * (af - 1) / (a - 1);
    worst_gap = std::max(worst_gap, to_double(real_abs(mp1000(e2 - closed))));
    peak = std::max(peak, to_double(real_abs(e2)));
  }
  return {{6, "disturbance closed form and growth", worst_gap <= 1e-9 && peak > 1e3,
           "max closed-form gap " + detail::fmt(worst_gap) + ", max |e_2[t_q]| " + detail::fmt(peak)}};
}

inline std::vector<CriterionResult> reproduce_thm2(std::uint64_t seed = kDefaultSeed) {
  bool rate_ok = true;
  bool inv_ok = true;
  bool ft_ok = true;
  std::string rate_detail;
  std::string ft_detail;
  for (AdversaryKind kind : bundled_adversaries()) {
    const Scenario s = thm2_scenario(kind, false, seed);
    const auto tr = run<mp1000>(s);
    std::vector<char> mask = tr.regular;
    const auto rep = verify_rate(tr, 0.8, 500, 1500, mask);
    const auto v = assert_online_invariants(tr, s);
    double worst = -1e300;
    for (double x : rep.node_slopes) {
      if (std::isfinite(x)) worst = std::max(worst, x);
    }
    rate_ok = rate_ok && rep.pass;
    inv_ok = inv_ok && v.empty();
    rate_detail += to_string(kind) + ": slope " + detail::fmt(worst) + ", violations " + std::to_string(v.size()) + "; ";

    const Scenario sd = thm2_scenario(kind, true, seed);
    const auto trd = run<mp100>(sd);
    const auto ft = verify_finite_time(trd, 2 * (7 - 4) * 3 + 1, trd.regular);
    ft_ok = ft_ok && ft.pass && assert_online_invariants(trd, sd).empty();
    ft_detail += to_string(kind) + ": " + detail::fmt(ft.worst_after) + "; ";
  }
  return {{7, "resilient rate 0.8 under every bundled adversary", rate_ok && inv_ok, rate_detail},
          {8, "resilient deadbeat finishes by 2(N-|S|)T+1 = 19", ft_ok, ft_detail}};
}

inline const std::vector<std::string>& reproduction_ids() {
  static const std::vector<std::string> ids{"sec3-example", "thm1-rate", "cor1-finite", "sec5b-disturbance",
                                            "thm2-resilient"};
  return ids;
}

inline std::vector<CriterionResult> reproduce(const std::string& id, std::uint64_t seed = kDefaultSeed) {
  if (id == "sec3-example") return reproduce_sec3(seed);
  if (id == "thm1-rate") return reproduce_thm1(seed);
  if (id == "cor1-finite") return reproduce_cor1(seed);
  if (id == "sec5b-disturbance") return reproduce_sec5b(seed);
  if (id == "thm2-resilient") return reproduce_thm2(seed);
  throw ValidationError("unknown reproduction id \"" + id + "\"");
}

}  // namespace aoi::canned
