#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "aoi/aoi_protocol.hpp"
#include "aoi/errors.hpp"
#include "aoi/freshness.hpp"
#include "aoi/gains.hpp"
#include "aoi/graph.hpp"
#include "aoi/lti.hpp"
#include "aoi/numeric.hpp"
#include "aoi/resilient.hpp"

namespace aoi {

enum class ProtocolKind { aoi, resilient, naive };
enum class NaiveWeights { uniform, tree };

struct RateCheck {
  double rho = 0.5;
  std::optional<std::int64_t> burn_in;
  std::optional<std::int64_t> window_end;
};

struct Scenario {
  std::string name;
  std::optional<LtiSystem> system;
  Decomposition dec;
  ProtocolKind protocol = ProtocolKind::aoi;
  NaiveWeights weights = NaiveWeights::uniform;
  ObserverGainSet gains;            // aoi
  std::vector<double> scalar_gains;  // resilient / naive: l_i per node, ignored where c_i = 0
  std::optional<GraphSequence> graph;
  std::vector<AdversarySpec> adversaries;
  int f = 0;
  std::optional<double> disturbance;
  std::uint64_t seed = 0;
  std::optional<Vector> x0;
  std::optional<std::vector<Vector>> initial_estimates;  // full-state x_hat_i[0] per node
  Precision precision = Precision::float64;
  std::optional<RateCheck> rate_check;
  std::optional<std::int64_t> finite_time_deadline;
  /// Window length for the joint robustness gate on the resilient invariants.
  std::optional<std::int64_t> robust_period;

  std::int64_t horizon() const { return graph ? graph->horizon() : 0; }
  int node_count() const { return system ? system->node_count() : 0; }
};

/// Scalar plant parameters a and c_i of a one-dimensional system.
struct ScalarModel {
  double a = 0.0;
  std::vector<double> c;
  std::vector<char> source;
};

inline ScalarModel scalar_model(const LtiSystem& sys) {
  if (sys.state_dim() != 1) throw ValidationError("protocol requires a scalar system (n = 1)");
  ScalarModel m;
  m.a = sys.a()(0, 0);
  for (const auto& c : sys.c_list()) {
    if (c.rows() > 1) throw ValidationError("scalar protocols take at most one measurement per node");
    const double ci = c.rows() == 0 ? 0.0 : c(0, 0);
    m.c.push_back(ci);
    m.source.push_back(ci != 0.0 ? 1 : 0);
  }
  return m;
}

/// Load-time checks; a scenario that passes never fails mid-run for input reasons.
inline void validate_scenario(const Scenario& s) {
  if (!s.system) throw ValidationError("scenario: system is required");
  if (!s.graph) throw ValidationError("scenario: graph is required");
  const int n = s.system->node_count();
  if (s.graph->node_count() != n) {
    throw ValidationError("scenario: graph has " + std::to_string(s.graph->node_count()) + " nodes, system has " +
                          std::to_string(n));
  }
  if (s.horizon() < s.graph->trigger_time()) {
    throw ValidationError("scenario: horizon " + std::to_string(s.horizon()) + " is shorter than t_{N-1} = " +
                          std::to_string(s.graph->trigger_time()));
  }
  if (!s.adversaries.empty() && s.protocol != ProtocolKind::resilient) {
    throw ValidationError("scenario: adversaries require the resilient protocol");
  }
  if (s.f < 0) throw ValidationError("scenario: f must be non-negative");
  if (static_cast<int>(s.adversaries.size()) > s.f) {
    throw ValidationError("scenario: " + std::to_string(s.adversaries.size()) + " adversaries exceed f = " +
                          std::to_string(s.f));
  }
  std::set<int> adv;
  for (const auto& a : s.adversaries) {
    if (a.node < 0 || a.node >= n) throw ValidationError("scenario: adversary node out of range");
    if (!adv.insert(a.node).second) throw ValidationError("scenario: adversary node listed twice");
  }
  if (s.x0 && s.x0->size() != s.system->state_dim()) throw ValidationError("scenario: x0 has the wrong length");
  if (s.initial_estimates) {
    if (static_cast<int>(s.initial_estimates->size()) != n) throw ValidationError("scenario: one initial estimate per node");
    for (const auto& v : *s.initial_estimates) {
      if (v.size() != s.system->state_dim()) throw ValidationError("scenario: initial estimate has the wrong length");
    }
  }
  if (s.protocol == ProtocolKind::aoi) {
    if (static_cast<int>(s.gains.l.size()) != n) throw ValidationError("scenario: aoi protocol requires gains");
    for (int j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (s.dec.is_source(j) && (s.gains.l[ju].rows() != s.dec.block_dims[ju] ||
                                 s.gains.l[ju].cols() != s.dec.c_bar[ju].rows())) {
        throw ValidationError("scenario: gain for sub-state " + std::to_string(j) + " is missing or mis-shaped");
      }
    }
  } else {
    const ScalarModel sm = scalar_model(*s.system);
    if (static_cast<int>(s.scalar_gains.size()) != n) {
      throw ValidationError("scenario: scalar protocols require one gain l_i per node");
    }
    for (int i = 0; i < n; ++i) {
      if (sm.source[static_cast<std::size_t>(i)] && !std::isfinite(s.scalar_gains[static_cast<std::size_t>(i)])) {
        throw ValidationError("scenario: gain l_" + std::to_string(i) + " is not finite");
      }
    }
  }
}

template <class Real>
struct SimTrace {
  ProtocolKind protocol = ProtocolKind::aoi;
  int nodes = 0;
  std::int64_t horizon = 0;
  std::vector<int> dims;
  std::vector<VectorT<Real>> x;                                // [k]
  std::vector<std::vector<VectorT<Real>>> x_hat;               // [k][i]
  std::vector<std::vector<std::vector<VectorT<Real>>>> e_sub;  // [k][i][j]
  std::vector<std::vector<std::vector<Freshness>>> tau;        // [k][i][j]
  /// adoptions[k]: decided at step k from E[k], effective at k+1.
  std::vector<std::vector<Adoption>> adoptions;
  std::vector<std::vector<std::vector<Slot<Real>>>> slots;  // [k][i], resilient only
  std::vector<std::vector<int>> dropped;                    // [k][i], resilient only
  std::vector<double> weight_row_error;                     // [k], naive only
  std::vector<char> regular;
  std::vector<char> source;

  std::size_t steps() const { return x.size(); }

  Real error_norm(std::size_t k, std::size_t i) const { return vec_norm<Real>(VectorT<Real>(x_hat[k][i] - x[k])); }
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

template <class Real>
VectorT<Real> normal_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorT<Real> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Real(normal(rng));
  return v;
}

template <class Real>
std::vector<VectorT<Real>> split_blocks(const Decomposition& dec, const VectorT<Real>& z) {
  std::vector<VectorT<Real>> out;
  for (int j = 0; j < dec.node_count(); ++j) out.push_back(z.segment(dec.offsets[j], dec.block_dims[j]));
  return out;
}

template <class Real>
void start_trace(SimTrace<Real>& tr, const Scenario& s, std::vector<int> dims) {
  tr.nodes = s.node_count();
  tr.horizon = s.horizon();
  tr.dims = std::move(dims);
  tr.regular.assign(static_cast<std::size_t>(tr.nodes), 1);
  for (const auto& a : s.adversaries) tr.regular[static_cast<std::size_t>(a.node)] = 0;
  tr.adoptions.assign(static_cast<std::size_t>(tr.horizon + 1), {});
}

template <class Real>
SimTrace<Real> run_aoi(const Scenario& s) {
  const Decomposition& dec = s.dec;
  const auto model = make_protocol_model<Real>(dec, s.gains);
  const int n_nodes = s.node_count();
  const Eigen::Index n = dec.state_dim();
  SimTrace<Real> tr;
  start_trace(tr, s, dec.block_dims);
  tr.protocol = ProtocolKind::aoi;
  for (int j = 0; j < n_nodes; ++j) tr.source.push_back(dec.is_source(j) ? 1 : 0);

  auto init_rng = stream(s.seed, 1);
  const MatrixT<Real> t_inv = cast_matrix<Real>(dec.t_inv);
  const MatrixT<Real> a_bar = cast_matrix<Real>(dec.a_bar);
  std::vector<MatrixT<Real>> c_bar;
  for (const auto& c : dec.c_bar) c_bar.push_back(cast_matrix<Real>(c));
  VectorT<Real> z = s.x0 ? VectorT<Real>(t_inv * s.x0->template cast<Real>()) : normal_vector<Real>(init_rng, n);
  std::vector<NodeState<Real>> states;
  for (int i = 0; i < n_nodes; ++i) {
    std::vector<VectorT<Real>> blocks;
    if (s.initial_estimates) {
      blocks = split_blocks<Real>(dec, VectorT<Real>(t_inv * (*s.initial_estimates)[static_cast<std::size_t>(i)].template cast<Real>()));
    } else {
      for (int j = 0; j < n_nodes; ++j) blocks.push_back(normal_vector<Real>(init_rng, dec.block_dims[static_cast<std::size_t>(j)]));
    }
    states.push_back(initial_node_state(model, i, std::move(blocks)));
  }
  VectorT<Real> dz = VectorT<Real>::Zero(n);
  if (s.disturbance) dz = t_inv * VectorT<Real>::Constant(n, Real(*s.disturbance));

  for (std::int64_t k = 0;; ++k) {
    const auto zb = split_blocks<Real>(dec, z);
    tr.x.push_back(model.t * z);
    std::vector<VectorT<Real>> xh;
    std::vector<std::vector<VectorT<Real>>> es;
    std::vector<std::vector<Freshness>> ts;
    for (int i = 0; i < n_nodes; ++i) {
      const auto& st = states[static_cast<std::size_t>(i)];
      xh.push_back(full_estimate(model, st));
      std::vector<VectorT<Real>> e;
      for (int j = 0; j < n_nodes; ++j) e.push_back(st.z_hat[static_cast<std::size_t>(j)] - zb[static_cast<std::size_t>(j)]);
      es.push_back(std::move(e));
      ts.push_back(st.tau);
    }
    tr.x_hat.push_back(std::move(xh));
    tr.e_sub.push_back(std::move(es));
    tr.tau.push_back(std::move(ts));
    if (k == s.horizon()) break;

    std::vector<VectorT<Real>> ys;
    for (int i = 0; i < n_nodes; ++i) ys.push_back(c_bar[static_cast<std::size_t>(i)] * z);
    states = network_step(model, states, ys, s.graph->in_neighbors(k), &tr.adoptions[static_cast<std::size_t>(k)]);
    z = (a_bar * z + dz).eval();
  }
  return tr;
}

template <class Real>
Message<Real> honest_message(int i, const Freshness& tau, const Real& x_hat) {
  Message<Real> m;
  m.sender = i;
  if (tau.triggered()) m.tau = tau.value();
  m.value = x_hat;
  return m;
}

template <class Real>
SimTrace<Real> run_resilient(const Scenario& s) {
  const ScalarModel sm = scalar_model(*s.system);
  const int n_nodes = s.node_count();
  const Real a(sm.a);
  SimTrace<Real> tr;
  start_trace(tr, s, {1});
  tr.protocol = ProtocolKind::resilient;
  tr.source = sm.source;

  auto init_rng = stream(s.seed, 1);
  auto adv_rng = stream(s.seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Real x = s.x0 ? Real((*s.x0)(0)) : Real(normal(init_rng));
  std::vector<ResilientNodeState<Real>> st(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    auto& node = st[static_cast<std::size_t>(i)];
    node.x_hat = s.initial_estimates ? Real((*s.initial_estimates)[static_cast<std::size_t>(i)](0)) : Real(normal(init_rng));
    node.tau = sm.source[static_cast<std::size_t>(i)] ? Freshness::of(0) : Freshness::omega();
  }
  std::vector<const AdversarySpec*> adversary(static_cast<std::size_t>(n_nodes), nullptr);
  for (const auto& a_spec : s.adversaries) adversary[static_cast<std::size_t>(a_spec.node)] = &a_spec;
  std::vector<std::vector<Message<Real>>> honest_history(static_cast<std::size_t>(n_nodes));
  const Real d = s.disturbance ? Real(*s.disturbance) : Real(0);

  for (std::int64_t k = 0;; ++k) {
    tr.x.push_back(VectorT<Real>::Constant(1, x));
    std::vector<VectorT<Real>> xh;
    std::vector<std::vector<VectorT<Real>>> es;
    std::vector<std::vector<Freshness>> ts;
    std::vector<std::vector<Slot<Real>>> sl;
    for (const auto& node : st) {
      xh.push_back(VectorT<Real>::Constant(1, node.x_hat));
      es.push_back({VectorT<Real>::Constant(1, node.x_hat - x)});
      ts.push_back({node.tau});
      sl.push_back(node.slots);
    }
    tr.x_hat.push_back(std::move(xh));
    tr.e_sub.push_back(std::move(es));
    tr.tau.push_back(std::move(ts));
    tr.slots.push_back(std::move(sl));
    if (k == s.horizon()) {
      tr.dropped.push_back(std::vector<int>(static_cast<std::size_t>(n_nodes), 0));
      break;
    }

    std::vector<Message<Real>> honest;
    for (int i = 0; i < n_nodes; ++i) {
      const auto& node = st[static_cast<std::size_t>(i)];
      honest.push_back(honest_message(i, node.tau, node.x_hat));
      honest_history[static_cast<std::size_t>(i)].push_back(honest.back());
    }
    const auto nbrs = s.graph->in_neighbors(k);
    std::vector<ResilientNodeState<Real>> next = st;
    std::vector<int> dropped(static_cast<std::size_t>(n_nodes), 0);
    for (int i = 0; i < n_nodes; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      std::vector<Message<Real>> inbox;
      for (int u : nbrs[iu]) {
        const auto uu = static_cast<std::size_t>(u);
        if (adversary[uu] != nullptr) {
          auto m = apply_adversary<Real>(*adversary[uu], x, k, honest_history[uu], adv_rng);
          if (m) inbox.push_back(*m);
        } else {
          inbox.push_back(honest[uu]);
        }
      }
      if (sm.source[iu]) {
        const Real c(sm.c[iu]);
        next[iu].x_hat = source_luenberger<Real>(st[iu].x_hat, c * x, a, c, Real(s.scalar_gains[iu]));
        next[iu].tau = Freshness::of(0);
      } else {
        auto r = resilient_nonsource_step<Real>(st[iu], inbox, k, a, s.f);
        next[iu] = std::move(r.next);
        dropped[iu] = r.dropped;
      }
    }
    tr.dropped.push_back(std::move(dropped));
    st = std::move(next);
    x = a * x + d;
  }
  return tr;
}

/// Parent of each node in a breadth-first forest grown from the sources over E[k].
inline std::vector<int> bfs_parents(const EdgeSet& edges, int nodes, const std::vector<char>& source) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(nodes));
  for (const auto& [from, to] : edges) out[static_cast<std::size_t>(from)].push_back(to);
  for (auto& v : out) std::sort(v.begin(), v.end());
  std::vector<int> parent(static_cast<std::size_t>(nodes), -1);
  std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
  std::vector<int> frontier;
  for (int i = 0; i < nodes; ++i) {
    if (source[static_cast<std::size_t>(i)]) {
      seen[static_cast<std::size_t>(i)] = 1;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    std::vector<int> nxt;
    for (int u : frontier) {
      for (int v : out[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          parent[static_cast<std::size_t>(v)] = u;
          nxt.push_back(v);
        }
      }
    }
    frontier = std::move(nxt);
  }
  return parent;
}

template <class Real>
SimTrace<Real> run_naive(const Scenario& s) {
  const ScalarModel sm = scalar_model(*s.system);
  const int n_nodes = s.node_count();
  const Real a(sm.a);
  SimTrace<Real> tr;
  start_trace(tr, s, {1});
  tr.protocol = ProtocolKind::naive;
  tr.source = sm.source;
  auto init_rng = stream(s.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Real x = s.x0 ? Real((*s.x0)(0)) : Real(normal(init_rng));
  std::vector<Real> xh(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    xh[static_cast<std::size_t>(i)] =
        s.initial_estimates ? Real((*s.initial_estimates)[static_cast<std::size_t>(i)](0)) : Real(normal(init_rng));
  }
  const Real d = s.disturbance ? Real(*s.disturbance) : Real(0);
  for (std::int64_t k = 0;; ++k) {
    tr.x.push_back(VectorT<Real>::Constant(1, x));
    std::vector<VectorT<Real>> xv;
    std::vector<std::vector<VectorT<Real>>> es;
    std::vector<std::vector<Freshness>> ts;
    for (int i = 0; i < n_nodes; ++i) {
      xv.push_back(VectorT<Real>::Constant(1, xh[static_cast<std::size_t>(i)]));
      es.push_back({VectorT<Real>::Constant(1, xh[static_cast<std::size_t>(i)] - x)});
      ts.push_back({sm.source[static_cast<std::size_t>(i)] ? Freshness::of(0) : Freshness::omega()});
    }
    tr.x_hat.push_back(std::move(xv));
    tr.e_sub.push_back(std::move(es));
    tr.tau.push_back(std::move(ts));
    if (k == s.horizon()) break;

    const auto nbrs = s.graph->in_neighbors(k);
    const auto parent = bfs_parents(s.graph->edges_at(k), n_nodes, sm.source);
    std::vector<Real> next = xh;
    double row_error = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (sm.source[iu]) {
        const Real c(sm.c[iu]);
        next[iu] = source_luenberger<Real>(xh[iu], c * x, a, c, Real(s.scalar_gains[iu]));
        continue;
      }
      // Weights over N_i[k] and i itself.
      std::vector<std::pair<int, double>> w;
      if (s.weights == NaiveWeights::uniform) {
        const double share = 1.0 / static_cast<double>(nbrs[iu].size() + 1);
        w.emplace_back(i, share);
        for (int u : nbrs[iu]) w.emplace_back(u, share);
      } else if (parent[iu] >= 0) {
        w.emplace_back(parent[iu], 1.0);
      } else {
        w.emplace_back(i, 1.0);
      }
      double sum = 0.0;
      Real mix(0);
      for (const auto& [u, wt] : w) {
        sum += wt;
        mix += Real(wt) * xh[static_cast<std::size_t>(u)];
      }
      row_error = std::max(row_error, std::abs(sum - 1.0));
      next[iu] = a * mix;
    }
    tr.weight_row_error.push_back(row_error);
    xh = std::move(next);
    x = a * x + d;
  }
  return tr;
}

}  // namespace detail

/// Runs the scenario in number type Real. Deterministic under (scenario, seed).
template <class Real>
SimTrace<Real> run(const Scenario& s) {
  validate_scenario(s);
  switch (s.protocol) {
    case ProtocolKind::aoi:
      return detail::run_aoi<Real>(s);
    case ProtocolKind::resilient:
      return detail::run_resilient<Real>(s);
    case ProtocolKind::naive:
      return detail::run_naive<Real>(s);
  }
  throw ValidationError("unknown protocol");
}

// ---------------------------------------------------------------------------
// Verification.

struct RateReport {
  bool pass = false;
  bool vacuous = false;
  bool envelope_ok = true;
  std::int64_t from = 0;
  std::int64_t to = 0;
  double bound = 0.0;                // ln(rho) + slack
  std::vector<double> node_slopes;   // NaN where the node's error is identically zero
  double max_slope = std::numeric_limits<double>::quiet_NaN();  // fit of max-over-nodes
  std::string message;
};

inline constexpr double kRateSlack = 0.02;
inline constexpr std::int64_t kMinRateWindow = 10;

namespace detail {

inline double ls_slope(const std::vector<double>& ks, const std::vector<double>& ys) {
  const double n = static_cast<double>(ks.size());
  double mk = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    mk += ks[i];
    my += ys[i];
  }
  mk /= n;
  my /= n;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    num += (ks[i] - mk) * (ys[i] - my);
    den += (ks[i] - mk) * (ks[i] - mk);
  }
  return num / den;
}

}  // namespace detail

/// Least-squares slope of log ||e_i[k]|| over [burn_in, window_end] for every selected node and
/// for the max over nodes. Passes when every slope is at most ln(rho) + 0.02 and the scaled
/// envelope max_i ||e_i[k]|| / (rho e^0.02)^k on the second half of the window does not exceed
/// its first-half maximum.
template <class Real>
RateReport verify_rate(const SimTrace<Real>& tr, double rho, std::int64_t burn_in,
                       std::optional<std::int64_t> window_end = {}, std::vector<char> mask = {}) {
  RateReport rep;
  rep.from = burn_in;
  rep.to = window_end ? std::min(*window_end, tr.horizon) : tr.horizon;
  rep.bound = std::log(rho) + kRateSlack;
  if (burn_in < 0 || rep.to - rep.from + 1 < kMinRateWindow) {
    throw HorizonTooShort("verify_rate: window [" + std::to_string(rep.from) + ", " + std::to_string(rep.to) +
                          "] is shorter than " + std::to_string(kMinRateWindow) + " steps");
  }
  if (mask.empty()) mask.assign(static_cast<std::size_t>(tr.nodes), 1);
  std::vector<double> ks;
  for (std::int64_t k = rep.from; k <= rep.to; ++k) ks.push_back(static_cast<double>(k));
  std::vector<double> max_log;
  bool any_positive = false;
  std::vector<std::vector<double>> logs(static_cast<std::size_t>(tr.nodes));
  for (std::int64_t k = rep.from; k <= rep.to; ++k) {
    Real worst(0);
    for (int i = 0; i < tr.nodes; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      const Real e = tr.error_norm(static_cast<std::size_t>(k), static_cast<std::size_t>(i));
      if (e > worst) worst = e;
      logs[static_cast<std::size_t>(i)].push_back(e > 0 ? log_double(e) : -std::numeric_limits<double>::infinity());
    }
    if (worst > 0) any_positive = true;
    max_log.push_back(worst > 0 ? log_double(worst) : -std::numeric_limits<double>::infinity());
  }
  if (!any_positive) {
    rep.pass = true;
    rep.vacuous = true;
    rep.message = "finite-time, rate vacuous";
    return rep;
  }
  bool ok = true;
  auto fit = [&](const std::vector<double>& ys) {
    std::vector<double> kk;
    std::vector<double> yy;
    for (std::size_t t = 0; t < ys.size(); ++t) {
      if (std::isfinite(ys[t])) {
        kk.push_back(ks[t]);
        yy.push_back(ys[t]);
      }
    }
    if (kk.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return detail::ls_slope(kk, yy);
  };
  for (int i = 0; i < tr.nodes; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) {
      rep.node_slopes.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double sl = fit(logs[static_cast<std::size_t>(i)]);
    rep.node_slopes.push_back(sl);
    if (std::isfinite(sl) && sl > rep.bound) ok = false;
  }
  rep.max_slope = fit(max_log);
  if (std::isfinite(rep.max_slope) && rep.max_slope > rep.bound) ok = false;
  // Envelope: compare log(max_i ||e||) - k (ln(rho) + slack) across the two halves.
  const std::size_t half = max_log.size() / 2;
  double first = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < max_log.size(); ++t) {
    const double scaled = max_log[t] - ks[t] * rep.bound;
    double& side = t < half ? first : second;
    side = std::max(side, scaled);
  }
  rep.envelope_ok = second <= first;
  rep.pass = ok && rep.envelope_ok;
  rep.message = rep.pass ? "rate verified" : (rep.envelope_ok ? "slope above bound" : "envelope grows");
  return rep;
}

struct FiniteTimeReport {
  bool pass = true;
  std::optional<std::int64_t> first_violation;
  double worst_after = 0.0;
};

inline constexpr double kFiniteTimeTol = 1e-8;

/// Every selected node has ||e_i[k]|| <= 1e-8 for all k >= deadline.
template <class Real>
FiniteTimeReport verify_finite_time(const SimTrace<Real>& tr, std::int64_t deadline, std::vector<char> mask = {}) {
  FiniteTimeReport rep;
  if (mask.empty()) mask.assign(static_cast<std::size_t>(tr.nodes), 1);
  for (std::int64_t k = std::max<std::int64_t>(0, deadline); k <= tr.horizon; ++k) {
    for (int i = 0; i < tr.nodes; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      const double e = to_double(tr.error_norm(static_cast<std::size_t>(k), static_cast<std::size_t>(i)));
      rep.worst_after = std::max(rep.worst_after, e);
      if (!(e <= kFiniteTimeTol) && !rep.first_violation) {
        rep.pass = false;
        rep.first_violation = k;
      }
    }
  }
  return rep;
}

/// True when the error of some node grows by more than 1e6 over its starting value.
template <class Real>
bool diverges(const SimTrace<Real>& tr, double factor = 1e6) {
  Real start(0);
  Real peak(0);
  for (int i = 0; i < tr.nodes; ++i) {
    start = std::max(start, tr.error_norm(0, static_cast<std::size_t>(i)));
    for (std::size_t k = 0; k < tr.steps(); ++k) peak = std::max(peak, tr.error_norm(k, static_cast<std::size_t>(i)));
  }
  return to_double(peak) > factor * std::max(1.0, to_double(start));
}

}  // namespace aoi
