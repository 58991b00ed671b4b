#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/freshness.hpp"
#include "aoi/gains.hpp"
#include "aoi/linalg.hpp"
#include "aoi/lti.hpp"
#include "aoi/numeric.hpp"

namespace aoi {

/// Decomposition blocks and gains converted to the working number type.
template <class Real>
struct ProtocolModel {
  int nodes = 0;
  std::vector<int> dims;
  // a[j][q] = A_jq, f[j][q] = A_jq - L_j C_jq (F_jj on the diagonal, G_jq below it).
  std::vector<std::vector<MatrixT<Real>>> a;
  std::vector<std::vector<MatrixT<Real>>> f;
  std::vector<MatrixT<Real>> l;
  MatrixT<Real> t;

  bool is_source(int j) const { return dims[static_cast<std::size_t>(j)] > 0; }
};

template <class Real>
ProtocolModel<Real> make_protocol_model(const Decomposition& dec, const ObserverGainSet& gains) {
  ProtocolModel<Real> m;
  m.nodes = dec.node_count();
  m.dims = dec.block_dims;
  m.t = cast_matrix<Real>(dec.t);
  if (static_cast<int>(gains.l.size()) != m.nodes) throw ValidationError("gain set does not match node count");
  m.a.resize(static_cast<std::size_t>(m.nodes));
  m.f.resize(static_cast<std::size_t>(m.nodes));
  for (int j = 0; j < m.nodes; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Matrix& lj = gains.l[ju];
    if (dec.is_source(j) && (lj.rows() != dec.block_dims[ju] || lj.cols() != dec.c_bar[ju].rows())) {
      throw ValidationError("missing or mis-shaped gain for sub-state " + std::to_string(j));
    }
    m.l.push_back(cast_matrix<Real>(lj));
    for (int q = 0; q <= j; ++q) {
      const Matrix ajq = dec.a_block(j, q);
      m.a[ju].push_back(cast_matrix<Real>(ajq));
      if (dec.is_source(j)) {
        m.f[ju].push_back(MatrixT<Real>(m.a[ju].back() - m.l.back() * cast_matrix<Real>(dec.c_block(j, q))));
      } else {
        m.f[ju].push_back(MatrixT<Real>(ajq.rows(), ajq.cols()));
      }
    }
  }
  return m;
}

template <class Real>
struct NodeState {
  std::vector<Freshness> tau;
  std::vector<VectorT<Real>> z_hat;
};

/// What a node sends at step k: a faithful copy of its state at the start of the step.
template <class Real>
struct Broadcast {
  int sender = -1;
  std::vector<Freshness> tau;
  std::vector<VectorT<Real>> z_hat;
};

template <class Real>
Broadcast<Real> make_broadcast(int sender, const NodeState<Real>& s) {
  return {sender, s.tau, s.z_hat};
}

/// Initial state: sources hold index 0 on their own sub-state, everything else starts at omega.
template <class Real>
NodeState<Real> initial_node_state(const ProtocolModel<Real>& m, int node, std::vector<VectorT<Real>> z0) {
  if (static_cast<int>(z0.size()) != m.nodes) throw DimensionMismatch("initial_node_state: block count");
  NodeState<Real> s;
  for (int j = 0; j < m.nodes; ++j) {
    if (z0[static_cast<std::size_t>(j)].size() != m.dims[static_cast<std::size_t>(j)]) {
      throw DimensionMismatch("initial_node_state: block length");
    }
    s.tau.push_back(j == node && m.is_source(j) ? Freshness::of(0) : Freshness::omega());
  }
  s.z_hat = std::move(z0);
  return s;
}

/// Source node j on its own sub-state: F_jj z + sum_{q<j} G_jq z^(q) + L_j y_j.
template <class Real>
VectorT<Real> source_update(const ProtocolModel<Real>& m, const NodeState<Real>& s, int j, const VectorT<Real>& y_j) {
  if (!m.is_source(j)) throw ValidationError("source_update: node " + std::to_string(j) + " has an empty block");
  const auto ju = static_cast<std::size_t>(j);
  if (m.l[ju].cols() != y_j.size()) throw DimensionMismatch("source_update: measurement length");
  VectorT<Real> out = m.f[ju][ju] * s.z_hat[ju] + m.l[ju] * y_j;
  for (int q = 0; q < j; ++q) {
    if (m.is_source(q)) out += m.f[ju][static_cast<std::size_t>(q)] * s.z_hat[static_cast<std::size_t>(q)];
  }
  return out;
}

namespace detail {

/// A_jj * own_or_adopted + sum_{q<j} A_jq z_i^(q).
template <class Real>
VectorT<Real> propagate_block(const ProtocolModel<Real>& m, const NodeState<Real>& s, int j,
                              const VectorT<Real>& block) {
  const auto ju = static_cast<std::size_t>(j);
  VectorT<Real> out = m.a[ju][ju] * block;
  for (int q = 0; q < j; ++q) {
    if (m.is_source(q)) out += m.a[ju][static_cast<std::size_t>(q)] * s.z_hat[static_cast<std::size_t>(q)];
  }
  return out;
}

}  // namespace detail

template <class Real>
struct NonsourceResult {
  Freshness tau;
  VectorT<Real> z_hat;
  std::optional<int> adopted_from;
};

/// Freshness update for a non-source node on sub-state j. `inbox` holds the broadcasts of N_i[k].
/// Ties among equal minimal indices go to the lowest sender id.
template <class Real>
NonsourceResult<Real> nonsource_update(const ProtocolModel<Real>& m, const NodeState<Real>& s, int j,
                                       const std::vector<const Broadcast<Real>*>& inbox) {
  const auto ju = static_cast<std::size_t>(j);
  const Broadcast<Real>* best = nullptr;
  for (const auto* b : inbox) {
    if (b == nullptr || b->tau.size() != m.dims.size() || b->z_hat.size() != m.dims.size() ||
        b->z_hat[ju].size() != m.dims[ju]) {
      throw MalformedBroadcast("nonsource_update: broadcast lacks sub-state " + std::to_string(j));
    }
    const Freshness& t = b->tau[ju];
    if (t.is_omega()) continue;
    // Triggered receivers only consider strictly fresher senders.
    if (s.tau[ju].triggered() && !(t.value() < s.tau[ju].value())) continue;
    if (best == nullptr || t.value() < best->tau[ju].value() ||
        (t.value() == best->tau[ju].value() && b->sender < best->sender)) {
      best = b;
    }
  }
  NonsourceResult<Real> out;
  if (best != nullptr) {
    out.tau = Freshness::of(best->tau[ju].value() + 1);
    out.z_hat = detail::propagate_block(m, s, j, best->z_hat[ju]);
    out.adopted_from = best->sender;
  } else {
    out.tau = s.tau[ju].next();
    out.z_hat = detail::propagate_block(m, s, j, s.z_hat[ju]);
  }
  return out;
}

/// x_hat_i = T * [z_hat^(1); ...; z_hat^(N)].
template <class Real>
VectorT<Real> full_estimate(const ProtocolModel<Real>& m, const NodeState<Real>& s) {
  VectorT<Real> flat(m.t.cols());
  Eigen::Index at = 0;
  for (int j = 0; j < m.nodes; ++j) {
    const auto& b = s.z_hat[static_cast<std::size_t>(j)];
    if (b.size() != m.dims[static_cast<std::size_t>(j)]) throw DimensionMismatch("full_estimate: block length");
    flat.segment(at, b.size()) = b;
    at += b.size();
  }
  return m.t * flat;
}

struct Adoption {
  int node = -1;
  int substate = -1;
  int from = -1;
};

/// One synchronous step of the whole network. `ys[i]` is y_i[k]; `in_nbrs[i]` is N_i[k].
template <class Real>
std::vector<NodeState<Real>> network_step(const ProtocolModel<Real>& m, const std::vector<NodeState<Real>>& states,
                                          const std::vector<VectorT<Real>>& ys,
                                          const std::vector<std::vector<int>>& in_nbrs,
                                          std::vector<Adoption>* adoptions = nullptr) {
  std::vector<Broadcast<Real>> sent;
  sent.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) sent.push_back(make_broadcast(static_cast<int>(i), states[i]));
  std::vector<NodeState<Real>> next = states;
  for (int i = 0; i < m.nodes; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    std::vector<const Broadcast<Real>*> inbox;
    for (int u : in_nbrs[iu]) inbox.push_back(&sent[static_cast<std::size_t>(u)]);
    for (int j = 0; j < m.nodes; ++j) {
      if (!m.is_source(j)) continue;
      const auto ju = static_cast<std::size_t>(j);
      if (i == j) {
        next[iu].z_hat[ju] = source_update(m, states[iu], j, ys[iu]);
        next[iu].tau[ju] = Freshness::of(0);
        continue;
      }
      auto r = nonsource_update(m, states[iu], j, inbox);
      next[iu].tau[ju] = r.tau;
      next[iu].z_hat[ju] = std::move(r.z_hat);
      if (r.adopted_from && adoptions != nullptr) adoptions->push_back({i, j, *r.adopted_from});
    }
  }
  return next;
}

}  // namespace aoi
