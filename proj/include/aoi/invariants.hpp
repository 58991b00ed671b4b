#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "aoi/graph.hpp"
#include "aoi/numeric.hpp"
#include "aoi/simulator.hpp"

namespace aoi {

struct InvariantOptions {
  /// Tolerance on the delayed-error identity, scaled by max(1, ||A^tau e||).
  double delayed_error_tol = 1e-8;
  /// Slack on the interval containment of resilient estimates, scaled by max(1, |bound|).
  double hull_slack = 1e-9;
  /// Cap on reported violations so a broken run stays readable.
  std::size_t max_reports = 50;
};

namespace detail {

class ViolationLog {
 public:
  explicit ViolationLog(std::size_t cap) : cap_(cap) {}
  void add(const std::string& what, std::int64_t k, int node, int substate = -1) {
    ++count_;
    if (out_.size() >= cap_) return;
    std::string s = what + " at k=" + std::to_string(k) + " node=" + std::to_string(node);
    if (substate >= 0) s += " substate=" + std::to_string(substate);
    out_.push_back(std::move(s));
  }
  std::vector<std::string> finish() {
    if (count_ > out_.size()) out_.push_back("... " + std::to_string(count_ - out_.size()) + " more");
    return std::move(out_);
  }

 private:
  std::size_t cap_;
  std::size_t count_ = 0;
  std::vector<std::string> out_;
};

template <class Real>
void check_aoi(const SimTrace<Real>& tr, const Scenario& s, const InvariantOptions& opt, ViolationLog& log) {
  const GraphSequence& g = *s.graph;
  const Decomposition& dec = s.dec;
  const int n = tr.nodes;
  const auto steps = static_cast<std::int64_t>(tr.steps());
  const ConditionReport cond = check_conditions(g);
  const bool gated = cond.c1 && cond.c3;
  const IntervalMaps maps = g.interval_maps();
  const std::int64_t t_trigger = g.trigger_time();
  const std::int64_t spread = 2 * static_cast<std::int64_t>(n - 1);

  int first_block = -1;
  for (int j = 0; j < n && first_block < 0; ++j) {
    if (dec.is_source(j)) first_block = j;
  }
  const MatrixT<Real> a11 = first_block >= 0 ? cast_matrix<Real>(dec.a_block(first_block, first_block)) : MatrixT<Real>();
  // A constant disturbance adds -sum_{p<m} A11^p d1 to the delayed error, d1 being its first-block part.
  VectorT<Real> d1;
  if (first_block >= 0) {
    d1 = VectorT<Real>::Zero(a11.rows());
    if (s.disturbance) {
      const VectorT<Real> dz =
          cast_matrix<Real>(dec.t_inv) * VectorT<Real>::Constant(dec.state_dim(), Real(*s.disturbance));
      d1 = split_blocks<Real>(dec, dz)[static_cast<std::size_t>(first_block)];
    }
  }

  for (std::int64_t k = 0; k < steps; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    // Adoptions must follow real edges.
    for (const auto& ad : tr.adoptions[ku]) {
      if (g.edges_at(k).count({ad.from, ad.node}) == 0) log.add("adoption without an edge", k, ad.node, ad.substate);
    }
    for (int i = 0; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      for (int j = 0; j < n; ++j) {
        if (!dec.is_source(j)) continue;
        const auto ju = static_cast<std::size_t>(j);
        const Freshness& t = tr.tau[ku][iu][ju];
        if (i == j) {
          if (t != Freshness::of(0)) log.add("source index is not 0", k, i, j);
          continue;
        }
        if (t.triggered() && t.value() < 1) log.add("non-source index below 1", k, i, j);
        if (k + 1 < steps) {
          const Freshness& tn = tr.tau[ku + 1][iu][ju];
          if (t.triggered() && tn.is_omega()) log.add("index returned to omega", k + 1, i, j);
          if (t.triggered() && tn.triggered() && tn.value() > t.value() + 1) log.add("index grew by more than 1", k + 1, i, j);
          // The source is always the freshest neighbour for its own sub-state.
          if (g.edges_at(k).count({j, i}) != 0) {
            const bool adopted = std::any_of(tr.adoptions[ku].begin(), tr.adoptions[ku].end(), [&](const Adoption& a) {
              return a.node == i && a.substate == j && a.from == j;
            });
            if (!adopted || tn != Freshness::of(1)) log.add("source not preferred", k, i, j);
          }
        }
        if (gated && k >= t_trigger) {
          if (t.is_omega()) {
            log.add("index untriggered after t_{N-1}", k, i, j);
          } else if (k <= g.horizon() && t.value() > spread * maps.g[ku]) {
            log.add("delay bound 2(N-1)g(k) exceeded", k, i, j);
          }
        }
        if (j == first_block && t.triggered() && t.value() <= k) {
          const std::int64_t m = t.value();
          VectorT<Real> predicted = matrix_power<Real>(a11, m) * tr.e_sub[static_cast<std::size_t>(k - m)][ju][ju];
          if (s.disturbance) {
            VectorT<Real> acc = d1;
            for (std::int64_t p = 0; p < m; ++p) {
              predicted -= acc;
              acc = a11 * acc;
            }
          }
          const Real gap = vec_norm<Real>(VectorT<Real>(tr.e_sub[ku][iu][ju] - predicted));
          const double scale = std::max(1.0, to_double(vec_norm<Real>(predicted)));
          if (to_double(gap) > opt.delayed_error_tol * scale) log.add("delayed-error identity fails", k, i, j);
        }
      }
    }
  }
}

template <class Real>
void check_resilient(const SimTrace<Real>& tr, const Scenario& s, const InvariantOptions& opt, ViolationLog& log) {
  const GraphSequence& g = *s.graph;
  const ScalarModel sm = scalar_model(*s.system);
  const Real a(sm.a);
  const int n = tr.nodes;
  const auto full = static_cast<std::size_t>(2 * s.f + 1);
  const auto steps = static_cast<std::int64_t>(tr.steps());
  std::set<int> sources;
  std::vector<int> regular_sources;
  for (int i = 0; i < n; ++i) {
    if (sm.source[static_cast<std::size_t>(i)]) {
      sources.insert(i);
      if (tr.regular[static_cast<std::size_t>(i)]) regular_sources.push_back(i);
    }
  }
  const std::int64_t nonsources = n - static_cast<std::int64_t>(sources.size());
  std::optional<std::int64_t> period = s.robust_period;
  if (!period && g.spec().kind == IntervalKind::constant) period = g.spec().period;
  bool robust_ok = false;
  if (period && nonsources > 0 && nonsources <= kMaxRobustSubsetBits) {
    robust_ok = is_jointly_strongly_r_robust(g, sources, 3 * s.f + 1, *period).ok;
  }
  const std::int64_t trigger_by = period ? nonsources * *period : 0;
  const std::int64_t tau_cap = period ? 2 * nonsources * *period : 0;
  const bool grows = real_abs(a) >= Real(1);

  std::vector<Real> a_pow{Real(1)};
  for (std::int64_t k = 0; k < steps; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    for (int i = 0; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (!tr.regular[iu] || sm.source[iu]) continue;
      const Freshness& t = tr.tau[ku][iu][0];
      const auto& slots = tr.slots[ku][iu];
      if (slots.size() > full) log.add("more than 2f+1 slots", k, i);
      std::set<int> members;
      for (const auto& sl : slots) {
        if (!members.insert(sl.node).second) log.add("duplicate member", k, i);
        if (sl.phi > k) log.add("slot time-stamp in the future", k, i);
        if (sl.recorded_tau + (k - sl.phi) != sl.d) log.add("slot bookkeeping broken", k, i);
      }
      if (t.triggered() != (slots.size() == full)) log.add("trigger state disagrees with q", k, i);
      if (k + 1 < steps && t.triggered()) {
        const Freshness& tn = tr.tau[ku + 1][iu][0];
        const auto& nxt = tr.slots[ku + 1][iu];
        if (tn.is_omega() || tn.value() > t.value() + 1) log.add("index-growth: index grew by more than 1", k + 1, i);
        for (std::size_t p = 0; p < std::min(slots.size(), nxt.size()); ++p) {
          if (nxt[p].d > slots[p].d + 1) log.add("index-growth: slot copy grew by more than 1", k + 1, i);
        }
      }
      if (robust_ok && k >= trigger_by) {
        if (t.is_omega()) {
          log.add("trigger: untriggered after (N-|S|)T", k, i);
        } else if (t.value() > tau_cap) {
          log.add("trigger: index above 2(N-|S|)T", k, i);
        }
      }
      if (grows && t.triggered() && !regular_sources.empty()) {
        const std::int64_t m = t.value();
        while (static_cast<std::int64_t>(a_pow.size()) <= m) a_pow.push_back(a_pow.back() * a);
        bool first = true;
        Real lo(0);
        Real hi(0);
        for (std::int64_t r = 1; r <= m && r <= k; ++r) {
          for (int src : regular_sources) {
            const Real v = a_pow[static_cast<std::size_t>(r)] * tr.x_hat[ku - static_cast<std::size_t>(r)][static_cast<std::size_t>(src)](0);
            if (first || v < lo) lo = v;
            if (first || v > hi) hi = v;
            first = false;
          }
        }
        if (!first) {
          const Real xi = tr.x_hat[ku][iu](0);
          const double scale = std::max({1.0, to_double(real_abs(lo)), to_double(real_abs(hi))});
          const Real slack(opt.hull_slack * scale);
          if (xi < lo - slack || xi > hi + slack) log.add("hull: estimate outside the source interval", k, i);
        }
      }
    }
  }
}

}  // namespace detail

/// Re-walks a finished trace and lists every per-step invariant that fails; empty means pass.
/// Connectivity-dependent bounds are only asserted when the schedule meets the matching
/// graph condition.
template <class Real>
std::vector<std::string> assert_online_invariants(const SimTrace<Real>& tr, const Scenario& s,
                                                  const InvariantOptions& opt = {}) {
  detail::ViolationLog log(opt.max_reports);
  if (static_cast<std::int64_t>(tr.steps()) != tr.horizon + 1) log.add("trace length differs from horizon", 0, -1);
  switch (tr.protocol) {
    case ProtocolKind::aoi:
      detail::check_aoi(tr, s, opt, log);
      break;
    case ProtocolKind::resilient:
      detail::check_resilient(tr, s, opt, log);
      break;
    case ProtocolKind::naive:
      for (std::size_t k = 0; k < tr.weight_row_error.size(); ++k) {
        if (tr.weight_row_error[k] > 1e-12) log.add("weights are not row-stochastic", static_cast<std::int64_t>(k), -1);
      }
      break;
  }
  return log.finish();
}

}  // namespace aoi
