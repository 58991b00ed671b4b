#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/errors.hpp"

namespace aoi {

/// Directed edge (from, to): node `from` can send to node `to`.
using Edge = std::pair<int, int>;
using EdgeSet = std::set<Edge>;

enum class IntervalKind { constant, floor_sqrt, linear, explicit_list };

struct IntervalSpec {
  IntervalKind kind = IntervalKind::constant;
  std::int64_t period = 1;  // constant
  double delta = 0.0;       // linear
};

/// t_{q+1} - t_q for the given kind at t_q.
inline std::int64_t interval_length(const IntervalSpec& spec, int nodes, std::int64_t t_q) {
  switch (spec.kind) {
    case IntervalKind::constant:
      return spec.period;
    case IntervalKind::floor_sqrt:
      return static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(t_q + 1))));
    case IntervalKind::linear: {
      const double rate = nodes > 1 ? spec.delta / (2.0 * (nodes - 1)) : 0.0;
      return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(rate * static_cast<double>(t_q))));
    }
    case IntervalKind::explicit_list:
      break;
  }
  throw ValidationError("interval_length: explicit intervals have no generating rule");
}

/// t_0 = 0, t_1, ... continuing until the first t_q strictly beyond `horizon`.
inline std::vector<std::int64_t> make_intervals(const IntervalSpec& spec, int nodes, std::int64_t horizon) {
  if (spec.kind == IntervalKind::constant && spec.period < 1) throw ValidationError("period must be >= 1");
  std::vector<std::int64_t> t{0};
  while (t.back() <= horizon) t.push_back(t.back() + interval_length(spec, nodes, t.back()));
  return t;
}

/// m(k), M(k) and g(k) for every step 0..horizon.
struct IntervalMaps {
  std::vector<std::int64_t> m;
  std::vector<std::int64_t> big_m;
  std::vector<std::int64_t> g;
};

class GraphSequence {
 public:
  GraphSequence(int nodes, std::vector<std::int64_t> intervals, std::map<std::int64_t, EdgeSet> schedule,
                std::int64_t horizon, IntervalSpec spec = {IntervalKind::explicit_list, 1, 0.0})
      : n_(nodes), t_(std::move(intervals)), edges_(std::move(schedule)), horizon_(horizon), spec_(spec) {
    if (n_ < 1) throw ValidationError("graph: N must be at least 1");
    if (horizon_ < 0) throw ValidationError("graph: horizon must be non-negative");
    if (t_.empty() || t_.front() != 0) throw ValidationError("graph: intervals must start at t_0 = 0");
    for (std::size_t q = 1; q < t_.size(); ++q) {
      if (t_[q] <= t_[q - 1]) throw ValidationError("graph: intervals must be strictly increasing");
    }
    if (t_.back() <= horizon_) {
      throw ValidationError("graph: intervals must extend beyond the horizon (last t_q = " +
                            std::to_string(t_.back()) + ", horizon = " + std::to_string(horizon_) + ")");
    }
    for (auto it = edges_.begin(); it != edges_.end();) {
      if (it->first < 0) throw ValidationError("graph: negative time-step in schedule");
      for (const auto& [from, to] : it->second) {
        if (from == to) throw ValidationError("graph: self-loop at k=" + std::to_string(it->first));
        if (from < 0 || from >= n_ || to < 0 || to >= n_) {
          throw ValidationError("graph: node id out of range at k=" + std::to_string(it->first));
        }
      }
      it = it->second.empty() ? edges_.erase(it) : std::next(it);
    }
  }

  int node_count() const { return n_; }
  std::int64_t horizon() const { return horizon_; }
  const std::vector<std::int64_t>& intervals() const { return t_; }
  const IntervalSpec& spec() const { return spec_; }
  const std::map<std::int64_t, EdgeSet>& schedule() const { return edges_; }

  const EdgeSet& edges_at(std::int64_t k) const {
    static const EdgeSet kEmpty;
    auto it = edges_.find(k);
    return it == edges_.end() ? kEmpty : it->second;
  }

  /// In-neighbour lists N_i[k], sorted ascending.
  std::vector<std::vector<int>> in_neighbors(std::int64_t k) const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n_));
    for (const auto& [from, to] : edges_at(k)) out[static_cast<std::size_t>(to)].push_back(from);
    return out;
  }

  /// t_{N-1}, or the last declared t_q if fewer intervals exist.
  std::int64_t trigger_time() const {
    const auto idx = static_cast<std::size_t>(std::max(0, n_ - 1));
    return idx < t_.size() ? t_[idx] : t_.back();
  }

  IntervalMaps interval_maps() const {
    IntervalMaps maps;
    std::size_t q = 0;
    for (std::int64_t k = 0; k <= horizon_; ++k) {
      while (t_[q + 1] <= k) ++q;
      maps.m.push_back(t_[q]);
      maps.big_m.push_back(t_[q + 1]);
      maps.g.push_back(t_[q + 1] - t_[q]);
    }
    return maps;
  }

 private:
  int n_;
  std::vector<std::int64_t> t_;
  std::map<std::int64_t, EdgeSet> edges_;
  std::int64_t horizon_;
  IntervalSpec spec_;
};

inline EdgeSet union_graph(const GraphSequence& seq, std::int64_t k1, std::int64_t k2) {
  if (k1 < 0 || k2 < k1 || k2 > seq.horizon()) {
    throw OutOfHorizon("union_graph: window [" + std::to_string(k1) + ", " + std::to_string(k2) +
                       "] is outside [0, " + std::to_string(seq.horizon()) + "]");
  }
  EdgeSet out;
  for (auto it = seq.schedule().lower_bound(k1); it != seq.schedule().end() && it->first <= k2; ++it) {
    out.insert(it->second.begin(), it->second.end());
  }
  return out;
}

namespace detail {

inline std::vector<char> reach_from(int start, const std::vector<std::vector<int>>& adj) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<int> stack{start};
  seen[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace detail

inline bool is_strongly_connected(const EdgeSet& edges, int nodes) {
  if (nodes <= 1) return true;
  std::vector<std::vector<int>> fwd(static_cast<std::size_t>(nodes));
  std::vector<std::vector<int>> bwd(static_cast<std::size_t>(nodes));
  for (const auto& [from, to] : edges) {
    if (from < 0 || from >= nodes || to < 0 || to >= nodes) throw ValidationError("edge node id out of range");
    fwd[static_cast<std::size_t>(from)].push_back(to);
    bwd[static_cast<std::size_t>(to)].push_back(from);
  }
  auto all = [](const std::vector<char>& s) { return std::all_of(s.begin(), s.end(), [](char c) { return c != 0; }); };
  return all(detail::reach_from(0, fwd)) && all(detail::reach_from(0, bwd));
}

struct ConditionReport {
  bool c1 = true;
  bool c2 = true;
  double delta_hat = 0.0;
  bool c3 = true;
  std::optional<std::size_t> c3_first_failure;  // interval index q
  bool c1_fails_c3_holds = false;
};

/// C1 over declared intervals up to the horizon, C2 via delta_hat over k in [H/2, H], C3 on every
/// complete interval inside the horizon.
inline ConditionReport check_conditions(const GraphSequence& seq) {
  ConditionReport rep;
  const auto& t = seq.intervals();
  const std::int64_t h = seq.horizon();
  std::int64_t prev_len = 0;
  for (std::size_t q = 0; q + 1 < t.size() && t[q] <= h; ++q) {
    const std::int64_t len = t[q + 1] - t[q];
    if (len < prev_len) rep.c1 = false;
    prev_len = len;
  }
  const IntervalMaps maps = seq.interval_maps();
  const int n = seq.node_count();
  for (std::int64_t k = std::max<std::int64_t>(1, h / 2); k <= h; ++k) {
    const double v = 2.0 * (n - 1) * static_cast<double>(maps.g[static_cast<std::size_t>(k)]) / static_cast<double>(k);
    rep.delta_hat = std::max(rep.delta_hat, v);
  }
  rep.c2 = rep.delta_hat < 1.0;
  for (std::size_t q = 0; q + 1 < t.size() && t[q + 1] - 1 <= h; ++q) {
    if (!is_strongly_connected(union_graph(seq, t[q], t[q + 1] - 1), n)) {
      rep.c3 = false;
      rep.c3_first_failure = q;
      break;
    }
  }
  rep.c1_fails_c3_holds = !rep.c1 && rep.c3;
  return rep;
}

// ---------------------------------------------------------------------------
// Robustness.

inline std::vector<std::vector<int>> in_neighbor_lists(const EdgeSet& edges, int nodes) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(nodes));
  for (const auto& [from, to] : edges) out[static_cast<std::size_t>(to)].push_back(from);
  return out;
}

/// Some i in `subset` has at least r in-neighbours outside `subset`.
inline bool is_r_reachable(const EdgeSet& edges, int nodes, const std::set<int>& subset, int r) {
  if (subset.empty()) throw ValidationError("is_r_reachable: the subset must be non-empty");
  const auto in = in_neighbor_lists(edges, nodes);
  for (int i : subset) {
    int outside = 0;
    for (int u : in[static_cast<std::size_t>(i)]) outside += subset.count(u) == 0 ? 1 : 0;
    if (outside >= r) return true;
  }
  return false;
}

inline constexpr int kMaxRobustSubsetBits = 22;

/// Every non-empty subset of V \ S is r-reachable, by exhaustive enumeration.
inline bool is_strongly_r_robust_wrt(const EdgeSet& edges, int nodes, const std::set<int>& sources, int r) {
  std::vector<int> rest;
  for (int i = 0; i < nodes; ++i) {
    if (sources.count(i) == 0) rest.push_back(i);
  }
  if (rest.empty()) return true;
  if (static_cast<int>(rest.size()) > kMaxRobustSubsetBits) {
    throw SubsetBlowup("is_strongly_r_robust_wrt: |V \\ S| = " + std::to_string(rest.size()) + " exceeds " +
                       std::to_string(kMaxRobustSubsetBits));
  }
  // Bit b stands for rest[b]; sources are never inside a candidate subset, so count them apart.
  std::vector<int> bit_of(static_cast<std::size_t>(nodes), -1);
  for (std::size_t b = 0; b < rest.size(); ++b) bit_of[static_cast<std::size_t>(rest[b])] = static_cast<int>(b);
  std::vector<std::uint32_t> in_mask(rest.size(), 0);
  std::vector<int> from_sources(rest.size(), 0);
  for (const auto& [from, to] : edges) {
    const int bt = bit_of[static_cast<std::size_t>(to)];
    if (bt < 0) continue;
    const int bf = bit_of[static_cast<std::size_t>(from)];
    if (bf < 0) {
      ++from_sources[static_cast<std::size_t>(bt)];
    } else {
      in_mask[static_cast<std::size_t>(bt)] |= 1u << bf;
    }
  }
  const std::uint32_t full = rest.size() == 32 ? ~0u : ((1u << rest.size()) - 1u);
  for (std::uint32_t c = 1; c <= full && c != 0; ++c) {
    bool reachable = false;
    for (std::uint32_t bits = c; bits != 0 && !reachable; bits &= bits - 1) {
      const auto b = static_cast<std::size_t>(std::countr_zero(bits));
      const int outside = from_sources[b] + std::popcount(in_mask[b] & ~c);
      reachable = outside >= r;
    }
    if (!reachable) return false;
  }
  return true;
}

struct JointRobustReport {
  bool ok = true;
  std::optional<std::int64_t> failing_window;
  std::int64_t windows_checked = 0;
};

/// Each complete window [kT, (k+1)T) inside the horizon has a strongly r-robust union.
inline JointRobustReport is_jointly_strongly_r_robust(const GraphSequence& seq, const std::set<int>& sources, int r,
                                                      std::int64_t period) {
  if (period < 1) throw ValidationError("is_jointly_strongly_r_robust: T must be >= 1");
  if (seq.horizon() + 1 < period) throw OutOfHorizon("is_jointly_strongly_r_robust: horizon shorter than T");
  JointRobustReport rep;
  for (std::int64_t w = 0; (w + 1) * period - 1 <= seq.horizon(); ++w) {
    ++rep.windows_checked;
    if (!is_strongly_r_robust_wrt(union_graph(seq, w * period, (w + 1) * period - 1), seq.node_count(), sources, r)) {
      rep.ok = false;
      rep.failing_window = w;
      return rep;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Generators.

enum class SequenceKind { periodic_sc, growing_sqrt, linear_growth, robust };

struct GenerateParams {
  SequenceKind kind = SequenceKind::periodic_sc;
  std::int64_t period = 1;
  double delta = 0.0;
  int r = 1;
  std::set<int> sources;
  /// Probability of each extra (non-required) ordered pair appearing in a window.
  double extra_edge_prob = 0.1;
};

inline constexpr int kGenerationRetries = 64;

namespace detail {

inline std::int64_t uniform_step(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline void place_extra_edges(std::map<std::int64_t, EdgeSet>& sched, int nodes, std::int64_t lo, std::int64_t hi,
                              double prob, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(prob);
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      if (i != j && coin(rng)) sched[uniform_step(rng, lo, hi)].insert({i, j});
    }
  }
}

}  // namespace detail

/// Seeded sequence whose intervals (or windows) satisfy the matching checker.
inline GraphSequence generate_sequence(const GenerateParams& p, int nodes, std::uint64_t seed, std::int64_t horizon) {
  if (nodes < 1) throw ValidationError("generate_sequence: N must be >= 1");
  IntervalSpec spec;
  switch (p.kind) {
    case SequenceKind::periodic_sc:
    case SequenceKind::robust:
      spec = {IntervalKind::constant, p.period, 0.0};
      break;
    case SequenceKind::growing_sqrt:
      spec = {IntervalKind::floor_sqrt, 1, 0.0};
      break;
    case SequenceKind::linear_growth:
      if (!(p.delta >= 0.0 && p.delta < 1.0)) throw ValidationError("generate_sequence: delta must lie in [0, 1)");
      spec = {IntervalKind::linear, 1, p.delta};
      break;
  }
  if (p.kind == SequenceKind::robust) {
    if (p.r < 1 || p.r > nodes - 1) throw ValidationError("generate_sequence: r must lie in [1, N-1]");
    if (static_cast<int>(p.sources.size()) < p.r) {
      throw ValidationError("generate_sequence: robust sequences need |S| >= r");
    }
    for (int s : p.sources) {
      if (s < 0 || s >= nodes) throw ValidationError("generate_sequence: source id out of range");
    }
  }
  const auto t = make_intervals(spec, nodes, horizon);
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
    std::map<std::int64_t, EdgeSet> sched;
    for (std::size_t q = 0; q + 1 < t.size(); ++q) {
      const std::int64_t lo = t[q];
      const std::int64_t hi = t[q + 1] - 1;
      if (p.kind == SequenceKind::robust) {
        std::vector<int> order;
        std::vector<int> pool(p.sources.begin(), p.sources.end());
        for (int i = 0; i < nodes; ++i) {
          if (p.sources.count(i) == 0) order.push_back(i);
        }
        std::shuffle(order.begin(), order.end(), rng);
        // Each non-source hears r distinct nodes from S and the non-sources placed before it.
        for (int i : order) {
          std::vector<int> picks = pool;
          std::shuffle(picks.begin(), picks.end(), rng);
          for (int b = 0; b < p.r; ++b) sched[detail::uniform_step(rng, lo, hi)].insert({picks[static_cast<std::size_t>(b)], i});
          pool.push_back(i);
        }
      } else if (nodes > 1) {
        std::vector<int> cycle(static_cast<std::size_t>(nodes));
        std::iota(cycle.begin(), cycle.end(), 0);
        std::shuffle(cycle.begin(), cycle.end(), rng);
        for (std::size_t b = 0; b < cycle.size(); ++b) {
          sched[detail::uniform_step(rng, lo, hi)].insert({cycle[b], cycle[(b + 1) % cycle.size()]});
        }
      }
      detail::place_extra_edges(sched, nodes, lo, hi, p.extra_edge_prob, rng);
    }
    GraphSequence seq(nodes, t, std::move(sched), horizon, spec);
    if (p.kind == SequenceKind::robust) {
      if (is_jointly_strongly_r_robust(seq, p.sources, p.r, p.period).ok) return seq;
    } else {
      const auto rep = check_conditions(seq);
      if (rep.c1 && rep.c3) return seq;
    }
  }
  throw GenerationFailed("generate_sequence: no valid sequence after " + std::to_string(kGenerationRetries) +
                         " attempts");
}

/// Single edge from -> to at every t_q. Used for the disturbance demonstration, where only the
/// source talks; it does not satisfy joint strong connectivity.
inline GraphSequence source_broadcast_sequence(const IntervalSpec& spec, int nodes, int from, int to,
                                               std::int64_t horizon) {
  const auto t = make_intervals(spec, nodes, horizon);
  std::map<std::int64_t, EdgeSet> sched;
  for (std::int64_t tq : t) {
    if (tq <= horizon) sched[tq].insert({from, to});
  }
  return GraphSequence(nodes, t, std::move(sched), horizon, spec);
}

// ---------------------------------------------------------------------------
// Schedule file: {"N": 3, "intervals": [0, 2, ...], "edges": {"0": [[0, 1]], ...}, "horizon": 40}
// "intervals" may be replaced by "f": {"kind": "constant", "T": 2} | {"kind": "floor-sqrt"} |
// {"kind": "linear", "delta": 0.5}. Horizon defaults to the last t_q minus one.

inline IntervalSpec interval_spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return {IntervalKind::constant, j.at("T").get<std::int64_t>(), 0.0};
  if (kind == "floor-sqrt") return {IntervalKind::floor_sqrt, 1, 0.0};
  if (kind == "linear") return {IntervalKind::linear, 1, j.at("delta").get<double>()};
  throw ValidationError("graph/f/kind: unknown interval kind \"" + kind + "\"");
}

inline GraphSequence schedule_from_json(const nlohmann::json& j, std::optional<std::int64_t> horizon_override = {}) {
  try {
    const int n = j.at("N").get<int>();
    std::optional<std::int64_t> horizon = horizon_override;
    if (!horizon && j.contains("horizon")) horizon = j.at("horizon").get<std::int64_t>();
    std::vector<std::int64_t> t;
    IntervalSpec spec{IntervalKind::explicit_list, 1, 0.0};
    if (j.contains("intervals")) {
      t = j.at("intervals").get<std::vector<std::int64_t>>();
      if (t.empty()) throw ValidationError("graph/intervals: must not be empty");
      if (!horizon) horizon = t.back() - 1;
    } else if (j.contains("f")) {
      spec = interval_spec_from_json(j.at("f"));
      if (!horizon) throw ValidationError("graph: a horizon is required when intervals are generated");
      t = make_intervals(spec, n, *horizon);
    } else {
      throw ValidationError("graph: either \"intervals\" or \"f\" is required");
    }
    std::map<std::int64_t, EdgeSet> sched;
    if (j.contains("edges")) {
      for (const auto& [key, list] : j.at("edges").items()) {
        std::size_t used = 0;
        const std::int64_t k = std::stoll(key, &used);
        if (used != key.size()) throw ValidationError("graph/edges: key \"" + key + "\" is not an integer");
        for (const auto& e : list) {
          if (!e.is_array() || e.size() != 2) throw ValidationError("graph/edges/" + key + ": edges are [from, to]");
          sched[k].insert({e[0].get<int>(), e[1].get<int>()});
        }
      }
    }
    if (j.contains("periodic_edges")) {
      // Repeating pattern: list of edge lists, entry k % len applies at step k.
      const auto& pat = j.at("periodic_edges");
      if (!pat.is_array() || pat.empty()) throw ValidationError("graph/periodic_edges: expected a non-empty list");
      for (std::int64_t k = 0; k <= *horizon; ++k) {
        for (const auto& e : pat[static_cast<std::size_t>(k % static_cast<std::int64_t>(pat.size()))]) {
          sched[k].insert({e.at(0).get<int>(), e.at(1).get<int>()});
        }
      }
    }
    return GraphSequence(n, std::move(t), std::move(sched), *horizon, spec);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("graph: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("graph/edges: keys must be integers");
  }
}

inline nlohmann::json schedule_to_json(const GraphSequence& seq) {
  nlohmann::json out;
  out["N"] = seq.node_count();
  out["horizon"] = seq.horizon();
  out["intervals"] = seq.intervals();
  nlohmann::json edges = nlohmann::json::object();
  for (const auto& [k, set] : seq.schedule()) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [from, to] : set) list.push_back({from, to});
    edges[std::to_string(k)] = std::move(list);
  }
  out["edges"] = std::move(edges);
  return out;
}

}  // namespace aoi
