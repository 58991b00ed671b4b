#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/errors.hpp"
#include "aoi/freshness.hpp"
#include "aoi/numeric.hpp"

namespace aoi {

/// One entry of M_i with its stored value v, freshness copy d, time-stamp phi, and the
/// freshness index the sender reported when the entry was written.
template <class Real>
struct Slot {
  int node = -1;
  Real v{0};
  std::int64_t d = 0;
  std::int64_t phi = 0;
  std::int64_t recorded_tau = 0;
};

template <class Real>
struct ResilientNodeState {
  Freshness tau;
  Real x_hat{0};
  std::vector<Slot<Real>> slots;  // M_i in slot order; q_i = slots.size()

  std::size_t q() const { return slots.size(); }
};

/// Message on the wire. The index is a raw integer so forged values (negative, or beyond k)
/// can be represented; nullopt stands for omega.
template <class Real>
struct Message {
  int sender = -1;
  std::optional<std::int64_t> tau;
  Real value{0};
};

template <class Real>
Real source_luenberger(const Real& x_hat, const Real& y, const Real& a, const Real& c, const Real& l) {
  return a * x_hat + l * (y - c * x_hat);
}

/// Survivor after discarding the f highest and f lowest of 2f+1 values.
template <class Real>
Real trim_select(std::vector<Real> values, int f) {
  if (f < 0 || values.size() != static_cast<std::size_t>(2 * f + 1)) {
    throw ValidationError("trim_select: expected exactly 2f+1 values");
  }
  std::nth_element(values.begin(), values.begin() + f, values.end());
  return values[static_cast<std::size_t>(f)];
}

template <class Real>
struct ResilientStepResult {
  ResilientNodeState<Real> next;
  int dropped = 0;  // non-omega messages rejected by the sanity gate
};

namespace detail {

template <class Real>
Slot<Real> slot_from(const Message<Real>& m, std::int64_t k) {
  return {m.sender, m.value, *m.tau, k, *m.tau};
}

template <class Real>
void finish_triggered(ResilientNodeState<Real>& s, std::int64_t k, const Real& a, int f) {
  std::int64_t max_d = 0;
  std::vector<Real> forwarded;
  for (auto& sl : s.slots) {
    forwarded.push_back(ipow(a, k - sl.phi) * sl.v);
    ++sl.d;
    max_d = std::max(max_d, sl.d);
  }
  s.tau = Freshness::of(max_d);
  s.x_hat = a * trim_select(std::move(forwarded), f);
}

}  // namespace detail

/// One step of the resilient update for a regular non-source node at time k.
template <class Real>
ResilientStepResult<Real> resilient_nonsource_step(const ResilientNodeState<Real>& state,
                                                   const std::vector<Message<Real>>& inbox, std::int64_t k,
                                                   const Real& a, int f) {
  const std::size_t full = static_cast<std::size_t>(2 * f + 1);
  ResilientStepResult<Real> res;
  res.next = state;
  auto& s = res.next;

  std::vector<Message<Real>> gated;
  std::set<int> seen;
  for (const auto& m : inbox) {
    if (!m.tau) continue;
    if (*m.tau < 0 || *m.tau > k || !seen.insert(m.sender).second) {
      ++res.dropped;
      continue;
    }
    gated.push_back(m);
  }
  auto in_list = [&s](int node) {
    return std::any_of(s.slots.begin(), s.slots.end(), [node](const Slot<Real>& sl) { return sl.node == node; });
  };
  std::vector<Message<Real>> fresh;  // J_i \ M_i
  for (const auto& m : gated) {
    if (!in_list(m.sender)) fresh.push_back(m);
  }
  std::sort(fresh.begin(), fresh.end(), [](const Message<Real>& x, const Message<Real>& y) {
    return std::tie(*x.tau, x.sender) < std::tie(*y.tau, y.sender);
  });

  if (s.tau.is_omega()) {
    const std::size_t room = full - s.q();
    if (fresh.size() < room) {
      for (const auto& m : fresh) s.slots.push_back(detail::slot_from(m, k));
      for (auto& sl : s.slots) ++sl.d;
      s.x_hat = a * s.x_hat;
      return res;
    }
    for (std::size_t b = 0; b < room; ++b) s.slots.push_back(detail::slot_from(fresh[b], k));
    detail::finish_triggered(s, k, a, f);
    return res;
  }

  // Refresh re-heard members only when strictly fresher than the stored copy.
  for (const auto& m : gated) {
    for (auto& sl : s.slots) {
      if (sl.node == m.sender && *m.tau < sl.d) sl = detail::slot_from(m, k);
    }
  }
  // Merge members (keyed by d) with newcomers (keyed by reported index); keep the 2f+1 lowest.
  struct Candidate {
    std::int64_t key;
    int node;
    int slot;        // position for current members, -1 for newcomers
    std::size_t msg; // index into fresh for newcomers
  };
  std::vector<Candidate> cands;
  for (std::size_t p = 0; p < s.slots.size(); ++p) cands.push_back({s.slots[p].d, s.slots[p].node, static_cast<int>(p), 0});
  for (std::size_t b = 0; b < fresh.size(); ++b) cands.push_back({*fresh[b].tau, fresh[b].sender, -1, b});
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& x, const Candidate& y) { return std::tie(x.key, x.node) < std::tie(y.key, y.node); });
  cands.resize(std::min(cands.size(), full));
  std::vector<char> kept(s.slots.size(), 0);
  std::vector<std::size_t> incoming;
  for (const auto& c : cands) {
    if (c.slot >= 0) {
      kept[static_cast<std::size_t>(c.slot)] = 1;
    } else {
      incoming.push_back(c.msg);
    }
  }
  std::size_t next_in = 0;
  for (std::size_t p = 0; p < s.slots.size(); ++p) {
    if (!kept[p]) s.slots[p] = detail::slot_from(fresh[incoming[next_in++]], k);
  }
  detail::finish_triggered(s, k, a, f);
  return res;
}

// ---------------------------------------------------------------------------
// Adversaries.

enum class AdversaryKind { silent, zero_index_lie, random_value, colluding_bias, replay };

struct AdversarySpec {
  int node = -1;
  AdversaryKind kind = AdversaryKind::silent;
  double value = 1e6;       // zero-index-lie
  double scale = 10.0;      // random-value
  double forge_prob = 0.0;  // random-value: chance of an index beyond k
  double bias = 50.0;       // colluding-bias
  std::int64_t lag = 5;     // replay
};

inline AdversaryKind adversary_kind_from_string(const std::string& s) {
  if (s == "silent") return AdversaryKind::silent;
  if (s == "zero-index-lie") return AdversaryKind::zero_index_lie;
  if (s == "random-value" || s == "random") return AdversaryKind::random_value;
  if (s == "colluding-bias") return AdversaryKind::colluding_bias;
  if (s == "replay") return AdversaryKind::replay;
  throw ValidationError("unknown adversary strategy \"" + s + "\"");
}

inline std::string to_string(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::silent:
      return "silent";
    case AdversaryKind::zero_index_lie:
      return "zero-index-lie";
    case AdversaryKind::random_value:
      return "random-value";
    case AdversaryKind::colluding_bias:
      return "colluding-bias";
    case AdversaryKind::replay:
      return "replay";
  }
  return "silent";
}

inline AdversarySpec adversary_from_json(const nlohmann::json& j) {
  AdversarySpec a;
  a.node = j.at("node").get<int>();
  a.kind = adversary_kind_from_string(j.at("strategy").get<std::string>());
  if (j.contains("params")) {
    const auto& p = j.at("params");
    a.value = p.value("value", a.value);
    a.scale = p.value("scale", a.scale);
    a.forge_prob = p.value("forge_prob", a.forge_prob);
    a.bias = p.value("bias", a.bias);
    a.lag = p.value("lag", a.lag);
  }
  return a;
}

inline nlohmann::json adversary_to_json(const AdversarySpec& a) {
  return {{"node", a.node},
          {"strategy", to_string(a.kind)},
          {"params", {{"value", a.value}, {"scale", a.scale}, {"forge_prob", a.forge_prob}, {"bias", a.bias}, {"lag", a.lag}}}};
}

/// What adversary `spec.node` sends to `recipient` at step k; nullopt means nothing is sent.
/// `honest` holds the adversary's own honest broadcasts for steps 0..k.
template <class Real>
std::optional<Message<Real>> apply_adversary(const AdversarySpec& spec, const Real& x_true, std::int64_t k,
                                             const std::vector<Message<Real>>& honest, std::mt19937_64& rng) {
  Message<Real> m;
  m.sender = spec.node;
  switch (spec.kind) {
    case AdversaryKind::silent:
      return std::nullopt;
    case AdversaryKind::zero_index_lie:
      m.tau = 0;
      m.value = Real(spec.value);
      return m;
    case AdversaryKind::colluding_bias:
      m.tau = 0;
      m.value = x_true + Real(spec.bias);
      return m;
    case AdversaryKind::random_value: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const bool forge = spec.forge_prob > 0.0 && unit(rng) < spec.forge_prob;
      m.tau = forge ? k + 1 + std::uniform_int_distribution<std::int64_t>(0, 10)(rng)
                    : std::uniform_int_distribution<std::int64_t>(0, k)(rng);
      m.value = Real(std::uniform_real_distribution<double>(-spec.scale, spec.scale)(rng));
      return m;
    }
    case AdversaryKind::replay: {
      if (honest.empty()) return std::nullopt;
      const std::int64_t at = std::max<std::int64_t>(0, k - spec.lag);
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(at), honest.size() - 1);
      m = honest[idx];
      m.sender = spec.node;
      return m;
    }
  }
  return std::nullopt;
}

}  // namespace aoi
