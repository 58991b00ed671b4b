#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "aoi/errors.hpp"
#include "aoi/graph.hpp"
#include "aoi/lti.hpp"

namespace aoi {

namespace detail {

/// Smallest tau >= lower such that k - g~(k) >= target for every k in [tau, horizon].
inline std::int64_t first_tail_start(const GraphSequence& seq, const IntervalMaps& maps, std::int64_t lower,
                                     std::int64_t target) {
  const std::int64_t h = seq.horizon();
  const std::int64_t spread = 2 * static_cast<std::int64_t>(seq.node_count() - 1);
  auto ok = [&](std::int64_t k) { return k - spread * maps.g[static_cast<std::size_t>(k)] >= target; };
  if (lower > h || !ok(h)) {
    throw HorizonTooShort("deadline: k - g~(k) >= " + std::to_string(target) + " does not hold at the horizon " +
                          std::to_string(h));
  }
  std::int64_t tau = h;
  while (tau - 1 >= lower && ok(tau - 1)) --tau;
  return tau;
}

}  // namespace detail

/// Deadline recursion for deadbeat gains: the first non-empty block needs tau >= t_{N-1}
/// and k - g~(k) >= n_1 afterwards; each later block adds its own dimension to the previous
/// deadline. Empty blocks have no error to clear and are skipped.
inline std::int64_t finite_time_deadline(const Decomposition& dec, const GraphSequence& seq) {
  if (dec.node_count() != seq.node_count()) throw DimensionMismatch("finite_time_deadline: node count mismatch");
  const IntervalMaps maps = seq.interval_maps();
  std::int64_t prev = -1;
  for (int j = 0; j < dec.node_count(); ++j) {
    const std::int64_t nj = dec.block_dims[static_cast<std::size_t>(j)];
    if (nj == 0) continue;
    if (prev < 0) {
      prev = detail::first_tail_start(seq, maps, std::max<std::int64_t>(1, seq.trigger_time()), nj);
    } else {
      prev = detail::first_tail_start(seq, maps, 1, prev + nj);
    }
  }
  return prev < 0 ? 0 : prev;
}

/// k_N of the rate proof: k_1 = max(t_{N-1}, k_bar) where g~(k) <= delta_bar * k for all
/// k >= k_bar, then k_j = k_{j-1} / (1 - delta_bar). Returned rounded up.
inline std::int64_t burn_in_k_n(const GraphSequence& seq, double delta_bar, int sub_states) {
  const IntervalMaps maps = seq.interval_maps();
  const std::int64_t h = seq.horizon();
  const double spread = 2.0 * (seq.node_count() - 1);
  auto ok = [&](std::int64_t k) {
    return spread * static_cast<double>(maps.g[static_cast<std::size_t>(k)]) <= delta_bar * static_cast<double>(k);
  };
  if (!ok(h)) throw HorizonTooShort("burn_in_k_n: g~(k) <= delta_bar * k fails at the horizon");
  std::int64_t k_bar = h;
  while (k_bar - 1 >= 1 && ok(k_bar - 1)) --k_bar;
  double k = static_cast<double>(std::max(seq.trigger_time(), k_bar));
  for (int j = 1; j < sub_states; ++j) k /= (1.0 - delta_bar);
  return static_cast<std::int64_t>(std::ceil(k - 1e-9));
}

}  // namespace aoi
