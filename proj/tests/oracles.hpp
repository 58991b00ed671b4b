#pragma once

// Reference implementations written straight from the definitions, kept apart from the
// library code they check.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Edges = std::set<std::pair<int, int>>;

/// Some member of C has at least r in-neighbours outside C.
inline bool r_reachable(const Edges& e, const std::set<int>& c, int r) {
  for (int i : c) {
    int outside = 0;
    for (const auto& [from, to] : e) {
      if (to == i && c.count(from) == 0) ++outside;
    }
    if (outside >= r) return true;
  }
  return false;
}

/// Every non-empty subset of V \ S is r-reachable; subsets are built by include/exclude recursion.
inline bool strongly_r_robust(const Edges& e, int n, const std::set<int>& s, int r) {
  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (s.count(i) == 0) rest.push_back(i);
  }
  std::set<int> chosen;
  std::function<bool(std::size_t)> walk = [&](std::size_t at) -> bool {
    if (at == rest.size()) return chosen.empty() || r_reachable(e, chosen, r);
    if (!walk(at + 1)) return false;
    chosen.insert(rest[at]);
    const bool ok = walk(at + 1);
    chosen.erase(rest[at]);
    return ok;
  };
  return walk(0);
}

/// Transitive closure by repeated boolean squaring; strongly connected iff every entry is set.
inline bool strongly_connected(const Edges& e, int n) {
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i) reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
  for (const auto& [from, to] : e) reach[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)] = 1;
  for (int step = 1; step < n; step *= 2) {
    auto next = reach;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)])
          for (int j = 0; j < n; ++j)
            if (reach[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]) next[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
    reach = std::move(next);
  }
  for (const auto& row : reach)
    for (char v : row)
      if (!v) return false;
  return true;
}

/// Ordinary least-squares slope of y on x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
