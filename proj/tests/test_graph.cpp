#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "aoi/graph.hpp"
#include "oracles.hpp"

namespace {

using aoi::EdgeSet;
using aoi::GraphSequence;

GraphSequence alternating(std::int64_t horizon) {
  std::map<std::int64_t, EdgeSet> sched;
  for (std::int64_t k = 0; k <= horizon; ++k) sched[k] = k % 2 == 0 ? EdgeSet{{0, 1}, {1, 2}} : EdgeSet{{0, 2}, {2, 1}};
  const aoi::IntervalSpec spec{aoi::IntervalKind::constant, 2, 0.0};
  return GraphSequence(3, aoi::make_intervals(spec, 3, horizon), sched, horizon, spec);
}

EdgeSet random_digraph(std::mt19937_64& rng, int n, double p) {
  std::bernoulli_distribution coin(p);
  EdgeSet e;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && coin(rng)) e.insert({i, j});
  return e;
}

EdgeSet complete(int n) {
  EdgeSet e;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) e.insert({i, j});
  return e;
}

TEST(UnionGraph, AlternatingPairOverFirstInterval) {
  const GraphSequence seq = alternating(20);
  EXPECT_EQ(aoi::union_graph(seq, 0, 1), (EdgeSet{{0, 1}, {1, 2}, {0, 2}, {2, 1}}));
  EXPECT_EQ(aoi::union_graph(seq, 4, 4), seq.edges_at(4));
  EXPECT_THROW(aoi::union_graph(seq, 3, 21), aoi::OutOfHorizon);
}

TEST(UnionGraph, MatchesFoldOfSteps) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::periodic_sc;
  p.period = 4;
  const GraphSequence seq = aoi::generate_sequence(p, 5, 3, 40);
  EdgeSet fold;
  for (std::int64_t k = 3; k <= 7; ++k) fold.insert(seq.edges_at(k).begin(), seq.edges_at(k).end());
  EXPECT_EQ(aoi::union_graph(seq, 3, 7), fold);
}

TEST(StronglyConnected, Examples) {
  EXPECT_TRUE(aoi::is_strongly_connected({{0, 1}, {1, 2}, {2, 3}, {3, 0}}, 4));
  EXPECT_FALSE(aoi::is_strongly_connected({{0, 1}, {1, 2}}, 3));
  EXPECT_TRUE(aoi::is_strongly_connected({}, 1));
}

TEST(StronglyConnected, MatchesClosureOracle) {
  std::mt19937_64 rng(5);
  int positives = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 6;
    const EdgeSet e = random_digraph(rng, n, 0.35);
    const bool want = oracle::strongly_connected(e, n);
    positives += want ? 1 : 0;
    EXPECT_EQ(aoi::is_strongly_connected(e, n), want) << "trial " << t;
  }
  EXPECT_GT(positives, 0);
  EXPECT_LT(positives, 50);
}

TEST(Conditions, ConstantIntervals) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::periodic_sc;
  p.period = 3;
  const auto short_rep = aoi::check_conditions(aoi::generate_sequence(p, 4, 1, 100));
  const auto long_rep = aoi::check_conditions(aoi::generate_sequence(p, 4, 1, 1000));
  EXPECT_TRUE(long_rep.c1);
  EXPECT_TRUE(long_rep.c2);
  EXPECT_TRUE(long_rep.c3);
  EXPECT_LE(short_rep.delta_hat, 2.0 * 3 * 3 / 50.0);
  EXPECT_LE(long_rep.delta_hat, 2.0 * 3 * 3 / 500.0);
  EXPECT_LT(long_rep.delta_hat, short_rep.delta_hat);
}

TEST(Conditions, FloorSqrtIntervals) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::growing_sqrt;
  const auto a = aoi::check_conditions(aoi::generate_sequence(p, 3, 2, 400));
  const auto b = aoi::check_conditions(aoi::generate_sequence(p, 3, 2, 4000));
  EXPECT_TRUE(a.c1);
  EXPECT_TRUE(b.c1);
  EXPECT_TRUE(b.c3);
  EXPECT_LT(b.delta_hat, a.delta_hat);
}

TEST(Conditions, DecreasingIntervalsFailC1) {
  std::map<std::int64_t, EdgeSet> sched;
  const std::vector<std::int64_t> t{0, 4, 6, 7, 8, 9};
  for (std::size_t q = 0; q + 1 < t.size(); ++q) sched[t[q]] = {{0, 1}, {1, 0}};
  const GraphSequence seq(2, t, sched, 8);
  const auto rep = aoi::check_conditions(seq);
  EXPECT_FALSE(rep.c1);
  EXPECT_TRUE(rep.c3);
  EXPECT_TRUE(rep.c1_fails_c3_holds);
}

TEST(Conditions, ReportsFirstFailingInterval) {
  const GraphSequence seq(3, {0, 2, 4, 6}, {{0, {{0, 1}, {1, 2}, {2, 0}}}, {2, {{0, 1}}}}, 5);
  const auto rep = aoi::check_conditions(seq);
  EXPECT_FALSE(rep.c3);
  ASSERT_TRUE(rep.c3_first_failure.has_value());
  EXPECT_EQ(*rep.c3_first_failure, 1u);
}

TEST(IntervalMaps, PerStepIdentities) {
  for (auto kind : {aoi::IntervalKind::constant, aoi::IntervalKind::floor_sqrt, aoi::IntervalKind::linear}) {
    const aoi::IntervalSpec spec{kind, 3, 0.6};
    const GraphSequence seq(4, aoi::make_intervals(spec, 4, 500), {}, 500, spec);
    const auto maps = seq.interval_maps();
    for (std::int64_t k = 0; k <= 500; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      EXPECT_LE(maps.m[ku], k);
      EXPECT_LT(k, maps.big_m[ku]);
      EXPECT_EQ(maps.g[ku], maps.big_m[ku] - maps.m[ku]);
      if (kind != aoi::IntervalKind::explicit_list) EXPECT_EQ(maps.g[ku], aoi::interval_length(spec, 4, maps.m[ku]));
    }
  }
}

TEST(IntervalMaps, FloorSqrtLengths) {
  const auto t = aoi::make_intervals({aoi::IntervalKind::floor_sqrt, 1, 0.0}, 2, 20);
  EXPECT_EQ(t, (std::vector<std::int64_t>{0, 1, 2, 3, 5, 7, 9, 12, 15, 19, 23}));
}

TEST(Reachable, Examples) {
  EXPECT_TRUE(aoi::is_r_reachable(complete(5), 5, {1, 3}, 3));
  EXPECT_FALSE(aoi::is_r_reachable({}, 2, {0, 1}, 1));
  EXPECT_THROW(aoi::is_r_reachable({}, 2, {}, 1), aoi::ValidationError);
}

TEST(Reachable, MatchesCountOracle) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const int n = 3 + t % 5;
    const EdgeSet e = random_digraph(rng, n, 0.5);
    std::set<int> c;
    for (int i = 0; i < n; ++i)
      if (rng() % 2) c.insert(i);
    if (c.empty()) c.insert(0);
    for (int r = 1; r <= 4; ++r) EXPECT_EQ(aoi::is_r_reachable(e, n, c, r), oracle::r_reachable(e, c, r));
  }
}

TEST(Robust, Examples) {
  EXPECT_TRUE(aoi::is_strongly_r_robust_wrt({}, 3, {0, 1, 2}, 5));
  for (int f = 0; f <= 2; ++f) {
    const int s = 3 * f + 1;
    const int n = s + 3;
    std::set<int> src;
    for (int i = 0; i < s; ++i) src.insert(i);
    EXPECT_TRUE(aoi::is_strongly_r_robust_wrt(complete(n), n, src, s)) << "f=" << f;
    EXPECT_TRUE(oracle::strongly_r_robust(complete(n), n, src, s));
  }
  const EdgeSet star{{0, 1}, {0, 2}, {0, 3}};
  EXPECT_FALSE(aoi::is_strongly_r_robust_wrt(star, 4, {0}, 2));
  EXPECT_TRUE(aoi::is_strongly_r_robust_wrt(star, 4, {0}, 1));
}

TEST(Robust, MatchesEnumerationOracle) {
  std::mt19937_64 rng(13);
  int positives = 0;
  for (int t = 0; t < 60; ++t) {
    const int n = 4 + t % 6;
    const EdgeSet e = random_digraph(rng, n, 0.55);
    std::set<int> src;
    for (int i = 0; i < n; ++i)
      if (rng() % 3 == 0) src.insert(i);
    const int r = 1 + static_cast<int>(rng() % 3);
    const bool want = oracle::strongly_r_robust(e, n, src, r);
    positives += want ? 1 : 0;
    EXPECT_EQ(aoi::is_strongly_r_robust_wrt(e, n, src, r), want) << "trial " << t;
  }
  EXPECT_GT(positives, 0);
}

TEST(Robust, RefusesHugeEnumeration) {
  EXPECT_THROW(aoi::is_strongly_r_robust_wrt({}, aoi::kMaxRobustSubsetBits + 2, {0}, 1), aoi::SubsetBlowup);
}

TEST(JointRobust, RotatingScheduleWithCompleteUnions) {
  const int n = 5;
  std::map<std::int64_t, EdgeSet> sched;
  const EdgeSet kn = complete(n);
  const std::vector<std::pair<int, int>> all(kn.begin(), kn.end());
  const std::int64_t period = 4;
  const std::int64_t horizon = 39;
  for (std::int64_t w = 0; w * period <= horizon; ++w) {
    for (std::size_t e = 0; e < all.size(); ++e) sched[w * period + static_cast<std::int64_t>((e + w) % period)].insert(all[e]);
  }
  const GraphSequence seq(n, aoi::make_intervals({aoi::IntervalKind::constant, period, 0.0}, n, horizon), sched, horizon);
  // With |S| = 2 the full set V \ S hears exactly two outside nodes, so r = 2 is the limit.
  for (int r = 1; r <= 3; ++r) {
    const auto rep = aoi::is_jointly_strongly_r_robust(seq, {0, 1}, r, period);
    EXPECT_EQ(rep.ok, r <= 2) << r;
    EXPECT_EQ(rep.ok, oracle::strongly_r_robust(complete(n), n, {0, 1}, r));
    if (rep.ok) EXPECT_EQ(rep.windows_checked, 10);
  }
}

TEST(JointRobust, ReportsFailingWindow) {
  std::map<std::int64_t, EdgeSet> sched;
  for (std::int64_t k = 0; k <= 9; ++k) sched[k] = k == 6 ? EdgeSet{} : EdgeSet{{0, 1}, {0, 2}};
  const GraphSequence seq(3, aoi::make_intervals({aoi::IntervalKind::constant, 1, 0.0}, 3, 9), sched, 9);
  const auto rep = aoi::is_jointly_strongly_r_robust(seq, {0}, 1, 1);
  EXPECT_FALSE(rep.ok);
  ASSERT_TRUE(rep.failing_window.has_value());
  EXPECT_EQ(*rep.failing_window, 6);
}

TEST(JointRobust, GeneratedSixNodeScheduleAgreesWithOracle) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::robust;
  p.period = 3;
  p.r = 4;
  p.sources = {0, 1, 2, 3};
  const GraphSequence seq = aoi::generate_sequence(p, 6, 21, 60);
  EXPECT_TRUE(aoi::is_jointly_strongly_r_robust(seq, p.sources, 4, 3).ok);
  for (std::int64_t w = 0; (w + 1) * 3 - 1 <= 60; ++w) {
    EXPECT_TRUE(oracle::strongly_r_robust(aoi::union_graph(seq, 3 * w, 3 * w + 2), 6, p.sources, 4)) << w;
  }
}

TEST(Generate, EveryKindPassesItsChecker) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (auto kind : {aoi::SequenceKind::periodic_sc, aoi::SequenceKind::growing_sqrt, aoi::SequenceKind::linear_growth}) {
      aoi::GenerateParams p;
      p.kind = kind;
      p.period = 2;
      p.delta = 0.5;
      const GraphSequence seq = aoi::generate_sequence(p, 4, seed, 300);
      const auto rep = aoi::check_conditions(seq);
      EXPECT_TRUE(rep.c1 && rep.c3) << "seed " << seed;
    }
    aoi::GenerateParams p;
    p.kind = aoi::SequenceKind::robust;
    p.period = 3;
    p.r = 4;
    p.sources = {0, 1, 2, 3};
    const GraphSequence seq = aoi::generate_sequence(p, 7, seed, 90);
    EXPECT_TRUE(aoi::is_jointly_strongly_r_robust(seq, p.sources, 4, 3).ok);
  }
}

TEST(Generate, DeterministicUnderSeed) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::growing_sqrt;
  EXPECT_EQ(aoi::generate_sequence(p, 4, 77, 200).schedule(), aoi::generate_sequence(p, 4, 77, 200).schedule());
}

TEST(Generate, SourceBroadcastPattern) {
  const GraphSequence seq = aoi::source_broadcast_sequence({aoi::IntervalKind::floor_sqrt, 1, 0.0}, 2, 0, 1, 30);
  std::set<std::int64_t> fires;
  for (const auto& [k, e] : seq.schedule()) {
    EXPECT_EQ(e, (EdgeSet{{0, 1}}));
    fires.insert(k);
  }
  EXPECT_EQ(fires, (std::set<std::int64_t>{0, 1, 2, 3, 5, 7, 9, 12, 15, 19, 23, 27}));
}

TEST(Generate, RejectsBadParameters) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::robust;
  p.r = 3;
  p.sources = {0, 1};
  EXPECT_THROW(aoi::generate_sequence(p, 5, 1, 30), aoi::ValidationError);
  p.kind = aoi::SequenceKind::linear_growth;
  p.delta = 1.0;
  EXPECT_THROW(aoi::generate_sequence(p, 5, 1, 30), aoi::ValidationError);
}

TEST(Sequence, ValidatesConstruction) {
  EXPECT_THROW(GraphSequence(2, {1, 3}, {}, 2), aoi::ValidationError);
  EXPECT_THROW(GraphSequence(2, {0, 3, 3}, {}, 2), aoi::ValidationError);
  EXPECT_THROW(GraphSequence(2, {0, 3}, {}, 3), aoi::ValidationError);
  EXPECT_THROW(GraphSequence(2, {0, 3}, {{0, {{1, 1}}}}, 2), aoi::ValidationError);
  EXPECT_THROW(GraphSequence(2, {0, 3}, {{0, {{0, 2}}}}, 2), aoi::ValidationError);
}

TEST(Sequence, InNeighborsAreSorted) {
  const GraphSequence seq(4, {0, 5}, {{1, {{3, 0}, {1, 0}, {2, 0}, {0, 3}}}}, 4);
  const auto in = seq.in_neighbors(1);
  EXPECT_EQ(in[0], (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(in[3], (std::vector<int>{0}));
  EXPECT_TRUE(seq.in_neighbors(2)[0].empty());
  EXPECT_EQ(seq.trigger_time(), 5);
}

TEST(ScheduleJson, RoundTrip) {
  aoi::GenerateParams p;
  p.kind = aoi::SequenceKind::periodic_sc;
  p.period = 2;
  const GraphSequence seq = aoi::generate_sequence(p, 4, 5, 50);
  const GraphSequence back = aoi::schedule_from_json(aoi::schedule_to_json(seq));
  EXPECT_EQ(back.schedule(), seq.schedule());
  EXPECT_EQ(back.intervals(), seq.intervals());
  EXPECT_EQ(back.horizon(), seq.horizon());
}

TEST(ScheduleJson, GeneratedIntervalsAndPeriodicEdges) {
  const nlohmann::json j = {{"N", 3},
                            {"f", {{"kind", "constant"}, {"T", 2}}},
                            {"horizon", 9},
                            {"periodic_edges", {{{0, 1}, {1, 2}}, {{0, 2}, {2, 1}}}}};
  const GraphSequence seq = aoi::schedule_from_json(j);
  EXPECT_EQ(seq.intervals().back(), 10);
  EXPECT_EQ(seq.edges_at(3), (EdgeSet{{0, 2}, {2, 1}}));
  EXPECT_EQ(aoi::union_graph(seq, 0, 1), aoi::union_graph(alternating(9), 0, 1));
}

TEST(ScheduleJson, RejectsMalformed) {
  EXPECT_THROW(aoi::schedule_from_json({{"N", 2}}), aoi::ValidationError);
  EXPECT_THROW(aoi::schedule_from_json({{"N", 2}, {"intervals", {0, 4}}, {"edges", {{"x", {{0, 1}}}}}}),
               aoi::ValidationError);
  EXPECT_THROW(aoi::schedule_from_json({{"N", 2}, {"intervals", {0, 4}}, {"edges", {{"1", {{0, 0}}}}}}),
               aoi::ValidationError);
  EXPECT_THROW(aoi::schedule_from_json({{"N", 2}, {"f", {{"kind", "cubic"}}}, {"horizon", 5}}), aoi::ValidationError);
}

}  // namespace
