#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "aoi/scenario_io.hpp"

namespace {

using nlohmann::json;

const std::filesystem::path kScenarios = AOI_SCENARIO_DIR;

json three_node() {
  return json::parse(R"({
    "$schema_version": 1,
    "name": "inline",
    "scalar": {"a": 2.0, "c": [1.0, 0.0, 0.0]},
    "gains": {"l": [2.0, 0.0, 0.0]},
    "graph": {"f": {"kind": "constant", "T": 2},
              "periodic_edges": [[[0, 1], [1, 2]], [[0, 2], [2, 1]]]},
    "horizon": 20,
    "x0": [1.0],
    "seed": 4
  })");
}

TEST(ScenarioJson, InlineScalarScenario) {
  const aoi::Scenario s = aoi::scenario_from_json(three_node());
  EXPECT_EQ(s.name, "inline");
  EXPECT_EQ(s.protocol, aoi::ProtocolKind::aoi);
  EXPECT_EQ(s.horizon(), 20);
  EXPECT_EQ(s.node_count(), 3);
  EXPECT_EQ(s.dec.block_dims, (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(s.seed, 4u);
  EXPECT_EQ(s.precision, aoi::Precision::float64);
  EXPECT_TRUE(s.graph->edges_at(3).count({0, 2}));
}

TEST(ScenarioJson, RejectsBadDocuments) {
  auto j = three_node();
  j.erase("$schema_version");
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["$schema_version"] = 2;
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j.erase("gains");
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j.erase("graph");
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["protocol"] = "gossip";
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["x0"] = {1.0, "two"};
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["scalar"]["a"] = "big";
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["protocol"] = "naive-consensus";
  j["weights"] = "heavy";
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["precision"] = "quad";
  EXPECT_THROW(aoi::scenario_from_json(j), std::exception);
  j = three_node();
  j["horizon"] = 1;
  j["graph"]["f"]["T"] = 5;
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
  j = three_node();
  j["adversaries"] = json::array({{{"node", 1}, {"strategy", "silent"}}});
  EXPECT_THROW(aoi::scenario_from_json(j), aoi::ValidationError);
}

TEST(ScenarioJson, BundledFilesLoad) {
  for (const auto* name : {"three_node_aoi.json", "three_node_naive.json", "three_node_tree.json", "chain_rate.json",
                           "chain_deadbeat.json", "sqrt_disturbance.json", "resilient_bias.json",
                           "resilient_deadbeat.json"}) {
    EXPECT_NO_THROW(aoi::load_scenario(kScenarios / name)) << name;
  }
  const auto r = aoi::load_scenario(kScenarios / "resilient_bias.json");
  ASSERT_EQ(r.adversaries.size(), 1u);
  EXPECT_EQ(r.adversaries[0].kind, aoi::AdversaryKind::colluding_bias);
  EXPECT_EQ(r.precision, aoi::Precision::mp1000);
  ASSERT_TRUE(r.rate_check.has_value());
  EXPECT_EQ(r.rate_check->rho, 0.8);
  EXPECT_EQ(*r.robust_period, 3);
  const auto c = aoi::load_scenario(kScenarios / "chain_deadbeat.json");
  EXPECT_EQ(c.gains.mode, aoi::GainMode::nilpotent);
  EXPECT_EQ(*c.finite_time_deadline, 52);
}

TEST(ScenarioJson, MissingFileIsAValidationError) {
  EXPECT_THROW(aoi::load_scenario(kScenarios / "no_such_file.json"), aoi::ValidationError);
  auto j = three_node();
  j["graph"] = {{"file", "no_such_schedule.json"}};
  EXPECT_THROW(aoi::scenario_from_json(j, kScenarios), aoi::ValidationError);
}

TEST(TraceCsv, HeaderRowsAndAdoptions) {
  const aoi::Scenario s = aoi::scenario_from_json(three_node());
  const auto tr = aoi::run<double>(s);
  const std::string csv = aoi::trace_csv(tr);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,node,substate,e_norm,tau,adopted_from");
  int rows = 0;
  bool saw_omega = false;
  bool saw_adoption = false;
  while (std::getline(in, line)) {
    ++rows;
    saw_omega = saw_omega || line.find(",omega,") != std::string::npos;
    // Node 1 adopts from node 0 at k = 0, visible on the k = 1 row.
    if (line.rfind("1,1,0,", 0) == 0) {
      EXPECT_EQ(line.substr(line.size() - 4), ",1,0");
      saw_adoption = true;
    }
  }
  // One non-empty block, three nodes, 21 time steps.
  EXPECT_EQ(rows, 63);
  EXPECT_TRUE(saw_omega);
  EXPECT_TRUE(saw_adoption);
  EXPECT_EQ(csv, aoi::trace_csv(aoi::run<double>(s)));
}

TEST(TraceCsv, RealFormattingRoundTrips) {
  EXPECT_EQ(aoi::format_real(0.0), "0");
  EXPECT_EQ(std::stod(aoi::format_real(0.1)), 0.1);
  EXPECT_EQ(std::stod(aoi::format_real(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Execute, SummaryKeys) {
  auto j = three_node();
  j["checks"] = {{"finite_time", {{"deadline", 5}}}};
  const auto out = aoi::execute_any(aoi::scenario_from_json(j));
  for (const auto* key : {"name", "protocol", "precision", "horizon", "seed", "final_errors", "max_final_error",
                          "diverged", "violations", "dropped_messages", "finite_time", "pass"}) {
    EXPECT_TRUE(out.summary.contains(key)) << key;
  }
  EXPECT_TRUE(out.pass);
  EXPECT_EQ(out.summary["protocol"], "aoi");
  EXPECT_EQ(out.summary["final_errors"].size(), 3u);
  EXPECT_FALSE(out.summary["diverged"].get<bool>());

  j["protocol"] = "naive-consensus";
  j.erase("checks");
  j["horizon"] = 60;
  const auto naive = aoi::execute_any(aoi::scenario_from_json(j));
  EXPECT_TRUE(naive.summary["diverged"].get<bool>());
  EXPECT_TRUE(naive.pass);
}

TEST(Execute, FailingCheckMarksRunFailed) {
  auto j = three_node();
  j["gains"]["l"] = {0.5, 0.0, 0.0};
  j["checks"] = {{"finite_time", {{"deadline", 5}}}};
  const auto out = aoi::execute_any(aoi::scenario_from_json(j));
  EXPECT_FALSE(out.pass);
  EXPECT_FALSE(out.summary["finite_time"]["pass"].get<bool>());
  EXPECT_TRUE(out.summary["finite_time"].contains("first_violation"));
}

}  // namespace
