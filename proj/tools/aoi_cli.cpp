// Command-line front end: run scenarios, canned reproductions, graph checks, gain design.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <mutex>
#include <set>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aoi/bounds.hpp"
#include "aoi/gains.hpp"
#include "aoi/graph.hpp"
#include "aoi/lti.hpp"
#include "aoi/reproduce.hpp"
#include "aoi/scenario_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("AOI_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(s);
  } catch (const std::exception&) {
    throw aoi::ValidationError("AOI_SEED must be an unsigned 64-bit integer");
  }
}

aoi::Scenario load_with_overrides(const fs::path& path, std::optional<std::uint64_t> seed,
                                  std::optional<std::int64_t> horizon) {
  nlohmann::json j = aoi::read_json_file(path);
  if (const auto s = env_seed()) j["seed"] = *s;
  if (seed) j["seed"] = *seed;
  if (horizon) j["horizon"] = *horizon;
  return aoi::scenario_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

struct RunResult {
  std::string name;
  int code = kExitPass;
  std::string message;
};

RunResult run_one(const fs::path& scenario, const fs::path& out_dir, std::optional<std::uint64_t> seed,
                  std::optional<std::int64_t> horizon) {
  RunResult r;
  r.name = scenario.stem().string();
  try {
    const aoi::Scenario s = load_with_overrides(scenario, seed, horizon);
    const aoi::RunOutcome out = aoi::execute_any(s);
    fs::create_directories(out_dir);
    aoi::write_text(out_dir / (r.name + ".csv"), out.csv);
    aoi::write_text(out_dir / (r.name + ".summary.json"), out.summary.dump(2) + "\n");
    r.code = out.pass ? kExitPass : kExitFail;
    r.message = out.pass ? "pass" : "fail";
    if (out.summary.value("diverged", false)) r.message += " (diverged)";
  } catch (const aoi::ValidationError& e) {
    r.code = kExitUsage;
    r.message = e.what();
  } catch (const aoi::Error& e) {
    r.code = kExitUsage;
    r.message = e.what();
  }
  return r;
}

int cmd_run(const std::string& scenario, const std::string& out_dir, std::optional<std::uint64_t> seed,
            std::optional<std::int64_t> horizon, bool quiet) {
  const RunResult r = run_one(scenario, out_dir, seed, horizon);
  if (r.code == kExitUsage) {
    std::cerr << "error: " << r.message << "\n";
  } else if (!quiet) {
    std::cout << r.name << ": " << r.message << " -> " << (fs::path(out_dir) / (r.name + ".csv")).string() << "\n";
  }
  return r.code;
}

int cmd_batch(const std::string& dir, const std::string& out_dir, std::optional<std::uint64_t> seed, unsigned jobs) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "error: no scenario files in " << dir << "\n";
    return kExitUsage;
  }
  jobs = std::max(1u, jobs);
  std::vector<RunResult> results(files.size());
  std::vector<std::future<void>> pending;
  std::size_t next = 0;
  std::mutex next_lock;
  for (unsigned w = 0; w < jobs; ++w) {
    pending.push_back(std::async(std::launch::async, [&] {
      for (;;) {
        std::size_t mine = 0;
        {
          std::lock_guard<std::mutex> g(next_lock);
          if (next >= files.size()) return;
          mine = next++;
        }
        results[mine] = run_one(files[mine], out_dir, seed, std::nullopt);
      }
    }));
  }
  for (auto& p : pending) p.get();
  nlohmann::json manifest = nlohmann::json::array();
  int code = kExitPass;
  for (const auto& r : results) {
    manifest.push_back({{"scenario", r.name}, {"exit", r.code}, {"result", r.message}});
    std::cout << r.name << ": " << r.message << "\n";
    code = std::max(code, r.code);
  }
  fs::create_directories(out_dir);
  aoi::write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  return code;
}

int cmd_reproduce(const std::string& id, std::optional<std::uint64_t> seed) {
  const std::uint64_t s = seed.value_or(env_seed().value_or(aoi::canned::kDefaultSeed));
  bool all = true;
  for (const auto& r : aoi::canned::reproduce(id, s)) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " | " << r.detail << "\n";
    all = all && r.pass;
  }
  return all ? kExitPass : kExitFail;
}

std::set<int> parse_ids(const std::string& list) {
  std::set<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.insert(std::stoi(item));
    } catch (const std::exception&) {
      throw aoi::ValidationError("--sources expects comma-separated node ids");
    }
  }
  return out;
}

int cmd_check_graph(const std::string& file, const std::vector<std::int64_t>& robust, const std::string& sources) {
  const aoi::GraphSequence seq = aoi::schedule_from_json(aoi::read_json_file(file));
  const auto rep = aoi::check_conditions(seq);
  nlohmann::json out;
  out["N"] = seq.node_count();
  out["horizon"] = seq.horizon();
  out["C1"] = rep.c1;
  out["C2"] = {{"pass", rep.c2}, {"delta_hat", rep.delta_hat}};
  out["C3"] = {{"pass", rep.c3}};
  if (rep.c3_first_failure) out["C3"]["first_failing_interval"] = *rep.c3_first_failure;
  if (rep.c1_fails_c3_holds) out["note"] = "C1 fails while C3 holds: non-monotone interval lengths are out of scope";
  bool pass = rep.c1 && rep.c2 && rep.c3;
  if (!robust.empty()) {
    if (robust.size() != 2) throw aoi::ValidationError("--robust expects r and T");
    const auto jr = aoi::is_jointly_strongly_r_robust(seq, parse_ids(sources), static_cast<int>(robust[0]), robust[1]);
    out["robust"] = {{"r", robust[0]}, {"T", robust[1]}, {"pass", jr.ok}, {"windows", jr.windows_checked}};
    if (jr.failing_window) out["robust"]["failing_window"] = *jr.failing_window;
    pass = jr.ok;
  }
  std::cout << out.dump(2) << "\n";
  return pass ? kExitPass : kExitFail;
}

int cmd_design_gains(const std::string& system_file, double rho, double delta, bool nilpotent,
                     const std::string& out_file, std::uint64_t seed) {
  const aoi::LtiSystem sys = aoi::system_from_json(aoi::read_json_file(system_file));
  const aoi::Decomposition dec = aoi::decompose(sys);
  const auto gains = aoi::design_gains(dec, nilpotent ? aoi::GainMode::nilpotent : aoi::GainMode::rate, rho, delta, seed);
  auto violations = aoi::gain_set_violations(dec, gains);
  if (gains.chain) {
    for (auto& v : aoi::rate_chain_violations(*gains.chain)) violations.push_back(std::move(v));
  }
  nlohmann::json out = aoi::gains_to_json(gains);
  out["block_dims"] = dec.block_dims;
  if (out_file.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    aoi::write_text(out_file, out.dump(2) + "\n");
  }
  for (const auto& v : violations) std::cerr << "violation: " << v << "\n";
  return violations.empty() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Freshness-index distributed observer simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;
  bool quiet = false;
  std::string batch_dir;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* run = app.add_subcommand("run", "Run a scenario file and write the trace CSV and summary");
  auto* run_file = run->add_option("scenario", scenario, "Scenario JSON file");
  auto* run_batch = run->add_option("--batch", batch_dir, "Run every scenario in this directory instead");
  run_file->excludes(run_batch);
  run->add_option("-o,--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Seed override");
  run->add_option("--horizon", horizon, "Horizon override (single scenario only)");
  run->add_option("-j,--jobs", jobs, "Worker count for --batch");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  auto* batch = app.add_subcommand("batch", "Run every scenario in a directory");
  batch->add_option("dir", batch_dir, "Directory of scenario files")->required();
  batch->add_option("-o,--out", out_dir, "Output directory");
  batch->add_option("--seed", seed, "Seed override for every scenario");
  batch->add_option("-j,--jobs", jobs, "Worker count");

  std::string repro_id;
  auto* repro = app.add_subcommand("reproduce", "Run a canned reproduction");
  repro->add_option("id", repro_id, "Reproduction id")
      ->required()
      ->check(CLI::IsMember(aoi::canned::reproduction_ids()));
  repro->add_option("--seed", seed, "Seed override");

  std::string schedule;
  std::vector<std::int64_t> robust;
  std::string sources;
  auto* check = app.add_subcommand("check-graph", "Check C1-C3 and optionally joint robustness");
  check->add_option("--schedule", schedule, "Schedule JSON file")->required();
  check->add_option("--robust", robust, "r and T for the joint robustness check")->expected(2);
  check->add_option("--sources", sources, "Comma-separated source ids for --robust");

  std::string system_file;
  double rho = 0.5;
  double delta = 0.0;
  bool nilpotent = false;
  std::string gains_out;
  std::uint64_t design_seed = aoi::canned::kDefaultSeed;
  auto* design = app.add_subcommand("design-gains", "Design observer gains for a system file");
  design->add_option("--system", system_file, "System JSON file")->required();
  design->add_option("--rho", rho, "Target rate in (0, 1)");
  design->add_option("--delta", delta, "Interval growth constant in [0, 1)");
  design->add_flag("--nilpotent", nilpotent, "Deadbeat gains");
  design->add_option("-o,--out", gains_out, "Gain file to write (stdout if omitted)");
  design->add_option("--seed", design_seed, "Seed for the output combination");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*run) {
      if (*run_batch) return cmd_batch(batch_dir, out_dir, seed, jobs);
      if (scenario.empty()) throw aoi::ValidationError("run needs a scenario file or --batch <dir>");
      return cmd_run(scenario, out_dir, seed, horizon, quiet);
    }
    if (*batch) return cmd_batch(batch_dir, out_dir, seed, jobs);
    if (*repro) return cmd_reproduce(repro_id, seed);
    if (*check) return cmd_check_graph(schedule, robust, sources);
    if (*design) return cmd_design_gains(system_file, rho, delta, nilpotent, gains_out, design_seed);
  } catch (const aoi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
