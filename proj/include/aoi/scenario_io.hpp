#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/bounds.hpp"
#include "aoi/errors.hpp"
#include "aoi/gains.hpp"
#include "aoi/graph.hpp"
#include "aoi/invariants.hpp"
#include "aoi/lti.hpp"
#include "aoi/numeric.hpp"
#include "aoi/resilient.hpp"
#include "aoi/simulator.hpp"

namespace aoi {

inline constexpr int kScenarioSchemaVersion = 1;

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline SequenceKind sequence_kind_from_string(const std::string& s) {
  if (s == "periodic-sc") return SequenceKind::periodic_sc;
  if (s == "growing-sqrt") return SequenceKind::growing_sqrt;
  if (s == "linear-growth") return SequenceKind::linear_growth;
  if (s == "robust") return SequenceKind::robust;
  throw ValidationError("graph/generate/kind: unknown kind \"" + s + "\"");
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(where + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline GraphSequence graph_from_json(const nlohmann::json& g, const std::filesystem::path& base, int nodes,
                                     std::optional<std::int64_t> horizon, std::uint64_t seed) {
  if (g.contains("file")) {
    return schedule_from_json(read_json_file(resolve(base, g.at("file").get<std::string>())), horizon);
  }
  if (g.contains("generate")) {
    const auto& gen = g.at("generate");
    if (!horizon) throw ValidationError("graph/generate: a horizon is required");
    GenerateParams p;
    p.kind = sequence_kind_from_string(gen.at("kind").get<std::string>());
    p.period = gen.value("T", std::int64_t{1});
    p.delta = gen.value("delta", 0.0);
    p.r = gen.value("r", 1);
    p.extra_edge_prob = gen.value("extra_edge_prob", p.extra_edge_prob);
    if (gen.contains("sources")) {
      for (int s : gen.at("sources").get<std::vector<int>>()) p.sources.insert(s);
    }
    return generate_sequence(p, nodes, gen.value("seed", seed), *horizon);
  }
  if (g.contains("source_broadcast")) {
    const auto& sb = g.at("source_broadcast");
    if (!horizon) throw ValidationError("graph/source_broadcast: a horizon is required");
    return source_broadcast_sequence(interval_spec_from_json(sb.at("f")), nodes, sb.value("from", 0),
                                     sb.value("to", 1), *horizon);
  }
  nlohmann::json inline_graph = g;
  if (!inline_graph.contains("N")) inline_graph["N"] = nodes;
  return schedule_from_json(inline_graph, horizon);
}

}  // namespace detail

/// Builds a scenario from its JSON document; relative paths resolve against `base`.
inline Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  try {
    if (!j.is_object()) throw ValidationError("scenario: expected a JSON object");
    if (!j.contains("$schema_version")) throw ValidationError("scenario: \"$schema_version\" is required");
    if (j.at("$schema_version").get<int>() != kScenarioSchemaVersion) {
      throw ValidationError("scenario: unsupported $schema_version (expected " + std::to_string(kScenarioSchemaVersion) + ")");
    }
    Scenario s;
    s.name = j.value("name", std::string("scenario"));
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("system")) {
      const auto& sys = j.at("system");
      s.system = sys.is_string() ? system_from_json(read_json_file(detail::resolve(base, sys.get<std::string>())))
                                 : system_from_json(sys);
    } else if (j.contains("scalar")) {
      const auto& sc = j.at("scalar");
      Matrix a(1, 1);
      a(0, 0) = sc.at("a").get<double>();
      std::vector<Matrix> cs;
      for (double c : sc.at("c").get<std::vector<double>>()) {
        Matrix ci(1, 1);
        ci(0, 0) = c;
        cs.push_back(ci);
      }
      s.system = LtiSystem(a, cs);
    } else {
      throw ValidationError("scenario: \"system\" or \"scalar\" is required");
    }
    s.dec = decompose(*s.system);

    const std::string proto = j.value("protocol", std::string("aoi"));
    if (proto == "aoi") {
      s.protocol = ProtocolKind::aoi;
    } else if (proto == "resilient") {
      s.protocol = ProtocolKind::resilient;
    } else if (proto == "naive-consensus") {
      s.protocol = ProtocolKind::naive;
      const std::string w = j.value("weights", std::string("uniform"));
      if (w != "uniform" && w != "tree") throw ValidationError("scenario/weights: uniform or tree");
      s.weights = w == "uniform" ? NaiveWeights::uniform : NaiveWeights::tree;
    } else {
      throw ValidationError("scenario/protocol: unknown protocol \"" + proto + "\"");
    }

    if (j.contains("gains")) {
      const auto& g = j.at("gains");
      if (g.contains("l")) {
        s.scalar_gains = g.at("l").get<std::vector<double>>();
        if (s.protocol == ProtocolKind::aoi) s.gains = scalar_gain_set(s.dec, s.scalar_gains);
      } else if (g.contains("design")) {
        const auto& d = g.at("design");
        const std::string mode = d.value("mode", std::string("rate"));
        if (mode != "rate" && mode != "nilpotent") throw ValidationError("gains/design/mode: rate or nilpotent");
        s.gains = design_gains(s.dec, mode == "rate" ? GainMode::rate : GainMode::nilpotent, d.value("rho", 0.5),
                               d.value("delta", 0.0), d.value("seed", s.seed));
      } else if (g.contains("file")) {
        s.gains = gains_from_json(read_json_file(detail::resolve(base, g.at("file").get<std::string>())), s.dec);
      } else {
        s.gains = gains_from_json(g, s.dec);
      }
    }

    std::optional<std::int64_t> horizon;
    if (j.contains("horizon")) horizon = j.at("horizon").get<std::int64_t>();
    if (!j.contains("graph")) throw ValidationError("scenario: \"graph\" is required");
    s.graph = detail::graph_from_json(j.at("graph"), base, s.system->node_count(), horizon, s.seed);

    if (j.contains("adversaries")) {
      for (const auto& a : j.at("adversaries")) s.adversaries.push_back(adversary_from_json(a));
    }
    s.f = j.value("f", 0);
    if (j.contains("disturbance")) s.disturbance = j.at("disturbance").get<double>();
    if (j.contains("x0")) s.x0 = detail::vector_from_json(j.at("x0"), "scenario/x0");
    if (j.contains("initial_estimates")) {
      std::vector<Vector> est;
      for (const auto& v : j.at("initial_estimates")) est.push_back(detail::vector_from_json(v, "scenario/initial_estimates"));
      s.initial_estimates = std::move(est);
    }
    s.precision = precision_from_string(j.value("precision", std::string("double")));
    if (j.contains("checks")) {
      const auto& c = j.at("checks");
      if (c.contains("rate")) {
        RateCheck rc;
        rc.rho = c.at("rate").at("rho").get<double>();
        if (c.at("rate").contains("burn_in")) rc.burn_in = c.at("rate").at("burn_in").get<std::int64_t>();
        if (c.at("rate").contains("window_end")) rc.window_end = c.at("rate").at("window_end").get<std::int64_t>();
        s.rate_check = rc;
      }
      if (c.contains("finite_time")) s.finite_time_deadline = c.at("finite_time").at("deadline").get<std::int64_t>();
      if (c.contains("robust_period")) s.robust_period = c.at("robust_period").get<std::int64_t>();
    }
    validate_scenario(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw ValidationError(e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

// ---------------------------------------------------------------------------
// Output.

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with columns k,node,substate,e_norm,tau,adopted_from. adopted_from names the neighbour
/// whose estimate produced the row's state (decided at k-1), empty if none.
template <class Real>
std::string trace_csv(const SimTrace<Real>& tr) {
  std::ostringstream out;
  out << "k,node,substate,e_norm,tau,adopted_from\n";
  const int blocks = static_cast<int>(tr.dims.size());
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    for (int i = 0; i < tr.nodes; ++i) {
      for (int j = 0; j < blocks; ++j) {
        if (tr.dims[static_cast<std::size_t>(j)] == 0) continue;
        const auto& e = tr.e_sub[k][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        std::string from;
        if (k > 0) {
          for (const auto& ad : tr.adoptions[k - 1]) {
            if (ad.node == i && ad.substate == j) from = std::to_string(ad.from);
          }
        }
        out << k << ',' << i << ',' << j << ',' << format_real(to_double(vec_norm<Real>(e))) << ','
            << tr.tau[k][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].str() << ',' << from << '\n';
      }
    }
  }
  return out.str();
}

struct RunOutcome {
  nlohmann::json summary;
  std::string csv;
  bool pass = true;
};

/// Runs, verifies and summarises a scenario in number type Real.
template <class Real>
RunOutcome execute(const Scenario& s) {
  const SimTrace<Real> tr = run<Real>(s);
  RunOutcome out;
  out.csv = trace_csv(tr);
  nlohmann::json sm;
  sm["name"] = s.name;
  sm["protocol"] = s.protocol == ProtocolKind::aoi ? "aoi" : (s.protocol == ProtocolKind::resilient ? "resilient" : "naive-consensus");
  sm["precision"] = to_string(s.precision);
  sm["horizon"] = s.horizon();
  sm["seed"] = s.seed;
  nlohmann::json finals = nlohmann::json::array();
  double worst = 0.0;
  for (int i = 0; i < tr.nodes; ++i) {
    const double e = to_double(tr.error_norm(tr.steps() - 1, static_cast<std::size_t>(i)));
    finals.push_back(e);
    if (tr.regular[static_cast<std::size_t>(i)]) worst = std::max(worst, e);
  }
  sm["final_errors"] = finals;
  sm["max_final_error"] = worst;
  sm["diverged"] = diverges(tr);
  const auto violations = assert_online_invariants(tr, s);
  sm["violations"] = violations;
  out.pass = violations.empty();
  std::int64_t dropped = 0;
  for (const auto& row : tr.dropped) {
    for (int v : row) dropped += v;
  }
  sm["dropped_messages"] = dropped;
  if (s.rate_check) {
    std::int64_t burn = s.rate_check->burn_in.value_or(s.horizon() / 2);
    const auto rep = verify_rate(tr, s.rate_check->rho, burn, s.rate_check->window_end, tr.regular);
    nlohmann::json slopes = nlohmann::json::array();
    for (double v : rep.node_slopes) slopes.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    sm["rate"] = {{"rho", s.rate_check->rho}, {"window", {rep.from, rep.to}}, {"bound", rep.bound},
                  {"node_slopes", slopes}, {"envelope_ok", rep.envelope_ok}, {"pass", rep.pass},
                  {"message", rep.message}};
    out.pass = out.pass && rep.pass;
  }
  if (s.finite_time_deadline) {
    const auto rep = verify_finite_time(tr, *s.finite_time_deadline, tr.regular);
    sm["finite_time"] = {{"deadline", *s.finite_time_deadline}, {"pass", rep.pass}, {"worst_after", rep.worst_after}};
    if (rep.first_violation) sm["finite_time"]["first_violation"] = *rep.first_violation;
    out.pass = out.pass && rep.pass;
  }
  sm["pass"] = out.pass;
  out.summary = std::move(sm);
  return out;
}

inline RunOutcome execute_any(const Scenario& s) {
  switch (s.precision) {
    case Precision::float64:
      return execute<double>(s);
    case Precision::mp100:
      return execute<mp100>(s);
    case Precision::mp1000:
      return execute<mp1000>(s);
  }
  return execute<double>(s);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

}  // namespace aoi
