#include "config.hpp"

#include <cmath>
#include <filesystem>

namespace beable::cli {

namespace {

template <class T>
struct value_of {
  using type = T;
};
template <class T>
struct value_of<std::optional<T>> {
  using type = T;
};

template <class T>
void read(const Json& j, const char* key, T& into) {
  if (j.contains(key)) {
    try {
      into = j.at(key).get<typename value_of<T>::type>();
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
  }
}

void check_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown field '" + key + "' in " + where);
    }
  }
}

Json resolve(const Json& j, const std::string& base_dir) {
  if (j.is_object() && j.contains("file")) {
    const std::filesystem::path p = std::filesystem::path(base_dir) / j.at("file").get<std::string>();
    try {
      return Json::parse(read_file(p.string()));
    } catch (const Json::parse_error& e) {
      throw ConfigError("cannot parse " + p.string() + ": " + e.what());
    }
  }
  return j;
}

ScenarioSpec particle(const Json& j) {
  check_keys(j, {"gridPoints", "cells", "xMin", "xMax", "boundary", "mass", "hbar", "packet", "potential"}, "particle parameters");
  ParticleParams p;
  read(j, "gridPoints", p.grid_points);
  read(j, "cells", p.cells);
  read(j, "xMin", p.x_lo);
  read(j, "xMax", p.x_hi);
  read(j, "mass", p.mass);
  read(j, "hbar", p.hbar);
  read(j, "potential", p.potential);
  if (j.contains("boundary")) {
    const auto b = j.at("boundary").get<std::string>();
    if (b == "periodic") {
      p.boundary = Boundary::Periodic;
    } else if (b == "hardwall") {
      p.boundary = Boundary::HardWall;
    } else {
      throw ConfigError("boundary must be periodic or hardwall");
    }
  }
  if (j.contains("packet")) {
    const auto& pk = j.at("packet");
    check_keys(pk, {"center", "width", "momentum"}, "packet");
    read(pk, "center", p.packet.center);
    read(pk, "width", p.packet.width);
    read(pk, "momentum", p.packet.momentum);
  }
  return make_particle1d(p);
}

ScenarioSpec measurement(const Json& j) {
  check_keys(j, {"lambdas", "gridPoints", "xMin", "xMax", "cells", "start", "separation", "width", "pulse", "mass", "hbar"},
             "measurement parameters");
  MeasurementParams p;
  if (j.contains("lambdas")) {
    p.lambdas.clear();
    for (const auto& l : j.at("lambdas")) {
      if (l.is_number()) {
        p.lambdas.emplace_back(l.get<double>(), 0.0);
      } else if (l.is_array() && l.size() == 2) {
        p.lambdas.emplace_back(l[0].get<double>(), l[1].get<double>());
      } else {
        throw ConfigError("lambdas entries must be numbers or [re, im] pairs");
      }
    }
  }
  read(j, "gridPoints", p.grid_points);
  read(j, "xMin", p.x_lo);
  read(j, "xMax", p.x_hi);
  read(j, "cells", p.cells);
  read(j, "start", p.start);
  read(j, "separation", p.separation);
  read(j, "width", p.width);
  read(j, "pulse", p.pulse);
  read(j, "mass", p.mass);
  read(j, "hbar", p.hbar);
  return make_measurement(p);
}

ScenarioSpec epr(const Json& j) {
  check_keys(j, {"theta", "pulse", "tA", "tB", "tFinal"}, "epr parameters");
  EprParams p;
  read(j, "theta", p.theta);
  read(j, "pulse", p.pulse);
  read(j, "tA", p.t_a);
  read(j, "tB", p.t_b);
  read(j, "tFinal", p.t_final);
  return make_epr(p);
}

ScenarioSpec ergodic(const Json& j, std::uint64_t seed) {
  check_keys(j, {"dim", "energy", "deltaE", "ranks", "hbar"}, "ergodic parameters");
  ErgodicParams p;
  read(j, "dim", p.dim);
  read(j, "energy", p.energy);
  read(j, "deltaE", p.delta_e);
  read(j, "ranks", p.ranks);
  read(j, "hbar", p.hbar);
  p.seed = seed;
  return make_ergodic(p);
}

ScenarioSpec simulate(const Json& j, const std::string& base_dir) {
  check_keys(j, {"hamiltonian", "state", "family", "hbar", "t0"}, "simulate parameters");
  for (const char* key : {"hamiltonian", "state", "family"}) {
    if (!j.contains(key)) throw ConfigError(std::string("simulate needs '") + key + "'");
  }
  const HermitianOperator h = operator_from_json(resolve(j.at("hamiltonian"), base_dir));
  const StateVector psi = state_from_json(resolve(j.at("state"), base_dir), true);
  ProjectorFamily family = family_from_json(resolve(j.at("family"), base_dir));
  if (h.dim() != psi.dim() || family.dim() != psi.dim()) {
    throw ConfigError("Hamiltonian, state and family dimensions differ");
  }
  double hbar = 1.0;
  double t0 = 0.0;
  read(j, "hbar", hbar);
  read(j, "t0", t0);
  ScenarioSpec spec{"simulate", {ScheduleSegment{t0, std::numeric_limits<double>::infinity(), h}}, psi, {}, RunDefaults{0.01, t0 + 1.0, 1000}, hbar, {}};
  spec.families.emplace_back("family", std::move(family));
  return spec;
}

}  // namespace

void RunConfig::validate() const {
  if (!trajectories || *trajectories == 0) throw ConfigError("trajectories must be positive");
  if (!dt || !(*dt > 0.0)) throw ConfigError("dt must be positive");
  if (!t_final || !std::isfinite(*t_final)) throw ConfigError("tFinal must be finite");
  parse_format(format);
}

RunConfig parse_config(const Json& doc) {
  check_keys(doc, {"schemaVersion", "scenario", "parameters", "run"}, "config");
  if (!doc.contains("schemaVersion")) throw ConfigError("config is missing schemaVersion");
  if (doc.at("schemaVersion") != kSchemaVersion) {
    throw ConfigError("unsupported schemaVersion " + doc.at("schemaVersion").dump() + ", expected " +
                      std::to_string(kSchemaVersion));
  }
  RunConfig c;
  read(doc, "scenario", c.scenario);
  if (doc.contains("parameters")) c.parameters = doc.at("parameters");
  if (doc.contains("run")) {
    const auto& r = doc.at("run");
    check_keys(r, {"seed", "trajectories", "dt", "tFinal", "output", "format", "family", "threads"}, "run");
    read(r, "seed", c.seed);
    read(r, "trajectories", c.trajectories);
    read(r, "dt", c.dt);
    read(r, "tFinal", c.t_final);
    read(r, "output", c.output);
    read(r, "format", c.format);
    read(r, "family", c.family);
    read(r, "threads", c.threads);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  try {
    return parse_config(Json::parse(read_file(path)));
  } catch (const Json::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

ScenarioSpec build_scenario(const RunConfig& config, const std::string& base_dir) {
  const auto& p = config.parameters;
  if (config.scenario == "particle") return particle(p);
  if (config.scenario == "measurement") return measurement(p);
  if (config.scenario == "epr") return epr(p);
  if (config.scenario == "ergodic") return ergodic(p, config.seed);
  if (config.scenario == "simulate") return simulate(p, base_dir);
  throw ConfigError("unknown scenario '" + config.scenario + "'");
}

void apply_defaults(RunConfig& config, const ScenarioSpec& spec) {
  if (!config.dt) config.dt = spec.defaults.dt;
  if (!config.t_final) config.t_final = spec.defaults.t1;
  if (!config.trajectories) config.trajectories = spec.defaults.trajectories;
  if (config.family.empty()) config.family = spec.families.back().first;
  config.validate();
  spec.family(config.family);
}

}  // namespace beable::cli
