#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <ostream>

#include "beable/analysis.hpp"
#include "beable/integrate.hpp"
#include "beable/io.hpp"
#include "beable/scenarios.hpp"
#include "config.hpp"

namespace beable::cli {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t trajectories = 0;
  double dt = 0.0;
  double t_final = 0.0;
  std::string output;
  std::string format;
  std::string family;
  unsigned threads = 0;
  double theta = 0.0;
  double time = 0.0;
  const CLI::App* active = nullptr;

  bool has(const std::string& name) const {
    const CLI::Option* opt = active->get_option_no_throw("--" + name);
    return opt != nullptr && opt->count() > 0;
  }
};

void add_run_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--seed", f.seed, "Master seed (overrides the config)");
  sub.add_option("--trajectories", f.trajectories, "Ensemble size");
  sub.add_option("--dt", f.dt, "Largest sampling step");
  sub.add_option("--t-final", f.t_final, "End of the sampling window");
  sub.add_option("--output", f.output, "Directory for data files");
  sub.add_option("--format", f.format, "csv or json");
  sub.add_option("--family", f.family, "Projector family name");
  sub.add_option("--threads", f.threads, "Worker threads (capped by BEABLE_THREADS)");
}

// Scenario name expected by each sampling subcommand.
const std::map<std::string, std::string> kScenarioOf = {
    {"particle", "particle"}, {"measure", "measurement"}, {"epr", "epr"}, {"ergodic", "ergodic"}, {"simulate", "simulate"}};

RunConfig resolve_config(const std::string& command, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_config(f.config);
  if (const auto it = kScenarioOf.find(command); it != kScenarioOf.end()) {
    if (cfg.scenario.empty()) cfg.scenario = it->second;
    if (cfg.scenario != it->second) {
      throw ConfigError("config describes scenario '" + cfg.scenario + "', not '" + it->second + "'");
    }
  } else if (cfg.scenario.empty()) {
    throw ConfigError("config does not name a scenario");
  }
  if (f.has("seed")) cfg.seed = f.seed;
  if (f.has("trajectories")) cfg.trajectories = f.trajectories;
  if (f.has("dt")) cfg.dt = f.dt;
  if (f.has("t-final")) cfg.t_final = f.t_final;
  if (f.has("output")) cfg.output = f.output;
  if (f.has("format")) cfg.format = f.format;
  if (f.has("family")) cfg.family = f.family;
  if (f.has("threads")) cfg.threads = f.threads;
  if (f.has("theta")) cfg.parameters["theta"] = f.theta;
  return cfg;
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

// Collects data files and the summary; files are written only once everything succeeded.
class Context {
 public:
  Context(RunConfig config, ScenarioSpec spec, std::ostream& out)
      : cfg(std::move(config)), spec(std::move(spec)), format(parse_format(cfg.format)), out_(out) {}

  void add_file(const std::string& stem, std::string content) {
    files_.emplace_back(stem + extension(format), std::move(content));
  }
  void add_table(const std::string& stem, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows) {
    add_file(stem, table_text(columns, rows, format));
  }
  void note(const std::string& key, const Json& value) {
    summary[key] = value;
    out_ << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
  void line(const std::string& text) { out_ << text << '\n'; }

  double t1() const { return *cfg.t_final; }
  double dt() const { return *cfg.dt; }
  std::size_t trajectories() const { return *cfg.trajectories; }

  void finish() {
    if (cfg.output.empty()) return;
    const fs::path dir(cfg.output);
    fs::create_directories(dir);
    for (const auto& [name, content] : files_) atomic_write((dir / name).string(), content);
    atomic_write((dir / "summary.json").string(), summary.dump(1) + "\n");
  }

  RunConfig cfg;
  ScenarioSpec spec;
  OutputFormat format;
  Json summary = Json::object();

 private:
  std::ostream& out_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::vector<double> probe_times(double t0, double t1, int intervals = 10) {
  std::vector<double> times;
  for (int k = 0; k <= intervals; ++k) times.push_back(k == intervals ? t1 : t0 + (t1 - t0) * k / intervals);
  return times;
}

double window_start(const Context& c) {
  const double t0 = c.spec.system().t0();
  if (!(c.t1() > t0)) throw ConfigError("tFinal must exceed the scenario start time " + format_number(t0));
  return t0;
}

void describe_ensemble(Context& c, const RateModel& model, const std::vector<JumpTrajectory>& paths, double t0) {
  std::size_t jumps = 0;
  std::size_t repairs = 0;
  std::size_t steps = 0;
  for (const auto& p : paths) {
    jumps += p.events.size() - p.repair_events;
    repairs += p.repair_events;
    steps = std::max(steps, p.steps);
  }
  c.note("scenario", c.spec.name);
  c.note("family", c.cfg.family);
  c.note("cells", model.count());
  c.note("seed", c.cfg.seed);
  c.note("trajectories", paths.size());
  c.note("window", Json::array({t0, c.t1()}));
  c.note("dt", c.dt());
  c.note("steps", steps);
  c.note("jumps", jumps);
  c.note("repairs", repairs);
  const OccupancyStats occ = occupancy_stats(paths, model, probe_times(t0, c.t1()));
  c.note("occupancy_max_sigma", number_or_null(occ.max_sigma()));
  c.add_file("trajectories", trajectories_text(paths, c.format));
  c.add_file("occupancy", occupancy_text(occ, c.format));
}

struct Sampled {
  RateModel model;
  std::vector<JumpTrajectory> paths;
  double t0;
};

Sampled sample(Context& c) {
  const double t0 = window_start(c);
  RateModel model(c.spec.system(), c.spec.family(c.cfg.family));
  SamplingOptions options;
  options.dt = c.dt();
  const RateSchedule schedule(model, t0, c.t1(), options);
  auto paths = sample_ensemble(schedule, c.trajectories(), c.cfg.seed, kDrawInitial, c.cfg.threads);
  describe_ensemble(c, model, paths, t0);
  return {std::move(model), std::move(paths), t0};
}

double sigma_units(double freq, double weight, std::size_t n) {
  const double var = weight * (1.0 - weight) / static_cast<double>(n);
  if (var <= 0.0) return freq == weight ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(freq - weight) / std::sqrt(var);
}

// Frequencies of the final index over the given cells, reported next to the
// weights at the end of the window.
void outcome_table(Context& c, const Sampled& s, const std::vector<Index>& cells, const std::vector<double>& expected) {
  const auto final_weights = s.model.at(c.t1()).weights;
  const std::size_t n = s.paths.size();
  std::vector<std::vector<double>> rows;
  Json table = Json::array();
  c.line("outcome  cell  expected  weight  frequency  sigma");
  for (std::size_t a = 0; a < cells.size(); ++a) {
    const Index cell = cells[a];
    std::size_t hits = 0;
    for (const auto& p : s.paths) hits += p.final_index() == cell ? 1 : 0;
    const double freq = static_cast<double>(hits) / static_cast<double>(n);
    const double w = final_weights[static_cast<std::size_t>(cell)];
    const double sig = sigma_units(freq, w, n);
    c.line(fmt::format("{:7d}  {:4d}  {:8.6f}  {:6.4f}  {:9.4f}  {:5.2f}", a, cell, expected[a], w, freq, sig));
    rows.push_back({static_cast<double>(a), static_cast<double>(cell), expected[a], w, freq});
    table.push_back({{"outcome", a}, {"cell", cell}, {"expected", expected[a]}, {"weight", w}, {"frequency", freq},
                     {"sigma", number_or_null(sig)}});
  }
  c.summary["outcomes"] = table;
  c.add_table("outcomes", {"outcome", "cell", "expected", "weight", "frequency"}, rows);
}

long net_cell_jumps(const JumpTrajectory& p, Index cells, bool ring) {
  long net = 0;
  for (const auto& e : p.events) {
    if (e.repair) continue;
    long d = static_cast<long>(e.to - e.from);
    if (ring) {
      if (d > cells / 2) d -= cells;
      if (d < -cells / 2) d += cells;
    }
    net += d;
  }
  return net;
}

void run_particle(Context& c) {
  const Sampled s = sample(c);
  const ProjectorFamily& family = s.model.family();
  const auto& grid = family.grid();
  const bool ring = grid && grid->boundary == Boundary::Periodic;
  const double ring_length = ring ? grid->x_hi - grid->x_lo : 0.0;
  std::vector<double> centers;
  for (Index i = 0; i < family.size(); ++i) centers.push_back(family.label(i).center());
  const auto times = probe_times(s.t0, c.t1());
  const DriftVariance dv = drift_variance(s.paths, centers, times, ring_length);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < times.size(); ++k) rows.push_back({times[k], dv.mean[k], dv.variance[k]});
  c.add_table("drift", {"time", "mean", "variance"}, rows);

  const double v = c.spec.marker("velocity");
  const double delta = c.spec.marker("resolution");
  const double span = c.t1() - s.t0;
  c.note("velocity", v);
  c.note("drift_slope", dv.slope());
  c.note("variance", dv.variance.back());
  c.note("variance_expected", std::abs(v) * span * delta);
  if (v > 0.0 && v * c.dt() / delta < 1.0) {
    std::vector<long> samples;
    for (const auto& p : s.paths) samples.push_back(net_cell_jumps(p, family.size(), ring));
    const long steps = std::lround(span / c.dt());
    const ChiSquare chi = chi_square_binomial(samples, steps, v * c.dt() / delta);
    c.note("chi_square", chi.statistic);
    c.note("chi_square_dof", chi.dof);
    c.note("chi_square_p", chi.p_value);
  }
}

void run_measure(Context& c) {
  const Sampled s = sample(c);
  if (c.cfg.family != "pointer") return;
  std::vector<Index> cells;
  std::vector<double> expected;
  for (int a = 0; c.spec.markers.count("cell_" + std::to_string(a)); ++a) {
    cells.push_back(static_cast<Index>(c.spec.marker("cell_" + std::to_string(a))));
    expected.push_back(c.spec.marker("weight_" + std::to_string(a)));
  }
  outcome_table(c, s, cells, expected);
}

void run_epr(Context& c) {
  const Sampled s = sample(c);
  const double theta = c.spec.marker("theta");
  const double t1 = c.spec.marker("t1");
  const double t2 = c.spec.marker("t2");
  const double t3 = c.spec.marker("t3");
  if (c.cfg.family == "AB") {
    const double ss = 0.5 * std::pow(std::sin(theta), 2);
    const double cc = 0.5 * std::pow(std::cos(theta), 2);
    outcome_table(c, s, epr_outcome_cells(), {ss, cc, cc, ss});
  }
  if (c.t1() >= t3) {
    const RateModel a(c.spec.system(), c.spec.family("A"));
    const auto first = integrated_probabilities(a, t1, t2);
    const auto second = integrated_probabilities(a, t2, t3);
    c.note("p_plus_given_0", first(1, 0));
    c.note("p_minus_given_0", first(2, 0));
    c.note("p_plus_given_plus", second(1, 1));
  }
}

void run_ergodic(Context& c) {
  const double t0 = window_start(c);
  const QuantumSystem system = c.spec.system();
  const ProjectorFamily& family = c.spec.family(c.cfg.family);
  const RateModel model(system, family);
  SamplingOptions options;
  options.dt = c.dt();
  const auto paths = sample_ensemble(model, t0, c.t1(), options, c.trajectories(), c.cfg.seed, kDrawInitial,
                                     c.cfg.threads);
  describe_ensemble(c, model, paths, t0);

  const double horizon = c.t1() - t0;
  std::vector<double> occupation(static_cast<std::size_t>(family.size()), 0.0);
  for (const auto& p : paths) {
    const auto f = occupation_fractions(p, family.size(), t0, c.t1());
    for (std::size_t i = 0; i < f.size(); ++i) occupation[i] += f[i] / static_cast<double>(paths.size());
  }
  const auto averaged = averaged_weights(system, family, t0, horizon);
  const EquilibrationReport eq = equilibration_check(system, family, horizon, 200);
  double worst = 0.0;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < occupation.size(); ++i) {
    worst = std::max(worst, std::abs(occupation[i] - averaged[i]) / averaged[i]);
    rows.push_back({static_cast<double>(i), occupation[i], averaged[i], eq.dephasing[i], eq.target[i]});
  }
  c.add_table("weights", {"cell", "occupation", "averaged", "dephasing", "target"}, rows);
  c.note("occupation_vs_averaged", worst);
  c.note("averaged_vs_dephasing", eq.max_deviation_dephasing);
  c.note("averaged_vs_uniform", eq.max_deviation_target);
  c.note("outlier_fraction", eq.outlier_fraction);

  std::vector<double> lags;
  for (int k = 1; k <= 40; ++k) lags.push_back(0.5 * k);
  IntegrationOptions io;
  io.tolerance = 1e-7;
  const double t_start = t0 + std::min(5.0, 0.5 * horizon);
  try {
    const DecayFit fit = ergodicity_decay(model, t_start, lags, 1e-5, io);
    std::vector<std::vector<double>> decay;
    for (std::size_t k = 0; k < fit.times.size(); ++k) decay.push_back({fit.times[k], fit.metric[k]});
    c.add_table("decay", {"lag", "metric"}, decay);
    c.note("mu", fit.mu);
    c.note("mu_over_sqrt_n", fit.mu / std::sqrt(static_cast<double>(system.dim())));
    c.note("fit_points", fit.used);
    c.note("fit_residual", fit.residual);
  } catch (const FitError& e) {
    c.note("mu", nullptr);
    c.note("fit_error", e.what());
  }
}

void run_simulate(Context& c) { sample(c); }

void run_rates(Context& c, const Flags& f) {
  const QuantumSystem system = c.spec.system();
  const double t = f.has("time") ? f.time : system.t0();
  if (t < system.t0() || t > system.t_end()) throw ConfigError("time outside the Hamiltonian schedule");
  const RateModel model(system, c.spec.family(c.cfg.family));
  const RateSnapshot snap = model.at(t);
  c.note("scenario", c.spec.name);
  c.note("family", c.cfg.family);
  c.note("time", t);
  std::vector<std::vector<double>> weight_rows;
  for (std::size_t i = 0; i < snap.weights.size(); ++i) weight_rows.push_back({static_cast<double>(i), snap.weights[i]});
  std::vector<std::vector<double>> rows;
  c.line("from  to  rate");
  for (Index j = 0; j < snap.rates.count(); ++j) {
    for (Index i = 0; i < snap.rates.count(); ++i) {
      if (snap.rates(i, j) > 0.0) {
        rows.push_back({static_cast<double>(j), static_cast<double>(i), snap.rates(i, j)});
        c.line(fmt::format("{:4d}  {:2d}  {}", j, i, format_number(snap.rates(i, j))));
      }
    }
  }
  c.note("nonzero_rates", rows.size());
  c.note("one_way_defect", snap.rates.one_way_defect());
  c.add_table("rates", {"from_index", "to_index", "rate"}, rows);
  c.add_table("weights", {"index", "weight"}, weight_rows);
}

// Invariant suite: pass/fail lines, exit 1 if any check fails.
int run_validate(Context& c) {
  bool ok = true;
  Json report = Json::array();
  auto check = [&](const std::string& name, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    c.line(fmt::format("{} {} value={} limit={}", pass ? "PASS" : "FAIL", name, format_number(value), format_number(limit)));
    report.push_back({{"check", name}, {"value", value}, {"limit", limit}, {"pass", pass}});
  };

  const QuantumSystem system = c.spec.system();
  const double t0 = system.t0();
  const double t1 = std::min(c.t1(), system.t_end());
  double herm = 0.0;
  for (const auto& seg : c.spec.schedule) herm = std::max(herm, hermiticity_defect(seg.hamiltonian.matrix()));
  check("hamiltonian_hermitian", herm, 1e-10);
  check("initial_state_normalized", std::abs(c.spec.initial_state.amplitudes().norm() - 1.0), 1e-10);

  for (const auto& [name, family] : c.spec.families) {
    check(name + ".orthogonal", family.orthogonality_defect(), 1e-10);
    const CoarseObservable obs = build_coarse_observable(family, 0.0, 1.0);
    const HermitianOperator o = obs.operator_form();
    const RateModel model(system, family);
    double born = 0.0;
    double one_way = 0.0;
    for (const double t : probe_times(t0, t1, 4)) {
      const StateVector psi = system.state_vector_at(t);
      const MicrostateDecomposition d = decompose_pure(psi, family);
      double ensemble = 0.0;
      for (Index i = 0; i < d.size(); ++i) {
        if (!d.occupied(i)) continue;
        const StateVector psi_i(d.states[static_cast<std::size_t>(i)]);
        ensemble += d.weights[static_cast<std::size_t>(i)] * expectation(o, psi_i);
      }
      born = std::max(born, std::abs(expectation(o, psi) - ensemble));
      one_way = std::max(one_way, model.at(t).rates.one_way_defect());
    }
    check(name + ".born_rule", born, 1e-9);
    check(name + ".one_way", one_way, 0.0);

    const double h = 1e-5;
    const auto cuts = system.breakpoints(t0, t1);
    double residual = 0.0;
    for (const double t : probe_times(t0, t1, 6)) {
      if (t - h < t0 || t + h > t1) continue;
      bool near_cut = false;
      for (const double b : cuts) near_cut = near_cut || std::abs(b - t) <= h;
      if (near_cut) continue;
      const std::size_t seg = system.segment_index(t);
      std::vector<double> ts{t - h, t, t + h};
      std::vector<std::vector<double>> ws;
      std::vector<RateMatrix> rs;
      for (const double tt : ts) {
        RateSnapshot snap = model.at(tt, seg);
        ws.push_back(std::move(snap.weights));
        rs.push_back(std::move(snap.rates));
      }
      residual = std::max(residual, master_residual(ts, ws, rs));
    }
    check(name + ".master_equation", residual, 1e-6);

    const auto ip = integrated_probabilities(model, t0, t0 + std::min(0.2, t1 - t0));
    double column = 0.0;
    for (Index j = 0; j < ip.count(); ++j) column = std::max(column, std::abs(ip.p.col(j).sum() - 1.0));
    check(name + ".stochastic", column, 1e-8);
  }

  if (c.spec.name == "epr") {
    const double theta = c.spec.marker("theta");
    const double ss = 0.5 * std::pow(std::sin(theta), 2);
    const double cc = 0.5 * std::pow(std::cos(theta), 2);
    const std::vector<double> expected{ss, cc, cc, ss};
    const StateVector psi = system.state_vector_at(c.spec.marker("t3"));
    const auto w = decompose_pure(psi, c.spec.family("AB")).weights;
    const auto cells = epr_outcome_cells();
    double dev = 0.0;
    for (std::size_t k = 0; k < cells.size(); ++k) dev = std::max(dev, std::abs(w[static_cast<std::size_t>(cells[k])] - expected[k]));
    check("epr.final_weights", dev, 1e-8);
  }
  if (c.spec.name == "measurement") {
    const StateVector psi = system.state_vector_at(t1);
    const auto w = decompose_pure(psi, c.spec.family("pointer")).weights;
    double dev = 0.0;
    for (int a = 0; c.spec.markers.count("cell_" + std::to_string(a)); ++a) {
      const auto cell = static_cast<std::size_t>(c.spec.marker("cell_" + std::to_string(a)));
      dev = std::max(dev, std::abs(w[cell] - c.spec.marker("weight_" + std::to_string(a))));
    }
    check("measurement.outcome_weights", dev, 1e-6);
  }
  c.summary["scenario"] = c.spec.name;
  c.summary["checks"] = report;
  c.summary["passed"] = ok;
  c.line(ok ? "all checks passed" : "some checks failed");
  return ok ? 0 : 1;
}

int dispatch(const std::string& command, const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve_config(command, f);
  const std::string base = f.config.empty() ? "." : fs::path(f.config).parent_path().string();
  ScenarioSpec spec = build_scenario(cfg, base.empty() ? "." : base);
  apply_defaults(cfg, spec);
  Context c(std::move(cfg), std::move(spec), out);
  int code = 0;
  if (command == "particle") {
    run_particle(c);
  } else if (command == "measure") {
    run_measure(c);
  } else if (command == "epr") {
    run_epr(c);
  } else if (command == "ergodic") {
    run_ergodic(c);
  } else if (command == "simulate") {
    run_simulate(c);
  } else if (command == "rates") {
    run_rates(c, f);
  } else {
    code = run_validate(c);
  }
  c.finish();
  return code;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic microstate jump dynamics", "beable"};
  app.require_subcommand(1, 1);
  Flags f;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"particle", "Particle on a line, position cells"},
      {"measure", "Pointer measurement of a superposition"},
      {"epr", "Two devices reading a singlet pair"},
      {"ergodic", "Random Hamiltonian, memory loss and time averages"},
      {"simulate", "Hamiltonian, state and family from a config"},
      {"rates", "Print the rate matrix at --time"},
      {"validate", "Run the invariant suite on a config"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto* config = sub->add_option("--config", f.config, "JSON config file");
    if (name == "simulate" || name == "rates" || name == "validate") config->required();
    add_run_flags(*sub, f);
    if (name == "epr") sub->add_option("--theta", f.theta, "Angle of B's reading axis");
    if (name == "rates") sub->add_option("--time", f.time, "Evaluation time");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    f.active = app.get_subcommands().front();
    return dispatch(f.active->get_name(), f, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace beable::cli
