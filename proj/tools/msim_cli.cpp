#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>

#include <CLI11.hpp>

#include "msim/cli/config.hpp"

using namespace msim;
using namespace msim::cli;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> pop_size;
  std::optional<long> horizon;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
};

void apply(ScenarioConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.pop_size) {
    if (cfg.population_file) throw ConfigError("--pop-size cannot resize a population read from a file");
    cfg.init.n = *o.pop_size;
  }
  if (o.horizon) {
    if (*o.horizon < 0) throw ConfigError("--horizon must be non-negative");
    cfg.horizon = *o.horizon;
  }
  if (o.threads) {
    if (*o.threads == 0) throw ConfigError("--threads must be at least 1");
    cfg.threads = *o.threads;
  }
  if (o.out) cfg.out_dir = *o.out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  return os;
}

void write_population(const ScenarioConfig& cfg, const Population& pop, const fs::path& stem) {
  if (cfg.population_csv) {
    auto os = open_out(stem.string() + ".csv");
    write_csv(pop, os);
  }
  if (cfg.population_binary) {
    auto os = open_out(stem.string() + ".psim");
    write_psim(pop, os);
  }
}

void write_trackers(const SimulationRecord& rec, std::ostream& os) {
  os << "t";
  for (const auto& s : rec.trackers) os << ',' << s.name;
  os << '\n';
  const std::size_t n = rec.trackers.empty() ? 0 : rec.trackers.front().values.size();
  for (std::size_t i = 0; i < n; ++i) {
    os << i + 1;
    for (const auto& s : rec.trackers) os << ',' << format_double(s.values[i]);
    os << '\n';
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Replay information: everything that selects the computation, plus the
/// config fingerprint. Only `created` changes between identical runs.
void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_path,
                    const std::string& config_text, const ScenarioConfig& cfg, json extra) {
  json m;
  m["tool"] = "msim";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = fs::absolute(config_path).lexically_normal().string();
  m["config_hash"] = hex64(msim::detail::fnv1a(config_text));
  m["seed"] = cfg.seed;
  m["init_seed"] = cfg.init_seed.value_or(cfg.seed);
  m["pop_size"] = cfg.population_file ? json(nullptr) : json(cfg.init.n);
  m["horizon"] = cfg.horizon;
  m["threads"] = cfg.threads;
  m["options"] = std::move(extra);
  m["created"] = utc_now();
  auto os = open_out(dir / "manifest.json");
  os << m.dump(2) << '\n';
}

/// Takes seed, size, horizon and threads from an earlier manifest; warns
/// when the config file is no longer the one that produced it.
void replay(ScenarioConfig& cfg, const std::string& manifest_path, const std::string& config_text,
            const std::string& command, json& options) {
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ConfigError("manifest '" + manifest_path + "' is not valid JSON: " + e.what());
  }
  try {
    if (m.at("command").get<std::string>() != command) {
      throw ConfigError("manifest was written by '" + m.at("command").get<std::string>() + "', not '" + command + "'");
    }
    if (m.at("config_hash").get<std::string>() != hex64(msim::detail::fnv1a(config_text))) {
      std::cerr << "warning: config differs from the one recorded in " << manifest_path
                << "; the replay may not reproduce it\n";
    }
    if (m.at("version").get<std::string>() != kVersion) {
      std::cerr << "warning: manifest written by msim " << m.at("version").get<std::string>() << '\n';
    }
    cfg.seed = m.at("seed").get<std::uint64_t>();
    cfg.init_seed = m.at("init_seed").get<std::uint64_t>();
    if (!m.at("pop_size").is_null()) cfg.init.n = m.at("pop_size").get<std::size_t>();
    cfg.horizon = m.at("horizon").get<long>();
    cfg.threads = m.at("threads").get<std::size_t>();
    options = m.at("options");
  } catch (const json::exception& e) {
    throw ConfigError("manifest '" + manifest_path + "' is incomplete: " + e.what());
  }
}

fs::path prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return dir;
}

// ---- commands ----

int cmd_run(const std::string& path, const Overrides& o, const std::optional<std::string>& replay_from) {
  const auto text = read_file(path);
  auto cfg = load_config(path);
  json options = json::object();
  if (replay_from) replay(cfg, *replay_from, text, "run", options);
  apply(cfg, o);
  const auto dir = prepare_dir(cfg.out_dir);
  const State start = make_start(cfg);
  const auto sim = make_simulator(cfg, start.population.domain());
  const auto snaps = cfg.snapshot_every > 0 ? SnapshotPolicy::every_k(cfg.snapshot_every) : SnapshotPolicy::none();
  const auto rec = run(sim, start, RunPlan(cfg.horizon, snaps, cfg.threads));

  write_population(cfg, rec.final_state.population, dir / "population");
  {
    auto os = open_out(dir / "trackers.csv");
    write_trackers(rec, os);
  }
  if (!rec.snapshots.empty()) {
    fs::create_directories(dir / "snapshots");
    for (const auto& s : rec.snapshots) {
      write_population(cfg, s.state.population, dir / "snapshots" / ("t" + std::to_string(s.t)));
    }
  }
  write_manifest(dir, "run", path, text, cfg, options);
  return 0;
}

int cmd_calibrate(const std::string& path, const Overrides& o, std::optional<std::string> targets_path,
                  std::optional<std::size_t> max_evals, const std::optional<std::string>& replay_from) {
  const auto text = read_file(path);
  auto cfg = load_config(path);
  json options = json::object();
  if (replay_from) {
    replay(cfg, *replay_from, text, "calibrate", options);
    if (!targets_path && options.contains("targets") && !options["targets"].is_null()) {
      targets_path = options["targets"].get<std::string>();
    }
    if (!max_evals && options.contains("max_evals")) max_evals = options["max_evals"].get<std::size_t>();
  }
  apply(cfg, o);
  TargetTable targets = cfg.targets.value_or(health::default_mortality_targets());
  if (targets_path) targets = read_targets_csv(*targets_path);
  if (max_evals) cfg.max_evals = *max_evals;
  const auto dir = prepare_dir(cfg.out_dir);

  const State start = make_start(cfg);
  const auto sim = make_simulator(cfg, start.population.domain());
  auto problem = health::mortality_calibration_problem(sim, start, targets, cfg.calibration_horizon);
  problem.plan.partitions = cfg.threads;
  problem.optimizer.max_evals = cfg.max_evals;
  const auto result = calibrate(problem);

  {
    auto os = open_out(dir / "theta.csv");
    os << "parameter,value\n";
    for (const auto& [k, v] : result.theta.to_map()) os << k << ',' << format_double(v) << '\n';
  }
  {
    auto os = open_out(dir / "trace.csv");
    write_trace_csv(problem, result, os);
  }
  {
    // Fit at θ*: targets beside simulated values.
    const State fitted = configure(start, result.theta);
    const auto rec = run(problem.simulator, fitted, problem.plan);
    const auto sim_values = problem.output(rec, fitted);
    auto os = open_out(dir / "fit.csv");
    os << "key,target,simulated,weight\n";
    std::size_t i = 0;
    for (const auto* list : {&problem.targets.series, &problem.targets.scalars}) {
      for (const auto& e : *list) {
        os << e.key << ',' << format_double(e.value) << ',' << format_double(sim_values[i++]) << ','
           << format_double(e.weight) << '\n';
      }
    }
  }
  {
    auto os = open_out(dir / "calibration.csv");
    os << "initial_objective,objective,evals,rejected\n"
       << format_double(result.initial_objective) << ',' << format_double(result.objective) << ','
       << result.evals << ',' << result.rejected.size() << '\n';
  }
  options["targets"] = targets_path ? json(fs::absolute(*targets_path).lexically_normal().string()) : json(nullptr);
  options["max_evals"] = cfg.max_evals;
  write_manifest(dir, "calibrate", path, text, cfg, options);
  std::cout << "objective " << format_double(result.initial_objective) << " -> " << format_double(result.objective)
            << " in " << result.evals << " evaluations\n";
  return 0;
}

ScenarioSpec scenario_named(const ScenarioConfig& cfg, const std::string& name) {
  for (const auto& s : cfg.scenarios) {
    if (s.name == name) return s;
  }
  // The three standard policies need no config entry.
  try {
    return {name, health::parse_salt_policy(name), {}, {}};
  } catch (const ConfigError&) {
    throw ConfigError("no scenario named '" + name + "' in interventions.scenarios");
  }
}

double mean_living_sbp(const Population& pop) {
  const auto& d = pop.domain();
  const std::size_t sbp = d.column("sbp"), alive = d.column("alive");
  double s = 0.0, n = 0.0;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    if (pop.value(r, alive) == 0.0) continue;
    s += pop.value(r, sbp);
    n += 1.0;
  }
  return n > 0.0 ? s / n : std::nan("");
}

int cmd_compare(const std::string& path, const Overrides& o, std::vector<std::string> names,
                std::optional<std::size_t> replications, const std::optional<std::string>& replay_from) {
  const auto text = read_file(path);
  auto cfg = load_config(path);
  json options = json::object();
  if (replay_from) {
    replay(cfg, *replay_from, text, "compare", options);
    if (names.empty() && options.contains("scenarios")) names = options["scenarios"].get<std::vector<std::string>>();
    if (!replications && options.contains("replications")) replications = options["replications"].get<std::size_t>();
  }
  apply(cfg, o);
  if (names.empty()) {
    for (const auto& s : cfg.scenarios) names.push_back(s.name);
  }
  if (names.empty()) names = {"baseline", "industry", "advice"};
  const std::size_t reps = replications.value_or(cfg.replications);
  if (reps == 0) throw ConfigError("--replications must be at least 1");
  const TimeStep horizon = o.horizon ? cfg.horizon : cfg.compare_horizon.value_or(cfg.horizon);
  std::vector<ScenarioSpec> specs;
  for (const auto& n : names) specs.push_back(scenario_named(cfg, n));
  const auto dir = prepare_dir(cfg.out_dir);

  // counts[scenario][replication]
  std::vector<std::vector<double>> counts(specs.size()), sbp(specs.size());
  auto os = open_out(dir / "compare.csv");
  os << "replication,scenario,new_strokes,mean_sbp_start\n";
  for (std::size_t r = 0; r < reps; ++r) {
    const State start = make_start(cfg, cfg.init_seed.value_or(cfg.seed) + r);
    const auto sim = make_simulator(cfg, start.population.domain(), cfg.seed + r);
    const auto& d = start.population.domain();
    for (std::size_t k = 0; k < specs.size(); ++k) {
      auto sc = health::salt_scenario(d, specs[k].name, specs[k].policy, horizon, specs[k].industry, specs[k].advice);
      sc.plan.partitions = cfg.threads;
      State after = start;
      for (const auto& iv : sc.interventions) after = intervene(after, iv, sim.draws(), 0);
      const auto rec = run_scenario(sim, start, sc);
      counts[k].push_back(health::total_new_strokes(rec));
      sbp[k].push_back(mean_living_sbp(after.population));
      os << r << ',' << specs[k].name << ',' << format_double(counts[k].back()) << ','
         << format_double(sbp[k].back()) << '\n';
    }
  }
  auto summary = open_out(dir / "compare_summary.csv");
  summary << "scenario,replications,mean,sd,min,max,mean_sbp_shift\n";
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& c = counts[k];
    double mean = 0.0, shift = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      mean += c[r];
      shift += sbp[k][r] - sbp[0][r];
    }
    mean /= static_cast<double>(reps);
    shift /= static_cast<double>(reps);
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    const double sd = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    summary << specs[k].name << ',' << reps << ',' << format_double(mean) << ',' << format_double(sd) << ','
            << format_double(*std::min_element(c.begin(), c.end())) << ','
            << format_double(*std::max_element(c.begin(), c.end())) << ',' << format_double(shift) << '\n';
  }
  options["scenarios"] = names;
  options["replications"] = reps;
  write_manifest(dir, "compare", path, text, cfg, options);
  return 0;
}

void write_incidence_row(std::ostream& os, const std::string& group, const health::Incidence& inc) {
  os << group << ',' << format_double(inc.events) << ',' << format_double(inc.person_years) << ','
     << (inc.person_years > 0.0 ? format_double(inc.per_100k()) : std::string("NA")) << '\n';
}

int cmd_sample(const std::string& path, const Overrides& o, std::optional<std::string> design_name,
               const std::optional<std::string>& replay_from) {
  const auto text = read_file(path);
  auto cfg = load_config(path);
  json options = json::object();
  if (replay_from) {
    replay(cfg, *replay_from, text, "sample", options);
    if (!design_name && options.contains("design")) design_name = options["design"].get<std::string>();
  }
  apply(cfg, o);
  if (cfg.sampling.empty()) throw ConfigError("config has no sampling section");
  const std::string name = design_name.value_or(cfg.sampling.begin()->first);
  auto it = cfg.sampling.find(name);
  if (it == cfg.sampling.end()) throw ConfigError("no sampling design named '" + name + "'");
  auto spec = it->second;
  if (o.horizon) spec.design.horizon = cfg.horizon;
  const auto dir = prepare_dir(cfg.out_dir);

  const State start = make_start(cfg);
  const auto sim = make_simulator(cfg, start.population.domain());
  auto survey = health::run_survey(sim, start, spec.design, spec.seed, cfg.threads);
  const LatentDraws draws(spec.seed);
  for (std::size_t i = 0; i < spec.missingness.size(); ++i) {
    auto m = spec.missingness[i].mechanism;
    m.tag = StreamTag("missingness-" + std::to_string(i));
    survey.sample = apply_missingness(std::move(survey.sample), m, spec.missingness[i].columns, draws);
  }
  {
    auto os = open_out(dir / "sample.csv");
    write_sample_csv(survey.sample, os);
  }
  {
    auto os = open_out(dir / "design.csv");
    write_design_csv(survey.sample, os);
  }
  {
    auto os = open_out(dir / "incidence.csv");
    os << "group,events,person_years,per_100k\n";
    write_incidence_row(os, "A_participants", survey.participants);
    write_incidence_row(os, "B_invitees", survey.invitees);
    write_incidence_row(os, "C_population", survey.population);
  }
  if (spec.odds_ratios) {
    const auto cmp = health::compare_odds_ratios(survey);
    auto os = open_out(dir / "odds_ratios.csv");
    health::write_odds_ratio_comparison(cmp, cfg.parameters, os);
    for (int sex = 0; sex < 2; ++sex) {
      for (const auto* e : {&cmp.participant_errors[sex], &cmp.invitee_errors[sex]}) {
        if (!e->empty()) std::cerr << "note: " << (sex ? "women" : "men") << ": " << *e << '\n';
      }
    }
  }
  options["design"] = name;
  write_manifest(dir, "sample", path, text, cfg, options);
  std::cout << "participants " << survey.sample.participant_count() << " of " << survey.sample.size()
            << " invitees\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microsimulation of stroke and mortality with interventions and survey sampling"};
  app.set_version_flag("--version", std::string("msim ") + kVersion);
  app.require_subcommand(1);

  std::string config;
  Overrides o;
  std::optional<std::string> replay_from, targets, design;
  std::optional<std::size_t> max_evals, replications;
  std::string scenarios;

  auto common = [&](CLI::App* sub) {
    sub->add_option("config", config, "scenario file (JSON, comments allowed)")->required();
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--pop-size", o.pop_size, "synthetic population size");
    sub->add_option("--horizon", o.horizon, "days to simulate");
    sub->add_option("--threads", o.threads, "population partitions run in parallel");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--replay", replay_from, "manifest.json of an earlier run to reproduce");
  };
  auto* run_cmd = app.add_subcommand("run", "simulate and write the final population and daily counts");
  common(run_cmd);
  auto* cal_cmd = app.add_subcommand("calibrate", "fit background mortality and 28-day stroke survival");
  common(cal_cmd);
  cal_cmd->add_option("--targets", targets, "CSV key,value,weight; '*' marks scalar targets");
  cal_cmd->add_option("--max-evals", max_evals, "objective evaluation budget");
  auto* cmp_cmd = app.add_subcommand("compare", "salt policies on shared random numbers");
  common(cmp_cmd);
  cmp_cmd->add_option("--scenarios", scenarios, "comma-separated scenario names");
  cmp_cmd->add_option("--replications", replications, "replications (seed + r)");
  auto* smp_cmd = app.add_subcommand("sample", "survey with nonresponse, follow-up and risk model refits");
  common(smp_cmd);
  smp_cmd->add_option("--design", design, "sampling section to use");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run_cmd) return cmd_run(config, o, replay_from);
    if (*cal_cmd) return cmd_calibrate(config, o, targets, max_evals, replay_from);
    if (*cmp_cmd) {
      std::vector<std::string> names;
      std::stringstream ss(scenarios);
      for (std::string s; std::getline(ss, s, ',');) {
        if (!s.empty()) names.push_back(s);
      }
      return cmd_compare(config, o, names, replications, replay_from);
    }
    if (*smp_cmd) return cmd_sample(config, o, design, replay_from);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
