#pragma once

#include <filesystem>
#include <iomanip>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "msim/health/calibration.hpp"
#include "msim/health/init.hpp"
#include "msim/health/studies.hpp"
#include "msim/sampler/missingness.hpp"

namespace msim::cli {

using nlohmann::json;

/// Salt policy of one named counterfactual scenario.
struct ScenarioSpec {
  std::string name;
  health::SaltPolicy policy = health::SaltPolicy::none;
  SaltIndustryOptions industry;
  SaltAdviceOptions advice;
};

struct MissingnessSpec {
  std::vector<std::string> columns;
  MissingnessMechanism mechanism;
};

struct SamplingSpec {
  health::SurveyDesign design;
  std::uint64_t seed = 0;
  bool odds_ratios = true;
  std::vector<MissingnessSpec> missingness;
};

/// Everything a command needs, with file references already loaded.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  health::InitConfig init = health::default_init_config(10000);
  std::optional<std::uint64_t> init_seed;  // defaults to `seed`
  std::optional<std::string> population_file;
  EventOrder order = EventOrder::shared();
  health::HealthParameters parameters;
  TimeStep horizon = 365;
  std::size_t threads = 1;
  TimeStep snapshot_every = 0;
  std::optional<TargetTable> targets;
  std::size_t max_evals = 200;
  TimeStep calibration_horizon = 365;
  std::vector<ScenarioSpec> scenarios;
  std::size_t replications = 1;
  std::optional<TimeStep> compare_horizon;
  std::map<std::string, SamplingSpec> sampling;  // section name -> design
  std::string out_dir = "out";
  bool population_csv = true, population_binary = false;
};

inline std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

namespace detail {

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
void read(const json& j, const std::string& key, const std::string& where, T& out) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

inline double number(const json& j, const std::string& key, const std::string& where) {
  const double v = get<double>(j, key, where);
  if (!std::isfinite(v)) throw ConfigError(where + "." + key + " is not finite");
  return v;
}

inline std::size_t count(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline std::vector<double> numbers(const json& j, const std::string& key, const std::string& where,
                                   std::size_t n) {
  auto v = get<std::vector<double>>(j, key, where);
  if (n && v.size() != n) {
    throw ConfigError(where + "." + key + " needs " + std::to_string(n) + " values");
  }
  return v;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
}

/// CSV with header term,estimate.
inline std::map<std::string, double> read_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open coefficient file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"term", "estimate"}) {
    throw ConfigError(path + ": header must be term,estimate");
  }
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 2) throw ConfigError(path + ": expected 2 fields in '" + line + "'");
    try {
      out[cells[0]] = parse_double(cells[1]);
    } catch (const DomainError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  return out;
}

inline double coefficient(const std::map<std::string, double>& c, const std::string& term,
                          const std::string& path) {
  auto it = c.find(term);
  if (it == c.end()) throw ConfigError(path + ": missing term '" + term + "'");
  return it->second;
}

inline void check_terms(const std::map<std::string, double>& c, const std::vector<std::string>& terms,
                        const std::string& path) {
  for (const auto& [k, v] : c) {
    if (std::find(terms.begin(), terms.end(), k) == terms.end()) {
      throw ConfigError(path + ": unknown term '" + k + "'");
    }
  }
}

inline void load_stroke(const std::string& path, double& intercept, std::array<double, 6>& b) {
  const auto c = read_coefficients(path);
  std::vector<std::string> terms{"intercept"};
  for (const auto& t : health::stroke_terms()) terms.push_back(t);
  check_terms(c, terms, path);
  intercept = coefficient(c, "intercept", path);
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = coefficient(c, health::stroke_terms()[k], path);
}

inline void load_diabetes(const std::string& path, health::RiskModelCoefficients& r) {
  const auto c = read_coefficients(path);
  std::vector<std::string> terms{"intercept"};
  for (const auto& t : health::diabetes_terms()) terms.push_back(t);
  check_terms(c, terms, path);
  r.diabetes_intercept = coefficient(c, "intercept", path);
  for (std::size_t k = 0; k < r.diabetes.size(); ++k) r.diabetes[k] = coefficient(c, health::diabetes_terms()[k], path);
}

inline NonParticipationModel load_nonparticipation(const std::string& path) {
  const auto c = read_coefficients(path);
  NonParticipationModel m;
  std::vector<std::string> terms{"intercept"};
  for (const auto& t : m.columns) terms.push_back(t);
  check_terms(c, terms, path);
  m.rho[0] = coefficient(c, "intercept", path);
  for (std::size_t k = 0; k < m.columns.size(); ++k) m.rho[k + 1] = coefficient(c, m.columns[k], path);
  return m;
}

inline void parse_init(const json& j, ScenarioConfig& cfg, const std::filesystem::path& base) {
  const std::string w = "init";
  allow_keys(j, w, {"size", "seed", "file", "woman_fraction", "parents_stroke", "diabetes_prevalence",
                    "prior_stroke", "age_weights", "smoking"});
  auto& c = cfg.init;
  if (j.contains("size")) c.n = count(j, "size", w);
  if (j.contains("seed")) cfg.init_seed = get<std::uint64_t>(j, "seed", w);
  if (j.contains("file")) cfg.population_file = resolve(base, get<std::string>(j, "file", w));
  if (j.contains("woman_fraction")) c.woman_fraction = number(j, "woman_fraction", w);
  if (j.contains("parents_stroke")) c.parents_stroke = number(j, "parents_stroke", w);
  if (j.contains("diabetes_prevalence")) {
    auto v = numbers(j, "diabetes_prevalence", w, 2);
    c.diabetes_prevalence = {v[0], v[1]};
  }
  if (j.contains("prior_stroke")) c.prior_stroke = numbers(j, "prior_stroke", w, c.age_groups());
  for (const char* key : {"age_weights", "smoking"}) {
    if (!j.contains(key)) continue;
    const auto& s = j.at(key);
    const std::string ws = w + "." + key;
    allow_keys(s, ws, {"men", "women"});
    auto& dst = std::string(key) == "smoking" ? c.smoking : c.age_weights;
    if (s.contains("men")) dst[0] = numbers(s, "men", ws, c.age_groups());
    if (s.contains("women")) dst[1] = numbers(s, "women", ws, c.age_groups());
  }
}

inline void parse_parameters(const json& j, ScenarioConfig& cfg, const std::filesystem::path& base) {
  const std::string w = "parameters";
  allow_keys(j, w, {"stroke_men", "stroke_women", "diabetes", "values"});
  auto& p = cfg.parameters;
  if (j.contains("stroke_men")) {
    load_stroke(resolve(base, get<std::string>(j, "stroke_men", w)), p.risk.stroke_m_intercept, p.risk.stroke_m);
  }
  if (j.contains("stroke_women")) {
    load_stroke(resolve(base, get<std::string>(j, "stroke_women", w)), p.risk.stroke_f_intercept, p.risk.stroke_f);
  }
  if (j.contains("diabetes")) load_diabetes(resolve(base, get<std::string>(j, "diabetes", w)), p.risk);
  if (j.contains("values")) {
    const auto& v = j.at("values");
    if (!v.is_object()) throw ConfigError("parameters.values must be an object");
    auto m = health::to_map(p);
    for (const auto& [k, x] : v.items()) {
      if (!m.count(k)) throw ConfigError("unknown parameter '" + k + "' in parameters.values");
      m[k] = number(v, k, w + ".values");
    }
    const auto d = health::make_health_domain();
    p = health::from_theta(ParameterVector(d, m));
  }
  // The diabetes model also ranks baseline risk when the population is built.
  cfg.init.risk = p.risk;
}

inline ScenarioSpec parse_scenario(const std::string& name, const json& j) {
  const std::string w = "interventions.scenarios." + name;
  allow_keys(j, w, {"policy", "sbp_change", "threshold", "compliance"});
  ScenarioSpec s{name, health::parse_salt_policy(get<std::string>(j, "policy", w)), {}, {}};
  if (s.policy == health::SaltPolicy::industry) {
    if (j.contains("threshold") || j.contains("compliance")) {
      throw ConfigError(w + ": threshold and compliance apply to the advice policy only");
    }
    if (j.contains("sbp_change")) s.industry.sbp_change = number(j, "sbp_change", w);
  } else if (s.policy == health::SaltPolicy::advice) {
    if (j.contains("sbp_change")) s.advice.sbp_change = number(j, "sbp_change", w);
    if (j.contains("threshold")) s.advice.threshold = number(j, "threshold", w);
    if (j.contains("compliance")) s.advice.compliance = number(j, "compliance", w);
    if (!(s.advice.compliance >= 0.0 && s.advice.compliance <= 1.0)) {
      throw ConfigError(w + ".compliance must lie in [0, 1]");
    }
  } else if (j.size() > 1) {
    throw ConfigError(w + ": the baseline policy takes no options");
  }
  return s;
}

inline MissingnessSpec parse_missingness(const json& j, const std::string& w) {
  allow_keys(j, w, {"columns", "mechanism", "scope", "probability", "intercept", "coefficients"});
  MissingnessSpec m;
  m.columns = get<std::vector<std::string>>(j, "columns", w);
  const auto kind = get<std::string>(j, "mechanism", w);
  const auto scope = j.contains("scope") ? get<std::string>(j, "scope", w) : std::string("cells");
  if (scope != "cells" && scope != "row") throw ConfigError(w + ".scope must be 'cells' or 'row'");
  const auto sc = scope == "row" ? MissingnessMechanism::Scope::row : MissingnessMechanism::Scope::cells;
  if (kind == "mcar") {
    if (j.contains("intercept") || j.contains("coefficients")) throw ConfigError(w + ": MCAR takes a probability only");
    const double p = number(j, "probability", w);
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(w + ".probability must lie in [0, 1]");
    m.mechanism = MissingnessMechanism::mcar(p, sc);
  } else if (kind == "mar" || kind == "mnar") {
    if (j.contains("probability")) throw ConfigError(w + ": " + kind + " takes intercept and coefficients");
    LogisticMissingness lm;
    lm.intercept = number(j, "intercept", w);
    if (j.contains("coefficients")) {
      for (const auto& [k, v] : j.at("coefficients").items()) lm.coefficients[k] = number(j.at("coefficients"), k, w);
    }
    m.mechanism = kind == "mar" ? MissingnessMechanism::mar(lm, sc) : MissingnessMechanism::mnar(lm, sc);
  } else {
    throw ConfigError(w + ".mechanism must be mcar, mar or mnar");
  }
  const auto cols = health::survey_columns();
  for (const auto& c : m.columns) {
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) {
      throw ConfigError(w + ": '" + c + "' is not a survey column");
    }
  }
  return m;
}

inline SamplingSpec parse_sampling(const json& j, const std::string& w, const std::filesystem::path& base,
                                   std::uint64_t seed) {
  allow_keys(j, w, {"invitees", "nonresponse", "nonparticipation", "seed", "horizon", "odds_ratios", "missingness"});
  SamplingSpec s;
  s.seed = seed;
  s.design.invitees = count(j, "invitees", w);
  read(j, "nonresponse", w, s.design.nonresponse);
  if (j.contains("nonparticipation")) {
    s.design.nonparticipation = load_nonparticipation(resolve(base, get<std::string>(j, "nonparticipation", w)));
  }
  read(j, "seed", w, s.seed);
  if (j.contains("horizon")) s.design.horizon = static_cast<TimeStep>(count(j, "horizon", w));
  read(j, "odds_ratios", w, s.odds_ratios);
  if (j.contains("missingness")) {
    const auto& list = j.at("missingness");
    if (!list.is_array()) throw ConfigError(w + ".missingness must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      s.missingness.push_back(parse_missingness(list[i], w + ".missingness[" + std::to_string(i) + "]"));
    }
  }
  return s;
}

}  // namespace detail

/// Parses a scenario document (JSON, comments allowed). Relative file names
/// are resolved against `base`. Any unknown key is an error.
inline ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base = ".") {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::allow_keys(j, "config", {"seed", "domain", "init", "events", "parameters", "calibration",
                                   "interventions", "sampling", "run", "outputs"});
  ScenarioConfig cfg;
  if (j.contains("seed")) cfg.seed = detail::get<std::uint64_t>(j, "seed", "config");
  if (j.contains("domain") && detail::get<std::string>(j, "domain", "config") != "health") {
    throw ConfigError("domain must be 'health'; other models need a rebuild");
  }
  if (j.contains("init")) detail::parse_init(j.at("init"), cfg, base);
  if (j.contains("events")) {
    const auto& e = j.at("events");
    detail::allow_keys(e, "events", {"order"});
    if (e.contains("order")) {
      const auto o = detail::get<std::string>(e, "order", "events");
      if (o == "shared") cfg.order = EventOrder::shared();
      else if (o == "fixed") cfg.order = EventOrder::fixed();
      else if (o == "per_individual") cfg.order = EventOrder::per_individual();
      else throw ConfigError("events.order must be shared, fixed or per_individual");
    }
  }
  if (j.contains("parameters")) detail::parse_parameters(j.at("parameters"), cfg, base);
  if (j.contains("run")) {
    const auto& r = j.at("run");
    detail::allow_keys(r, "run", {"horizon", "threads", "snapshot_every"});
    if (r.contains("horizon")) cfg.horizon = static_cast<TimeStep>(detail::count(r, "horizon", "run"));
    if (r.contains("threads")) cfg.threads = detail::count(r, "threads", "run");
    if (r.contains("snapshot_every")) cfg.snapshot_every = static_cast<TimeStep>(detail::count(r, "snapshot_every", "run"));
    if (cfg.threads == 0) throw ConfigError("run.threads must be at least 1");
  }
  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    detail::allow_keys(c, "calibration", {"targets", "max_evals", "horizon"});
    if (c.contains("targets")) {
      cfg.targets = read_targets_csv(detail::resolve(base, detail::get<std::string>(c, "targets", "calibration")));
    }
    if (c.contains("max_evals")) cfg.max_evals = detail::count(c, "max_evals", "calibration");
    if (c.contains("horizon")) cfg.calibration_horizon = static_cast<TimeStep>(detail::count(c, "horizon", "calibration"));
  }
  if (j.contains("interventions")) {
    const auto& iv = j.at("interventions");
    detail::allow_keys(iv, "interventions", {"scenarios", "replications", "horizon"});
    if (iv.contains("replications")) cfg.replications = detail::count(iv, "replications", "interventions");
    if (iv.contains("horizon")) cfg.compare_horizon = static_cast<TimeStep>(detail::count(iv, "horizon", "interventions"));
    if (iv.contains("scenarios")) {
      const auto& sc = iv.at("scenarios");
      if (!sc.is_object()) throw ConfigError("interventions.scenarios must be an object");
      for (const auto& [name, s] : sc.items()) cfg.scenarios.push_back(detail::parse_scenario(name, s));
    }
  }
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    if (!s.is_object()) throw ConfigError("sampling must be an object");
    // Either one design or several named ones.
    if (s.contains("invitees")) {
      cfg.sampling["sampling"] = detail::parse_sampling(s, "sampling", base, cfg.seed);
    } else {
      for (const auto& [name, d] : s.items()) {
        cfg.sampling[name] = detail::parse_sampling(d, "sampling." + name, base, cfg.seed);
      }
    }
  }
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    detail::allow_keys(o, "outputs", {"dir", "population"});
    detail::read(o, "dir", "outputs", cfg.out_dir);
    if (o.contains("population")) {
      const auto f = detail::get<std::string>(o, "population", "outputs");
      if (f != "csv" && f != "binary" && f != "both") throw ConfigError("outputs.population must be csv, binary or both");
      cfg.population_csv = f != "binary";
      cfg.population_binary = f != "csv";
    }
  }
  try {
    cfg.init.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("init: ") + e.what());
  }
  return cfg;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_config(const std::string& path) {
  return parse_config(read_file(path), std::filesystem::path(path).parent_path());
}

/// Start state: the population file if given, otherwise a synthetic one.
inline State make_start(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed_override = {}) {
  const auto d = health::make_health_domain();
  Population pop(d);
  if (cfg.population_file) {
    std::ifstream in(*cfg.population_file);
    if (!in) throw ConfigError("cannot open population file '" + *cfg.population_file + "'");
    pop = read_csv(d, in);
  } else {
    pop = health::init_population(cfg.init, seed_override.value_or(cfg.init_seed.value_or(cfg.seed)), d);
  }
  return {std::move(pop), health::make_theta(d, cfg.parameters)};
}

inline Simulator make_simulator(const ScenarioConfig& cfg, const SimulationDomain& d,
                                std::optional<std::uint64_t> seed_override = {}) {
  auto sim = health::health_simulator(d, seed_override.value_or(cfg.seed));
  sim.order = cfg.order;
  return sim;
}

}  // namespace msim::cli
