#pragma once

#include <string>
#include <vector>

#include "msim/calibration/calibrate.hpp"
#include "msim/health/events.hpp"

namespace msim::health {

/// Yearly all-cause mortality by 10-year age group at the start of the run
/// (keys "30", "40", ...), then the stroke share of all deaths.
struct MortalityOutputs {
  std::vector<double> group_mortality;
  double stroke_share = 0.0;
  double deaths = 0.0;
};

inline MortalityOutputs mortality_outputs(const Population& start, const Population& final_pop,
                                          const std::vector<double>& group_starts) {
  MortalityOutputs out;
  std::vector<double> at_risk(group_starts.size(), 0.0), deaths(group_starts.size(), 0.0);
  const auto& sd = start.domain();
  const std::size_t s_age = sd.column("age"), s_alive = sd.column("alive");
  const auto& fd = final_pop.domain();
  const std::size_t f_alive = fd.column("alive"), f_stroke = fd.column("dead_stroke");
  double stroke_deaths = 0.0;
  for (std::size_t r = 0; r < start.size(); ++r) {
    if (start.value(r, s_alive) == 0.0) continue;
    const auto fr = final_pop.find_row(start.id(r));
    if (!fr) throw DomainError("id missing from the final population");
    const bool died = final_pop.value(*fr, f_alive) == 0.0;
    if (died) {
      out.deaths += 1.0;
      stroke_deaths += final_pop.value(*fr, f_stroke);
    }
    const double age = start.value(r, s_age);
    for (std::size_t g = group_starts.size(); g-- > 0;) {
      if (age >= group_starts[g]) {
        at_risk[g] += 1.0;
        deaths[g] += died ? 1.0 : 0.0;
        break;
      }
    }
  }
  for (std::size_t g = 0; g < group_starts.size(); ++g) {
    out.group_mortality.push_back(at_risk[g] > 0.0 ? deaths[g] / at_risk[g] : 0.0);
  }
  out.stroke_share = out.deaths > 0.0 ? stroke_deaths / out.deaths : 0.0;
  return out;
}

/// Yearly mortality by age group and a stroke-death share of 7.5%, with the
/// weights 1 below age 80, 100 from 80 on, and 2000 on the share.
inline TargetTable default_mortality_targets() {
  TargetTable t;
  const std::vector<std::pair<std::string, double>> m{
      {"30", 0.0008}, {"40", 0.0018}, {"50", 0.0045}, {"60", 0.0105},
      {"70", 0.025},  {"80", 0.075},  {"90", 0.22}};
  for (const auto& [k, v] : m) t.series.push_back({k, v, std::stod(k) < 80 ? 1.0 : 100.0});
  t.scalars.push_back({"stroke_share", 0.075, 2000.0});
  return t;
}

/// Age groups named by their lower bound; the last one is open-ended.
inline std::vector<double> group_starts(const TargetTable& targets) {
  std::vector<double> g;
  for (const auto& e : targets.series) {
    double a;
    try {
      a = parse_double(e.key);
    } catch (const DomainError&) {
      throw ConfigError("mortality target key '" + e.key + "' is not an age");
    }
    if (!g.empty() && !(a > g.back())) throw ConfigError("mortality target ages must increase");
    g.push_back(a);
  }
  return g;
}

inline OutputFunction mortality_output_function(const TargetTable& targets) {
  const auto groups = group_starts(targets);
  if (targets.scalars.size() != 1 || targets.scalars[0].key != "stroke_share") {
    throw ConfigError("mortality targets need exactly one scalar, 'stroke_share'");
  }
  return [groups](const SimulationRecord& rec, const State& start) {
    auto o = mortality_outputs(start.population, rec.final_state.population, groups);
    auto v = o.group_mortality;
    v.push_back(o.stroke_share);
    return v;
  };
}

/// Calibration of background mortality shape and scale and the early
/// post-stroke survival logit α0 against `targets` over `horizon` days.
inline CalibrationProblem mortality_calibration_problem(const Simulator& sim, const State& start,
                                                        TargetTable targets, TimeStep horizon = 365) {
  targets.validate();
  for (const auto& e : targets.series) {
    if (!(e.value > 0.0)) throw DomainError("mortality target '" + e.key + "' must be positive");
  }
  CalibrationProblem p{sim, start};
  p.plan = RunPlan(horizon);
  p.free = {{"death_shape", 0.1, 50.0}, {"death_scale", 50.0, 5000.0}, {"alpha0", -20.0, 20.0}};
  p.output = mortality_output_function(targets);
  p.targets = std::move(targets);
  return p;
}

}  // namespace msim::health
