#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "msim/engine/simulator.hpp"

namespace msim {

/// Events applied once, after the transition of step `at`.
struct PopulationChange {
  TimeStep at = 0;
  std::vector<ManipulationEvent> manipulations;
  std::vector<AccumulationEvent> accumulations;
};

/// Parameter reconfiguration at step `at`.
struct PolicyChange {
  TimeStep at = 0;
  std::map<std::string, double> assignments;
};

/// Forces `variable` to `value(row)` on rows matching `target`, re-asserted
/// after every step from `from` onward. The target predicate is evaluated
/// afresh each step, so rows entering the target set later are also forced.
struct DoIntervention {
  TimeStep from = 0;
  std::string variable;
  std::function<double(const ConstRow&)> value;
  RowPredicate target;  // empty: every row

  static std::function<double(const ConstRow&)> constant(double v) {
    return [v](const ConstRow&) { return v; };
  }
};

using Intervention = std::variant<PopulationChange, PolicyChange, DoIntervention>;

struct Scenario {
  std::string name;
  RunPlan plan;
  std::vector<Intervention> interventions;
};

namespace detail {

inline void apply_population_change(const PopulationChange& pc, Population& pop,
                                    ParameterVector& theta, const LatentDraws& draws, TimeStep t,
                                    bool owns_new_rows) {
  if (owns_new_rows) {
    for (const auto& acc : pc.accumulations) accumulate_in_place(acc, pop, theta, draws, t);
  }
  if (pc.manipulations.empty()) return;
  EventSet set{pc.manipulations, {}};
  BoundEvents bound(set, pop.domain());
  manipulation_phase(pop, 0, pop.size(), theta, draws, t, bound, EventOrder::fixed());
}

inline void apply_do(const DoIntervention& d, Population& pop) {
  const std::size_t col = pop.domain().column(d.variable);
  if (!d.value) throw DomainError("do-intervention on '" + d.variable + "' has no value");
  std::vector<std::pair<std::size_t, double>> writes;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    ConstRow row(pop, r);
    if (d.target && !d.target(row)) continue;
    const double v = d.value(row);
    if (!std::isfinite(v)) {
      throw EventError("do-intervention produced a non-finite value for '" + d.variable + "'",
                       "do(" + d.variable + ")", 0, pop.id(r));
    }
    if (std::bit_cast<std::uint64_t>(v) != std::bit_cast<std::uint64_t>(pop.value(r, col))) {
      writes.push_back({r, v});
    }
  }
  if (writes.empty()) return;
  auto column = pop.mutable_column(col);
  for (auto [r, v] : writes) column[r] = v;
}

}  // namespace detail

/// Checks an intervention against a domain and horizon.
inline void validate(const Intervention& iv, const SimulationDomain& domain, TimeStep horizon) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PopulationChange>) {
          if (x.at < 0 || x.at > horizon) throw DomainError("population change outside horizon");
          bind_all(x.manipulations, domain);
        } else if constexpr (std::is_same_v<T, PolicyChange>) {
          if (x.at < 0 || x.at > horizon) throw DomainError("policy change outside horizon");
          for (const auto& [name, v] : x.assignments) {
            domain.parameter(name);
            if (!std::isfinite(v)) throw DomainError("policy value for '" + name + "' is not finite");
          }
        } else {
          if (x.from < 0 || x.from > horizon) throw DomainError("do-intervention outside horizon");
          domain.column(x.variable);
        }
      },
      iv);
}

/// Applies one intervention to a state at step t, once.
inline State intervene(const State& state, const Intervention& iv, const LatentDraws& draws,
                       TimeStep t) {
  State next = state;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PopulationChange>) {
          detail::apply_population_change(x, next.population, next.theta, draws, t, true);
        } else if constexpr (std::is_same_v<T, PolicyChange>) {
          auto m = next.theta.to_map();
          for (const auto& [name, v] : x.assignments) {
            next.population.domain().parameter(name);
            m[name] = v;
          }
          next = configure(next, m);
        } else {
          detail::apply_do(x, next.population);
        }
      },
      iv);
  return next;
}

/// Step hook that fires an intervention on its schedule inside run().
inline StepHook to_hook(const Intervention& iv) {
  return std::visit(
      [](const auto& x) -> StepHook {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PopulationChange>) {
          return {x.at, x.at, [x](StepContext& c) {
                    detail::apply_population_change(x, c.population, c.theta, c.draws, c.t,
                                                    c.owns_new_rows);
                  }};
        } else if constexpr (std::is_same_v<T, PolicyChange>) {
          return {x.at, x.at, [x](StepContext& c) {
                    for (const auto& [name, v] : x.assignments) c.theta = c.theta.with(name, v);
                  }};
        } else {
          return {x.from, std::numeric_limits<TimeStep>::max(),
                  [x](StepContext& c) { detail::apply_do(x, c.population); }};
        }
      },
      iv);
}

inline SimulationRecord run_scenario(const Simulator& sim, const State& start, const Scenario& sc) {
  std::vector<StepHook> hooks;
  for (const auto& iv : sc.interventions) {
    validate(iv, start.population.domain(), sc.plan.horizon);
    hooks.push_back(to_hook(iv));
  }
  return run(sim, start, sc.plan, hooks);
}

/// Runs every scenario from the same start state and master seed, so all
/// runs see identical latent draws and differ only through interventions.
inline std::vector<SimulationRecord> run_counterfactuals(const Simulator& sim, const State& start,
                                                         const std::vector<Scenario>& scenarios) {
  std::vector<SimulationRecord> out;
  out.reserve(scenarios.size());
  for (const auto& sc : scenarios) out.push_back(run_scenario(sim, start, sc));
  return out;
}

}  // namespace msim
