#pragma once

#include "msim/engine/simulator.hpp"
#include "msim/sampler/sample.hpp"

namespace msim {

/// Appends end-of-follow-up outcome columns from `final_pop` to a baseline
/// sample. Outcomes are observed for participants only; non-participants'
/// true outcomes stay in the population record.
inline Sample join_follow_up(const Sample& baseline, const Population& final_pop,
                             const std::vector<std::string>& outcomes) {
  auto vars = baseline.domain().variables();
  std::vector<std::size_t> src;
  for (const auto& name : outcomes) {
    if (baseline.domain().find_column(name)) {
      throw DomainError("outcome column '" + name + "' is also a baseline column");
    }
    src.push_back(final_pop.domain().column(name));
    vars.push_back(final_pop.domain().variable(src.back()));
  }
  const std::size_t m0 = baseline.width();
  Population data(make_domain(vars, {}));
  data.reserve(baseline.size());
  std::vector<double> row(vars.size());
  for (std::size_t r = 0; r < baseline.size(); ++r) {
    const IndividualId id = baseline.id(r);
    auto fr = final_pop.find_row(id);
    if (!fr) throw DomainError("invitee id " + std::to_string(id) + " missing after follow-up");
    for (std::size_t j = 0; j < m0; ++j) row[j] = baseline.unmasked_value(r, j);
    for (std::size_t k = 0; k < src.size(); ++k) row[m0 + k] = final_pop.value(*fr, src[k]);
    data.append_row(id, row);
  }
  Sample out(std::move(data));
  for (std::size_t r = 0; r < out.size(); ++r) {
    out.set_participated(r, baseline.participated(r));
    for (std::size_t j = 0; j < m0; ++j) {
      if (!baseline.observed(r, j)) out.mask(r, j);
    }
    if (!baseline.participated(r)) {
      for (std::size_t k = 0; k < src.size(); ++k) out.mask(r, m0 + k);
    }
  }
  return out;
}

struct FollowUp {
  Sample sample;
  SimulationRecord record;
};

/// Runs the population forward over `plan` and joins outcomes to the
/// baseline sample of invitees.
inline FollowUp follow_up(const Simulator& sim, const State& start, const Sample& baseline,
                          const std::vector<std::string>& outcomes, const RunPlan& plan,
                          const std::vector<StepHook>& hooks = {}) {
  auto rec = run(sim, start, plan, hooks);
  auto sample = join_follow_up(baseline, rec.final_state.population, outcomes);
  return {std::move(sample), std::move(rec)};
}

/// Events per 100 000 person-years.
inline double incidence_per_100k(double events, double person_years) {
  if (!(person_years > 0.0)) throw NumericError("person-years must be positive");
  return 1e5 * events / person_years;
}

}  // namespace msim
