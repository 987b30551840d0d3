#pragma once

#include <unordered_set>

#include "msim/health/analysis.hpp"
#include "msim/health/events.hpp"
#include "msim/interventions/salt.hpp"
#include "msim/sampler/design.hpp"
#include "msim/sampler/follow_up.hpp"

namespace msim::health {

/// Baseline examination columns of a survey sample.
inline std::vector<std::string> survey_columns() {
  return {"sex", "age", "smoking", "bmi", "waist", "cholesterol", "hdl", "sbp",
          "parents_stroke", "bp_medication", "high_glucose", "diabetes"};
}

/// Invitation of a simple random sample of stroke-free individuals at
/// baseline, optional unit nonresponse, and stroke follow-up.
struct SurveyDesign {
  std::size_t invitees = 0;
  bool nonresponse = true;
  NonParticipationModel nonparticipation;
  TimeStep horizon = 3650;
};

struct SurveyResult {
  Sample sample;         // invitees with new_stroke and years_at_risk; non-participants masked
  Population outcomes;   // stroke_outcome_table of the whole population
  SimulationRecord record;
  Incidence participants, invitees, population;
};

inline Incidence incidence_of_ids(const Population& outcomes, const std::unordered_set<IndividualId>& ids) {
  return stroke_incidence(outcomes, [&](const ConstRow& r) { return ids.count(r.id()) > 0; });
}

/// Survey draws use `sampling_seed`; the population follow-up uses the
/// simulator's own seed.
inline SurveyResult run_survey(const Simulator& sim, const State& start, const SurveyDesign& design,
                               std::uint64_t sampling_seed, std::size_t partitions = 1) {
  const LatentDraws draws(sampling_seed);
  const auto& pop = start.population;
  const std::size_t stroke = pop.domain().column("stroke");
  auto ids = draw_sample(pop, SamplingDesign::simple_random(design.invitees, [stroke](const ConstRow& r) {
                           return r[stroke] != 0.0;
                         }),
                         draws);
  Sample baseline = make_sample(pop, ids, survey_columns());
  if (design.nonresponse) apply_nonparticipation(baseline, pop, design.nonparticipation, draws);

  auto record = run(sim, start, RunPlan(design.horizon, {}, partitions));
  auto outcomes = stroke_outcome_table(pop, record.final_state.population, design.horizon);
  auto sample = join_follow_up(baseline, outcomes, {"new_stroke", "years_at_risk"});

  std::unordered_set<IndividualId> invited(ids.begin(), ids.end()), participated;
  for (std::size_t r = 0; r < sample.size(); ++r) {
    if (sample.participated(r)) participated.insert(sample.id(r));
  }
  SurveyResult out{std::move(sample), std::move(outcomes), std::move(record), {}, {}, {}};
  out.participants = incidence_of_ids(out.outcomes, participated);
  out.invitees = incidence_of_ids(out.outcomes, invited);
  out.population = stroke_incidence(out.outcomes);
  return out;
}

/// Stroke risk model refitted on three data sets, per sex: participants
/// only (A), all invitees (B) and the whole population (C).
struct OddsRatioComparison {
  std::array<std::optional<LogisticFit>, 2> participants, invitees, population;  // [sex]
  std::array<std::string, 2> participant_errors, invitee_errors;  // why a fit is missing
};

inline OddsRatioComparison compare_odds_ratios(const SurveyResult& s) {
  OddsRatioComparison out;
  const auto covs = stroke_covariates();
  std::unordered_set<IndividualId> invited;
  for (std::size_t r = 0; r < s.sample.size(); ++r) invited.insert(s.sample.id(r));
  for (int sex = 0; sex < 2; ++sex) {
    const double code = sex;
    auto of_sex = [code](const ConstRow& r) { return r.get("sex") == code; };
    out.population[sex] = fit_logistic(s.outcomes, "new_stroke", covs, of_sex);
    // Small samples may be separated or lack events; report instead of failing.
    try {
      out.participants[sex] = fit_logistic(s.sample, "new_stroke", covs, of_sex);
    } catch (const Error& e) {
      out.participant_errors[sex] = e.what();
    }
    try {
      out.invitees[sex] = fit_logistic(s.outcomes, "new_stroke", covs, [&](const ConstRow& r) {
        return of_sex(r) && invited.count(r.id()) > 0;
      });
    } catch (const Error& e) {
      out.invitee_errors[sex] = e.what();
    }
  }
  return out;
}

/// sex,term,true_OR,then OR/CI-low/CI-high for A, B and C; "NA" for a
/// missing fit.
inline void write_odds_ratio_comparison(const OddsRatioComparison& c, const HealthParameters& truth,
                                        std::ostream& os) {
  os << "sex,term,true_OR,A_OR,A_CI_low,A_CI_high,B_OR,B_CI_low,B_CI_high,C_OR,C_CI_low,C_CI_high\n";
  const auto covs = stroke_covariates();
  for (int sex = 0; sex < 2; ++sex) {
    const auto& b = sex ? truth.risk.stroke_f : truth.risk.stroke_m;
    for (std::size_t k = 0; k < covs.size(); ++k) {
      os << (sex ? "women" : "men") << ',' << covs[k] << ',' << format_double(std::exp(b[k]));
      for (const auto* fit : {&c.participants[sex], &c.invitees[sex], &c.population[sex]}) {
        if (*fit) {
          const auto i = (*fit)->index(covs[k]);
          os << ',' << format_double((*fit)->odds_ratio(i)) << ',' << format_double((*fit)->ci_low(i)) << ','
             << format_double((*fit)->ci_high(i));
        } else {
          os << ",NA,NA,NA";
        }
      }
      os << '\n';
    }
  }
}

/// Salt policies applied once at the start of a run.
enum class SaltPolicy { none, industry, advice };

inline SaltPolicy parse_salt_policy(std::string_view name) {
  if (name == "baseline" || name == "none") return SaltPolicy::none;
  if (name == "industry") return SaltPolicy::industry;
  if (name == "advice") return SaltPolicy::advice;
  throw ConfigError("unknown salt policy '" + std::string(name) + "'");
}

inline Scenario salt_scenario(const SimulationDomain& d, std::string name, SaltPolicy policy, TimeStep horizon,
                              SaltIndustryOptions industry = {}, SaltAdviceOptions advice = {}) {
  Scenario sc{std::move(name), RunPlan(horizon), {}};
  if (policy == SaltPolicy::industry) {
    sc.interventions.push_back(PopulationChange{0, {salt_industry_event(d, industry)}, {}});
  } else if (policy == SaltPolicy::advice) {
    sc.interventions.push_back(PopulationChange{0, {salt_advice_event(d, advice)}, {}});
  }
  return sc;
}

inline double total_new_strokes(const SimulationRecord& rec) {
  double s = 0.0;
  for (double v : rec.tracker("new_strokes").values) s += v;
  return s;
}

}  // namespace msim::health
