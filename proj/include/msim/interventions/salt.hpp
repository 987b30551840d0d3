#pragma once

#include "msim/interventions/intervention.hpp"

namespace msim {

struct SaltIndustryOptions {
  std::string sbp = "sbp";
  double sbp_change = -0.97;  // mmHg per 1 g/day lower sodium intake
};

struct SaltAdviceOptions {
  std::string sbp = "sbp";
  std::string complier = "salt_advice";  // set to 1 for compliers; optional column
  double threshold = 140.0;
  double compliance = 0.5;
  double sbp_change = -2.0;
};

/// Lower SBP of every living individual by a fixed amount.
inline ManipulationEvent salt_industry_event(const SimulationDomain& domain,
                                             SaltIndustryOptions opt = {}) {
  const std::size_t sbp = domain.column(opt.sbp);
  const auto alive = domain.alive_column();
  return {"salt-industry", "reduced sodium in processed food", {}, {opt.sbp},
          [sbp, alive, opt](Row& r, const ParameterVector&, const RowDraws&) {
            if (!alive || r[*alive] != 0.0) r.set(sbp, r[sbp] + opt.sbp_change);
          }};
}

/// Among living individuals at or above the SBP threshold, a Bernoulli
/// complier subset (stream "salt-advice") lowers SBP and is flagged.
inline ManipulationEvent salt_advice_event(const SimulationDomain& domain,
                                           SaltAdviceOptions opt = {}) {
  const std::size_t sbp = domain.column(opt.sbp);
  const auto flag = domain.find_column(opt.complier);
  const auto alive = domain.alive_column();
  std::vector<std::string> writes{opt.sbp};
  if (flag) writes.push_back(opt.complier);
  return {"salt-advice", "advice to stop adding salt", {}, writes,
          [sbp, flag, alive, opt](Row& r, const ParameterVector&, const RowDraws& psi) {
            if ((alive && r[*alive] == 0.0) || r[sbp] < opt.threshold) return;
            if (psi.uniform() >= opt.compliance) return;
            r.set(sbp, r[sbp] + opt.sbp_change);
            if (flag) r.set(*flag, 1.0);
          }};
}

inline State salt_industry(const State& s, SaltIndustryOptions opt = {}) {
  const auto& d = s.population.domain();
  return {apply_manipulation(salt_industry_event(d, opt), s.population, s.theta, LatentDraws(0), 0),
          s.theta};
}

inline State salt_advice(const State& s, const LatentDraws& draws, TimeStep t = 0,
                         SaltAdviceOptions opt = {}) {
  const auto& d = s.population.domain();
  return {apply_manipulation(salt_advice_event(d, opt), s.population, s.theta, draws, t), s.theta};
}

}  // namespace msim
