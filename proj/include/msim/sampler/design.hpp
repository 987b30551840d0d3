#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "msim/core/events.hpp"
#include "msim/engine/distributions.hpp"
#include "msim/sampler/sample.hpp"

namespace msim {

/// Without-replacement selection. Each eligible individual gets a key
/// u(id, t, tag); the n smallest keys are chosen, overall or per stratum.
struct SamplingDesign {
  enum class Kind { simple_random, stratified };

  Kind kind = Kind::simple_random;
  std::size_t n = 0;
  std::string strata_variable;
  std::map<double, std::size_t> per_stratum;  // stratum value -> sample size
  RowPredicate exclude;                       // applied before selection
  StreamTag tag{"sample-selection"};
  TimeStep t = 0;

  static SamplingDesign simple_random(std::size_t n, RowPredicate exclude = {}) {
    SamplingDesign d;
    d.n = n;
    d.exclude = std::move(exclude);
    return d;
  }
  static SamplingDesign stratified(std::string variable, std::map<double, std::size_t> sizes,
                                   RowPredicate exclude = {}) {
    SamplingDesign d;
    d.kind = Kind::stratified;
    d.strata_variable = std::move(variable);
    d.per_stratum = std::move(sizes);
    d.exclude = std::move(exclude);
    return d;
  }
};

/// Invitee ids in ascending order.
inline std::vector<IndividualId> draw_sample(const Population& pop, const SamplingDesign& design,
                                             const LatentDraws& draws) {
  std::optional<std::size_t> strata;
  if (design.kind == SamplingDesign::Kind::stratified) {
    strata = pop.domain().column(design.strata_variable);
  }
  // stratum value -> (key, id) of eligible rows
  std::map<double, std::vector<std::pair<double, IndividualId>>> pools;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    if (design.exclude && design.exclude(ConstRow(pop, r))) continue;
    const double stratum = strata ? pop.value(r, *strata) : 0.0;
    const IndividualId id = pop.id(r);
    pools[stratum].push_back({draws.uniform(id, design.t, design.tag, 0), id});
  }

  std::map<double, std::size_t> wanted;
  if (strata) {
    wanted = design.per_stratum;
  } else {
    wanted[0.0] = design.n;
  }
  std::vector<IndividualId> out;
  for (const auto& [stratum, n] : wanted) {
    auto& pool = pools[stratum];
    if (n > pool.size()) {
      throw DomainError("requested " + std::to_string(n) + " individuals from " +
                        (strata ? "stratum " + format_double(stratum) : std::string("population")) +
                        " with only " + std::to_string(pool.size()) + " eligible");
    }
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n), pool.end());
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[i].second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Logistic model of baseline non-participation:
///   logit P = ρ0 + ρ1·sex + ρ2·age + ρ3·bmi + ρ4·smoking + ρ5·waist
/// with sex coded 0 = man, 1 = woman.
struct NonParticipationModel {
  std::array<double, 6> rho{-9.48, -0.31, 0.11, -0.09, 0.69, 0.04};
  std::array<std::string, 5> columns{"sex", "age", "bmi", "smoking", "waist"};
  StreamTag tag{"nonparticipation"};
  TimeStep t = 0;
};

inline double nonparticipation_linear(const ConstRow& row, const NonParticipationModel& m) {
  double eta = m.rho[0];
  for (std::size_t k = 0; k < m.columns.size(); ++k) eta += m.rho[k + 1] * row.get(m.columns[k]);
  return eta;
}

inline double nonparticipation_prob(const ConstRow& row, const NonParticipationModel& m = {}) {
  return inv_logit(nonparticipation_linear(row, m));
}

/// Unit nonresponse: invitees drawn as non-participants have their whole row
/// masked. Covariates come from `baseline` (the population at invitation).
inline void apply_nonparticipation(Sample& s, const Population& baseline,
                                   const NonParticipationModel& m, const LatentDraws& draws) {
  for (std::size_t r = 0; r < s.size(); ++r) {
    const IndividualId id = s.id(r);
    auto row = baseline.find_row(id);
    if (!row) throw DomainError("invitee id " + std::to_string(id) + " not in population");
    const double p = nonparticipation_prob(ConstRow(baseline, *row), m);
    if (draws.uniform(id, m.t, m.tag, 0) < p) {
      s.set_participated(r, false);
      s.mask_row(r);
    }
  }
}

}  // namespace msim
