#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "msim/core/state.hpp"
#include "msim/engine/distributions.hpp"

namespace msim::health {

// Status variables. Day columns hold the step at which the event happened;
// prior strokes at initialisation get a negative stroke_day.
inline const std::vector<VariableSpec>& variables() {
  static const std::vector<VariableSpec> v{
      {"sex", ValueKind::binary},  // 0 = man, 1 = woman
      {"age"},
      {"smoking", ValueKind::binary},
      {"bmi"},
      {"waist"},
      {"cholesterol"},
      {"hdl"},
      {"sbp"},
      {"parents_stroke", ValueKind::binary},
      {"bp_medication", ValueKind::binary},
      {"high_glucose", ValueKind::binary},
      {"diabetes", ValueKind::binary},
      {"diabetes_day", ValueKind::integer},
      {"stroke", ValueKind::binary},
      {"stroke_day", ValueKind::integer},
      {"alive", ValueKind::binary},
      {"death_day", ValueKind::integer},
      {"dead_stroke", ValueKind::binary},
      {"dead_other", ValueKind::binary},
      {"salt_advice", ValueKind::binary},
  };
  return v;
}

/// Covariates of the stroke model, in coefficient order.
inline const std::array<std::string, 6>& stroke_terms() {
  static const std::array<std::string, 6> t{"age", "smoking", "sbp", "hdl", "diabetes", "parents_stroke"};
  return t;
}

/// Covariates of the diabetes model, in coefficient order.
inline const std::array<std::string, 5>& diabetes_terms() {
  static const std::array<std::string, 5> t{"age", "bmi", "waist", "bp_medication", "high_glucose"};
  return t;
}

/// Sex-specific stroke models, a common diabetes model, both on the 10-year
/// logit scale.
struct RiskModelCoefficients {
  double stroke_m_intercept = -12.995;  // tuned to yearly incidence near 723 per 100 000
  std::array<double, 6> stroke_m{std::log(1.12), std::log(1.65), std::log(1.02),
                                 std::log(0.64), std::log(2.41), std::log(1.34)};
  double stroke_f_intercept = -7.767;
  std::array<double, 6> stroke_f{std::log(1.07), std::log(1.52), std::log(1.01),
                                 std::log(0.47), std::log(3.45), std::log(1.73)};
  // Placeholder coefficients of plausible size; the intercept gives about 3%
  // ten-year incidence among the diabetes-free.
  double diabetes_intercept = -11.6;
  std::array<double, 5> diabetes{0.04, 0.08, 0.03, 0.5, 1.6};
};

/// Post-stroke and background mortality.
///   days 0..27 after a stroke: daily survival invlogit(alpha0)
///   later: daily survival invlogit(alpha1 + alpha2 exp(alpha3 (t_i − 27)))
///   stroke-free: daily death 1 − exp(−(age / scale)^shape)
struct MortalityParameters {
  // alpha0, shape and scale from the mortality calibration; alpha1..3 from
  // the late-survival fit.
  double alpha0 = 4.943232462;
  double alpha1 = 8.194347739;
  double alpha2 = -4.356516336;
  double alpha3 = -0.05664886645;
  double death_shape = 5.901595631;
  double death_scale = 347.5760117;
};

struct HealthParameters {
  RiskModelCoefficients risk;
  MortalityParameters mortality;
};

inline std::map<std::string, double> to_map(const HealthParameters& p) {
  std::map<std::string, double> m;
  const auto& st = stroke_terms();
  m["stroke_m_intercept"] = p.risk.stroke_m_intercept;
  m["stroke_f_intercept"] = p.risk.stroke_f_intercept;
  for (std::size_t k = 0; k < st.size(); ++k) {
    m["stroke_m_" + st[k]] = p.risk.stroke_m[k];
    m["stroke_f_" + st[k]] = p.risk.stroke_f[k];
  }
  const auto& dt = diabetes_terms();
  m["diabetes_intercept"] = p.risk.diabetes_intercept;
  for (std::size_t k = 0; k < dt.size(); ++k) m["diabetes_" + dt[k]] = p.risk.diabetes[k];
  m["alpha0"] = p.mortality.alpha0;
  m["alpha1"] = p.mortality.alpha1;
  m["alpha2"] = p.mortality.alpha2;
  m["alpha3"] = p.mortality.alpha3;
  m["death_shape"] = p.mortality.death_shape;
  m["death_scale"] = p.mortality.death_scale;
  return m;
}

inline HealthParameters from_theta(const ParameterVector& th) {
  HealthParameters p;
  const auto& st = stroke_terms();
  p.risk.stroke_m_intercept = th.at("stroke_m_intercept");
  p.risk.stroke_f_intercept = th.at("stroke_f_intercept");
  for (std::size_t k = 0; k < st.size(); ++k) {
    p.risk.stroke_m[k] = th.at("stroke_m_" + st[k]);
    p.risk.stroke_f[k] = th.at("stroke_f_" + st[k]);
  }
  const auto& dt = diabetes_terms();
  p.risk.diabetes_intercept = th.at("diabetes_intercept");
  for (std::size_t k = 0; k < dt.size(); ++k) p.risk.diabetes[k] = th.at("diabetes_" + dt[k]);
  p.mortality.alpha0 = th.at("alpha0");
  p.mortality.alpha1 = th.at("alpha1");
  p.mortality.alpha2 = th.at("alpha2");
  p.mortality.alpha3 = th.at("alpha3");
  p.mortality.death_shape = th.at("death_shape");
  p.mortality.death_scale = th.at("death_scale");
  return p;
}

inline DomainPtr make_health_domain() {
  std::vector<std::string> params;
  for (const auto& [name, v] : to_map(HealthParameters{})) params.push_back(name);
  return make_domain(variables(), params, "alive");
}

inline ParameterVector make_theta(const DomainPtr& d, const HealthParameters& p = {}) {
  return ParameterVector(d, to_map(p));
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// One-day event probability from a 10-year probability under a constant
/// Poisson intensity: τ = −log(1 − p10) / 3650, p1 = 1 − exp(−τ).
inline double ten_year_to_daily(double p10) {
  if (!(p10 >= 0.0 && p10 < 1.0)) {
    throw NumericError("ten-year probability must lie in [0, 1)");
  }
  const double tau = -std::log1p(-p10) / 3650.0;
  return -std::expm1(-tau);
}

/// Same conversion from the 10-year logit η, exact for large |η|:
/// −log(1 − invlogit(η)) = softplus(η).
inline double daily_from_logit(double eta) {
  return -std::expm1(-softplus(eta) / 3650.0);
}

/// Bernoulli(daily_from_logit(η)) decided by u. Since p1 ≤ τ ≤
/// (max(η, 0) + log 2) / 3650, large u is rejected without transcendental
/// calls.
inline bool daily_event_fires(double eta, double u) {
  if (u >= (std::max(eta, 0.0) + 0.6931471805599453) / 3650.0) return false;
  return u < daily_from_logit(eta);
}

/// Daily survival probability after a stroke, t_i days since the stroke
/// (t_i = 0 on the first day after it).
inline double stroke_daily_survival(double t_i, const MortalityParameters& m) {
  if (t_i < 28) return inv_logit(m.alpha0);
  return inv_logit(m.alpha1 + m.alpha2 * std::exp(m.alpha3 * (t_i - 27)));
}

/// Daily non-stroke death probability at age `age` (years).
inline double background_death_prob(double age, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw NumericError("background mortality shape and scale must be positive");
  }
  if (age <= 0.0) return 0.0;
  return -std::expm1(-std::pow(age / scale, shape));
}

/// α0 such that 28 days of constant daily survival give cumulative death p28.
inline double alpha0_for_28_day_fatality(double p28) {
  const double q = -std::expm1(std::log1p(-p28) / 28.0);
  return logit(1.0 - q);
}

}  // namespace msim::health
