#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "msim/engine/distributions.hpp"
#include "msim/health/model.hpp"

namespace msim::health {

/// Continuous risk factors drawn jointly, in this order.
inline const std::array<std::string, 5>& risk_factor_names() {
  static const std::array<std::string, 5> n{"bmi", "waist", "cholesterol", "hdl", "sbp"};
  return n;
}

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

/// x = (λz + 1)^(1/λ), or exp(z) for λ = 0. NaN when λz + 1 ≤ 0.
inline double inverse_box_cox(double z, double lambda) {
  if (lambda == 0.0) return std::exp(z);
  const double b = lambda * z + 1.0;
  if (!(b > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::pow(b, 1.0 / lambda);
}

inline double box_cox(double x, double lambda) {
  if (lambda == 0.0) return std::log(x);
  return (std::pow(x, lambda) - 1.0) / lambda;
}

/// Multivariate normal on the Box-Cox scale for one sex × age group × smoking
/// subgroup.
struct RiskFactorGroup {
  Vector5 lambda = Vector5::Zero();
  Vector5 mean = Vector5::Zero();
  Matrix5 cov = Matrix5::Zero();
};

struct Range {
  double lo, hi;
};

struct LogisticCovariate {
  std::string column;
  double coefficient;
};

struct LogisticRule {
  double intercept = 0.0;
  std::vector<LogisticCovariate> terms;
};

struct InitConfig {
  std::size_t n = 0;
  double woman_fraction = 0.5;
  // Age groups [edges[g], edges[g+1]); ages are uniform within a group.
  std::vector<double> age_edges{30, 40, 50, 60, 70, 80, 90, 100};
  std::array<std::vector<double>, 2> age_weights;  // [sex][group], any scale
  std::array<std::vector<double>, 2> smoking;      // [sex][group] prevalence
  std::vector<RiskFactorGroup> groups;             // index group_index(sex, g, smoking)
  std::array<Range, 5> ranges{{{15, 60}, {55, 160}, {2, 12}, {0.3, 4}, {80, 250}}};
  int max_redraws = 100;
  double parents_stroke = 0.09;
  LogisticRule bp_medication{-10.0, {{"age", 0.06}, {"sbp", 0.035}}};
  LogisticRule high_glucose{-8.0, {{"age", 0.03}, {"bmi", 0.15}}};
  std::array<double, 2> diabetes_prevalence{0.15, 0.10};  // men, women
  RiskModelCoefficients risk;  // diabetes model used to rank baseline risk
  std::vector<double> prior_stroke;  // per age group
  dist::Weibull stroke_survival{0.5, 1400.0};  // days since a prior stroke

  std::size_t age_groups() const { return age_edges.size() - 1; }
  std::size_t group_index(int sex, std::size_t g, int smoker) const {
    return (static_cast<std::size_t>(sex) * age_groups() + g) * 2 + static_cast<std::size_t>(smoker);
  }
  void validate() const;
};

namespace detail {

inline bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

/// Natural-scale median and SD of each risk factor for a subgroup.
struct Marginals {
  std::array<double, 5> median, sd;
};

inline Marginals default_marginals(int sex, double age_mid, int smoker) {
  const double a = age_mid - 30.0;
  Marginals m;
  if (sex == 0) {
    m.median = {25.8 + 0.05 * a, 93.0 + 0.15 * a, 5.2 + 0.01 * a, 1.30, 124.0 + 0.45 * a};
    m.sd = {3.9, 10.5, 1.0, 0.32, 14.0 + 0.12 * a};
  } else {
    m.median = {24.5 + 0.07 * a, 82.0 + 0.20 * a, 4.9 + 0.02 * a, 1.60, 114.0 + 0.65 * a};
    m.sd = {4.8, 12.0, 0.95, 0.37, 13.0 + 0.20 * a};
  }
  if (smoker) {
    m.median[0] -= 0.6;
    m.median[3] -= 0.08;
    m.median[4] -= 1.0;
  }
  return m;
}

inline Matrix5 default_correlation() {
  Matrix5 r;
  // bmi, waist, cholesterol, hdl, sbp
  r << 1.00, 0.85, 0.10, -0.30, 0.25,
       0.85, 1.00, 0.15, -0.35, 0.25,
       0.10, 0.15, 1.00, 0.15, 0.15,
      -0.30, -0.35, 0.15, 1.00, 0.00,
       0.25, 0.25, 0.15, 0.00, 1.00;
  return r;
}

}  // namespace detail

/// Subgroup on the Box-Cox scale from natural-scale medians and SDs: the
/// median maps exactly, the SD by the delta method (sd_z = sd_x m^(λ-1)).
inline RiskFactorGroup box_cox_group(const std::array<double, 5>& median,
                                     const std::array<double, 5>& sd, const Vector5& lambda,
                                     const Matrix5& correlation) {
  RiskFactorGroup g;
  g.lambda = lambda;
  Vector5 s;
  for (int k = 0; k < 5; ++k) {
    g.mean[k] = box_cox(median[k], lambda[k]);
    s[k] = sd[k] * std::pow(median[k], lambda[k] - 1.0);
  }
  g.cov = s.asDiagonal() * correlation * s.asDiagonal();
  return g;
}

/// Synthetic stand-in for a Finnish adult population aged 30 to 99.
inline InitConfig default_init_config(std::size_t n) {
  InitConfig c;
  c.n = n;
  c.age_weights[0] = {360, 335, 360, 370, 230, 95, 15};
  c.age_weights[1] = {345, 325, 365, 395, 290, 165, 45};
  c.smoking[0] = {0.25, 0.24, 0.22, 0.17, 0.10, 0.06, 0.04};
  c.smoking[1] = {0.17, 0.18, 0.17, 0.12, 0.06, 0.03, 0.02};
  c.prior_stroke = {0.002, 0.005, 0.015, 0.035, 0.07, 0.11, 0.13};
  Vector5 lambda;
  lambda << -0.5, 0.0, 0.5, 0.0, -0.5;
  const Matrix5 corr = detail::default_correlation();
  c.groups.resize(2 * c.age_groups() * 2);
  for (int sex = 0; sex < 2; ++sex) {
    for (std::size_t g = 0; g < c.age_groups(); ++g) {
      const double mid = 0.5 * (c.age_edges[g] + c.age_edges[g + 1]);
      for (int smoker = 0; smoker < 2; ++smoker) {
        auto m = detail::default_marginals(sex, mid, smoker);
        c.groups[c.group_index(sex, g, smoker)] = box_cox_group(m.median, m.sd, lambda, corr);
      }
    }
  }
  return c;
}

inline void InitConfig::validate() const {
  const std::size_t G = age_edges.size() < 2 ? 0 : age_groups();
  if (G == 0) throw DomainError("init: at least one age group is required");
  if (age_edges.front() < 30.0) throw DomainError("init: ages must be at least 30");
  for (std::size_t g = 0; g < G; ++g) {
    if (!(age_edges[g] <= age_edges[g + 1])) throw DomainError("init: age edges must be non-decreasing");
  }
  if (!detail::is_probability(woman_fraction)) throw DomainError("init: woman_fraction outside [0,1]");
  for (int sex = 0; sex < 2; ++sex) {
    if (age_weights[sex].size() != G) throw DomainError("init: age_weights size differs from age groups");
    if (smoking[sex].size() != G) throw DomainError("init: smoking size differs from age groups");
    double total = 0.0;
    for (double w : age_weights[sex]) {
      if (!(w >= 0.0)) throw DomainError("init: negative age weight");
      total += w;
    }
    if (!(total > 0.0)) throw DomainError("init: age weights sum to zero");
    for (double p : smoking[sex]) {
      if (!detail::is_probability(p)) throw DomainError("init: smoking prevalence outside [0,1]");
    }
    if (!detail::is_probability(diabetes_prevalence[sex])) {
      throw DomainError("init: diabetes prevalence outside [0,1]");
    }
  }
  if (prior_stroke.size() != G) throw DomainError("init: prior_stroke size differs from age groups");
  for (double p : prior_stroke) {
    if (!detail::is_probability(p)) throw DomainError("init: prior stroke prevalence outside [0,1]");
  }
  if (!detail::is_probability(parents_stroke)) throw DomainError("init: parents_stroke outside [0,1]");
  if (groups.size() != 4 * G) {
    throw DomainError("init: expected " + std::to_string(4 * G) + " risk-factor subgroups");
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    if (!g.cov.allFinite() || !g.mean.allFinite() || !g.lambda.allFinite()) {
      throw DomainError("init: non-finite risk-factor subgroup " + std::to_string(i));
    }
    if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + g.cov.cwiseAbs().maxCoeff())) {
      throw DomainError("init: covariance of subgroup " + std::to_string(i) + " is not symmetric");
    }
  }
  for (const auto& r : ranges) {
    if (!(r.lo <= r.hi)) throw DomainError("init: empty risk-factor range");
  }
  if (!(stroke_survival.shape > 0.0 && stroke_survival.scale > 0.0)) {
    throw DomainError("init: stroke survival Weibull must have positive shape and scale");
  }
}

namespace detail {

/// Lower Cholesky factor; the zero matrix (a point mass) is accepted.
inline Matrix5 covariance_factor(const Matrix5& cov, std::size_t group) {
  if (cov.isZero(0.0)) return Matrix5::Zero();
  Eigen::LLT<Matrix5> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw DomainError("init: covariance of subgroup " + std::to_string(group) +
                      " is not positive definite");
  }
  return llt.matrixL();
}

inline double logistic_rule(const LogisticRule& rule, const ConstRow& row) {
  double eta = rule.intercept;
  for (const auto& t : rule.terms) eta += t.coefficient * row.get(t.column);
  return inv_logit(eta);
}

/// Smallest c with mean(min(1, c r)) = target, by bisection.
inline double prevalence_scale(const std::vector<double>& r, double target) {
  if (r.empty() || target <= 0.0) return 0.0;
  auto mean_at = [&](double c) {
    double s = 0.0;
    for (double x : r) s += std::min(1.0, c * x);
    return s / static_cast<double>(r.size());
  };
  double lo = 0.0, hi = 1.0;
  while (mean_at(hi) < target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(mid) < target ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace detail

/// Synthetic baseline population with ids 0..n-1. Draws are keyed by
/// (seed, id, 0, tag); only the diabetes scaling looks at the whole population.
inline Population init_population(const InitConfig& cfg, std::uint64_t seed,
                                  const DomainPtr& domain = make_health_domain()) {
  cfg.validate();
  const LatentDraws draws(seed);
  const std::size_t G = cfg.age_groups();
  std::vector<Matrix5> factors;
  for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
    factors.push_back(detail::covariance_factor(cfg.groups[i].cov, i));
  }
  std::array<std::vector<double>, 2> cum;
  for (int sex = 0; sex < 2; ++sex) {
    double s = 0.0;
    for (double w : cfg.age_weights[sex]) cum[sex].push_back(s += w);
    for (double& x : cum[sex]) x /= s;
  }

  Population pop(domain);
  pop.reserve(cfg.n);
  const auto& d = *domain;
  std::array<std::size_t, 5> rf;
  for (int k = 0; k < 5; ++k) rf[k] = d.column(risk_factor_names()[k]);
  const std::size_t c_sex = d.column("sex"), c_age = d.column("age"), c_smoke = d.column("smoking"),
                    c_parents = d.column("parents_stroke"), c_alive = d.column("alive"),
                    c_stroke = d.column("stroke"), c_stroke_day = d.column("stroke_day");

  const StreamTag t_demo("init-demography"), t_rf("init-risk-factors"), t_stroke("init-prior-stroke");
  std::vector<double> row(d.variable_count(), 0.0);
  std::vector<std::size_t> age_group(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const IndividualId id = i;
    RowDraws demo(draws, id, 0, t_demo);
    std::fill(row.begin(), row.end(), 0.0);
    const int sex = demo.uniform(0) < cfg.woman_fraction ? 1 : 0;
    const double ua = demo.uniform(1);
    std::size_t g = static_cast<std::size_t>(
        std::upper_bound(cum[sex].begin(), cum[sex].end(), ua) - cum[sex].begin());
    g = std::min(g, G - 1);
    while (cfg.age_weights[sex][g] == 0.0 && g > 0) --g;
    const double lo = cfg.age_edges[g], hi = cfg.age_edges[g + 1];
    const double age = lo + (hi - lo) * demo.uniform(2);
    const int smoker = demo.uniform(3) < cfg.smoking[sex][g] ? 1 : 0;
    age_group[i] = g;
    row[c_sex] = sex;
    row[c_age] = age;
    row[c_smoke] = smoker;
    row[c_parents] = demo.uniform(4) < cfg.parents_stroke ? 1.0 : 0.0;
    row[c_alive] = 1.0;

    const std::size_t gi = cfg.group_index(sex, g, smoker);
    const auto& grp = cfg.groups[gi];
    RowDraws rfd(draws, id, 0, t_rf);
    Vector5 x;
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_redraws && !ok; ++attempt) {
      Vector5 z;
      for (int k = 0; k < 5; ++k) {
        z[k] = draw_transform(rfd.uniform(static_cast<std::uint32_t>(attempt * 5 + k)), dist::Normal{});
      }
      const Vector5 y = grp.mean + factors[gi] * z;
      ok = true;
      for (int k = 0; k < 5; ++k) {
        x[k] = inverse_box_cox(y[k], grp.lambda[k]);
        if (!(x[k] >= cfg.ranges[k].lo && x[k] <= cfg.ranges[k].hi)) ok = false;
      }
    }
    if (!ok) {
      for (int k = 0; k < 5; ++k) {
        if (std::isnan(x[k])) x[k] = cfg.ranges[k].lo;
        x[k] = std::clamp(x[k], cfg.ranges[k].lo, cfg.ranges[k].hi);
      }
    }
    for (int k = 0; k < 5; ++k) row[rf[k]] = x[k];

    if (demo.uniform(5) < cfg.prior_stroke[g]) {
      // days since the stroke, truncated so that it happened at age ≥ 30
      const double max_days = (age - 30.0) * 365.0;
      const double u = draws.uniform(id, 0, t_stroke, 0) * dist::weibull_cdf(max_days, cfg.stroke_survival);
      const double days = max_days > 0.0 ? std::min(draw_transform(u, cfg.stroke_survival), max_days) : 0.0;
      row[c_stroke] = 1.0;
      row[c_stroke_day] = -std::floor(days);
    }
    pop.append_row(id, row);
  }

  // Second pass: covariates that depend on the risk factors.
  pop.detach();
  double* bp = pop.data(d.column("bp_medication"));
  double* glucose = pop.data(d.column("high_glucose"));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const ConstRow r(pop, i);
    RowDraws demo(draws, pop.id(i), 0, t_demo);
    bp[i] = demo.uniform(6) < detail::logistic_rule(cfg.bp_medication, r) ? 1.0 : 0.0;
    glucose[i] = demo.uniform(7) < detail::logistic_rule(cfg.high_glucose, r) ? 1.0 : 0.0;
  }

  // Diabetes: baseline 10-year risk scaled per sex to the target prevalence.
  const auto& dr = cfg.risk;
  std::vector<double> risk(pop.size());
  std::array<std::vector<double>, 2> by_sex;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const ConstRow r(pop, i);
    double eta = dr.diabetes_intercept;
    for (std::size_t k = 0; k < diabetes_terms().size(); ++k) eta += dr.diabetes[k] * r.get(diabetes_terms()[k]);
    risk[i] = inv_logit(eta);
    by_sex[r[c_sex] != 0.0].push_back(risk[i]);
  }
  const std::array<double, 2> scale{detail::prevalence_scale(by_sex[0], cfg.diabetes_prevalence[0]),
                                    detail::prevalence_scale(by_sex[1], cfg.diabetes_prevalence[1])};
  double* diab = pop.data(d.column("diabetes"));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const int sex = pop.value(i, c_sex) != 0.0;
    RowDraws demo(draws, pop.id(i), 0, t_demo);
    diab[i] = demo.uniform(8) < std::min(1.0, scale[sex] * risk[i]) ? 1.0 : 0.0;
  }
  pop.validate();
  return pop;
}

}  // namespace msim::health
