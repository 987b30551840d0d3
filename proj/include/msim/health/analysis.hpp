#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "msim/engine/distributions.hpp"
#include "msim/engine/io.hpp"
#include "msim/sampler/follow_up.hpp"

namespace msim::health {

struct LogisticOptions {
  int max_iter = 50;
  double tol = 1e-10;  // max |Δβ| between iterations
  double max_abs_coefficient = 30.0;  // larger estimates signal separation
};

struct LogisticFit {
  std::vector<std::string> terms;  // "intercept" first
  std::vector<double> coef, se;
  std::size_t n = 0;
  int iterations = 0;

  double odds_ratio(std::size_t k) const { return std::exp(coef[k]); }
  double ci_low(std::size_t k) const { return std::exp(coef[k] - 1.959963984540054 * se[k]); }
  double ci_high(std::size_t k) const { return std::exp(coef[k] + 1.959963984540054 * se[k]); }
  std::size_t index(std::string_view term) const {
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (terms[k] == term) return k;
    }
    throw DomainError("no term '" + std::string(term) + "' in logistic fit");
  }
};

/// Maximum likelihood by iteratively reweighted least squares. X holds the
/// covariates without the intercept column; `names` labels them.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::vector<std::string>& names,
                                const LogisticOptions& opt = {}) {
  const auto n = X.rows();
  const auto p = X.cols() + 1;
  if (static_cast<std::size_t>(X.cols()) != names.size()) throw DomainError("covariate names do not match columns");
  if (y.size() != n) throw DomainError("outcome length differs from covariate rows");
  if (n == 0) throw DomainError("logistic fit on zero rows");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw DomainError("outcome must be 0/1");
  }
  const double ybar = y.mean();
  if (ybar == 0.0 || ybar == 1.0) throw NumericError("outcome has no variation");

  Eigen::MatrixXd Z(n, p);
  Z.col(0).setOnes();
  Z.rightCols(p - 1) = X;
  std::vector<std::string> terms{"intercept"};
  terms.insert(terms.end(), names.begin(), names.end());

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  if (qr.rank() < p) {
    const auto dropped = qr.colsPermutation().indices()[qr.rank()];
    throw NumericError("design matrix is rank deficient at column '" + terms[static_cast<std::size_t>(dropped)] + "'");
  }
  // A binary covariate with a constant outcome within one of its levels
  // has no finite estimate.
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double n1 = 0, y0 = 0, y1 = 0;
    bool binary = true;
    for (Eigen::Index i = 0; i < n && binary; ++i) {
      const double x = X(i, j);
      if (x == 1.0) {
        n1 += 1;
        y1 += y[i];
      } else if (x == 0.0) {
        y0 += y[i];
      } else {
        binary = false;
      }
    }
    if (!binary) continue;
    const double n0 = static_cast<double>(n) - n1;
    if (y1 == 0 || y1 == n1 || y0 == 0 || y0 == n0) {
      throw NumericError("outcome is separated by covariate '" + names[static_cast<std::size_t>(j)] + "'");
    }
  }

  LogisticFit fit;
  fit.terms = terms;
  fit.n = static_cast<std::size_t>(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta[0] = std::log(ybar / (1.0 - ybar));
  Eigen::MatrixXd info(p, p);
  bool converged = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Eigen::VectorXd eta = Z * beta;
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = inv_logit(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    info = Z.transpose() * w.asDiagonal() * Z;
    const Eigen::VectorXd score = Z.transpose() * (y - mu);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) throw NumericError("information matrix is singular");
    const Eigen::VectorXd step = ldlt.solve(score);
    beta += step;
    fit.iterations = it;
    Eigen::Index worst;
    if (beta.cwiseAbs().maxCoeff(&worst) > opt.max_abs_coefficient) {
      throw NumericError("estimate for '" + terms[static_cast<std::size_t>(worst)] +
                         "' diverges (separation)");
    }
    if (step.cwiseAbs().maxCoeff() < opt.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericError("logistic regression did not converge");
  // Information at the final estimate.
  {
    const Eigen::VectorXd eta = Z * beta;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = inv_logit(eta[i]);
      w[i] = mu * (1.0 - mu);
    }
    info = Z.transpose() * w.asDiagonal() * Z;
  }
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  for (Eigen::Index k = 0; k < p; ++k) {
    fit.coef.push_back(beta[k]);
    fit.se.push_back(std::sqrt(cov(k, k)));
  }
  return fit;
}

/// Fit on rows of `pop` accepted by `keep` (all rows when empty).
inline LogisticFit fit_logistic(const Population& pop, const std::string& outcome,
                                const std::vector<std::string>& covariates,
                                const RowPredicate& keep = {}, const LogisticOptions& opt = {}) {
  const auto& d = pop.domain();
  const std::size_t yc = d.column(outcome);
  std::vector<std::size_t> xc;
  for (const auto& c : covariates) xc.push_back(d.column(c));
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    if (!keep || keep(ConstRow(pop, r))) rows.push_back(r);
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(xc.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < xc.size(); ++j) X(ii, static_cast<Eigen::Index>(j)) = pop.value(rows[i], xc[j]);
    y[ii] = pop.value(rows[i], yc);
  }
  return fit_logistic(X, y, covariates, opt);
}

/// Complete-case fit on the observed cells of a sample.
inline LogisticFit fit_logistic(const Sample& s, const std::string& outcome,
                                const std::vector<std::string>& covariates,
                                const RowPredicate& keep = {}, const LogisticOptions& opt = {}) {
  const auto& d = s.domain();
  std::vector<std::size_t> cols{d.column(outcome)};
  for (const auto& c : covariates) cols.push_back(d.column(c));
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < s.size(); ++r) {
    bool complete = true;
    for (auto j : cols) complete = complete && s.observed(r, j);
    if (complete && (!keep || keep(ConstRow(s.data_unchecked(), r)))) rows.push_back(r);
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(covariates.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    y[ii] = s.unmasked_value(rows[i], cols[0]);
    for (std::size_t j = 0; j < covariates.size(); ++j) {
      X(ii, static_cast<Eigen::Index>(j)) = s.unmasked_value(rows[i], cols[j + 1]);
    }
  }
  return fit_logistic(X, y, covariates, opt);
}

/// Odds-ratio table: term, OR, CI-low, CI-high (intercept omitted).
inline void write_odds_ratio_csv(const LogisticFit& fit, std::ostream& os) {
  os << "term,estimate,se,OR,CI-low,CI-high\n";
  for (std::size_t k = 1; k < fit.terms.size(); ++k) {
    os << fit.terms[k] << ',' << format_double(fit.coef[k]) << ',' << format_double(fit.se[k]) << ','
       << format_double(fit.odds_ratio(k)) << ',' << format_double(fit.ci_low(k)) << ','
       << format_double(fit.ci_high(k)) << '\n';
  }
}

/// Baseline covariates joined with the stroke outcome of a follow-up of
/// `horizon` days. Individuals with a stroke before baseline are dropped.
/// Adds `new_stroke` (0/1) and `years_at_risk` (stroke-free, alive time).
inline Population stroke_outcome_table(const Population& baseline, const Population& final_pop,
                                       TimeStep horizon) {
  const auto& bd = baseline.domain();
  auto vars = bd.variables();
  vars.push_back({"new_stroke", ValueKind::binary});
  vars.push_back({"years_at_risk"});
  Population out(make_domain(vars, {}));
  out.reserve(baseline.size());
  const std::size_t b_stroke = bd.column("stroke");
  const auto& fd = final_pop.domain();
  const std::size_t f_stroke = fd.column("stroke"), f_stroke_day = fd.column("stroke_day"),
                    f_alive = fd.column("alive"), f_death_day = fd.column("death_day");
  std::vector<double> row(vars.size());
  for (std::size_t r = 0; r < baseline.size(); ++r) {
    if (baseline.value(r, b_stroke) != 0.0) continue;
    const IndividualId id = baseline.id(r);
    const auto fr = final_pop.find_row(id);
    if (!fr) throw DomainError("id " + std::to_string(id) + " missing from the follow-up population");
    for (std::size_t j = 0; j < bd.variable_count(); ++j) row[j] = baseline.value(r, j);
    const bool stroke = final_pop.value(*fr, f_stroke) != 0.0;
    double days = static_cast<double>(horizon);
    if (stroke) {
      days = final_pop.value(*fr, f_stroke_day);
    } else if (final_pop.value(*fr, f_alive) == 0.0) {
      days = final_pop.value(*fr, f_death_day);
    }
    row[bd.variable_count()] = stroke ? 1.0 : 0.0;
    row[bd.variable_count() + 1] = days / 365.0;
    out.append_row(id, row);
  }
  return out;
}

struct Incidence {
  double events = 0.0;
  double person_years = 0.0;
  double per_100k() const { return incidence_per_100k(events, person_years); }
};

/// New strokes per stroke-free person-year over rows of an outcome table
/// accepted by `keep`.
inline Incidence stroke_incidence(const Population& outcomes, const RowPredicate& keep = {}) {
  const std::size_t e = outcomes.domain().column("new_stroke"), py = outcomes.domain().column("years_at_risk");
  Incidence inc;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (keep && !keep(ConstRow(outcomes, r))) continue;
    inc.events += outcomes.value(r, e);
    inc.person_years += outcomes.value(r, py);
  }
  return inc;
}

/// Covariates of the stroke risk model.
inline std::vector<std::string> stroke_covariates() {
  return {"age", "smoking", "sbp", "hdl", "diabetes", "parents_stroke"};
}

}  // namespace msim::health
