#pragma once

#include <cmath>
#include <vector>

#include "msim/calibration/nelder_mead.hpp"
#include "msim/health/model.hpp"

namespace msim::health {

/// Cumulative death fraction `day` days after a stroke.
struct SurvivalTarget {
  double day;
  double cumulative_death;
};

/// Published post-stroke cumulative death at 1, 5, 10 and 15 years.
inline std::vector<SurvivalTarget> default_survival_targets() {
  return {{365, 0.41}, {1825, 0.60}, {3650, 0.76}, {5475, 0.86}};
}

/// 1 − S(day), where S(day) = s28 · Π_{k=28}^{day−1} invlogit(α1 + α2 e^{α3 (k − 27)})
/// and s28 is the survival through the first 28 days.
inline double predicted_cumulative_death(double day, double alpha1, double alpha2, double alpha3,
                                         double survival_28 = 0.72) {
  if (day <= 28.0) {
    const double q = -std::expm1(std::log(survival_28) / 28.0);
    return -std::expm1(std::max(day, 0.0) * std::log1p(-q));
  }
  double log_s = std::log(survival_28);
  const auto last = static_cast<long>(std::ceil(day)) - 1;
  for (long k = 28; k <= last; ++k) {
    const double eta = alpha1 + alpha2 * std::exp(alpha3 * static_cast<double>(k - 27));
    log_s -= softplus(-eta);  // log invlogit(η) = −log(1 + e^−η)
  }
  return -std::expm1(log_s);
}

/// Nelder-Mead stopped on its evaluation budget before converging.
class FitError : public NumericError {
 public:
  FitError(const std::string& what, NelderMeadResult result)
      : NumericError(what), result_(std::move(result)) {}
  const NelderMeadResult& result() const noexcept { return result_; }

 private:
  NelderMeadResult result_;
};

struct LateSurvivalFit {
  double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
  double rss = 0.0;
  std::vector<double> fitted;  // predicted cumulative death at each target day
  bool underdetermined = false;  // fewer targets than parameters
  NelderMeadResult optimizer;
};

struct LateSurvivalOptions {
  double survival_28 = 0.72;
  std::vector<double> start{8.0, -1.0, -0.005};
  NelderMeadOptions optimizer = [] {
    NelderMeadOptions o;
    o.f_tolerance = 1e-18;
    o.x_tolerance = 1e-10;
    o.max_evals = 20000;
    return o;
  }();
};

/// Least-squares fit of (α1, α2, α3) to cumulative death targets.
inline LateSurvivalFit fit_late_survival(const std::vector<SurvivalTarget>& targets,
                                         const LateSurvivalOptions& opt = {}) {
  if (targets.empty()) throw DomainError("late survival fit needs at least one target");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    if (!(t.day > 28.0) || !(t.cumulative_death > 0.0 && t.cumulative_death < 1.0)) {
      throw DomainError("survival targets need day > 28 and a death fraction in (0, 1)");
    }
    if (i > 0 && !(t.day > targets[i - 1].day && t.cumulative_death > targets[i - 1].cumulative_death)) {
      throw DomainError("survival targets must increase in day and cumulative death");
    }
  }
  // One pass over the days; targets are sorted.
  auto rss = [&](const std::vector<double>& a) {
    double s = 0.0, log_s = std::log(opt.survival_28);
    long k = 28;
    for (const auto& t : targets) {
      for (const auto last = static_cast<long>(std::ceil(t.day)) - 1; k <= last; ++k) {
        log_s -= softplus(-(a[0] + a[1] * std::exp(a[2] * static_cast<double>(k - 27))));
      }
      const double r = -std::expm1(log_s) - t.cumulative_death;
      s += r * r;
    }
    return s;
  };
  const bool underdetermined = targets.size() < 3;
  NelderMeadOptions nm = opt.optimizer;
  // A curve of exact fits has no unique point to converge to.
  if (underdetermined) nm.x_tolerance = std::numeric_limits<double>::infinity();
  auto res = nelder_mead(rss, opt.start, nm);
  if (!res.converged) {
    throw FitError("late survival fit did not converge in " + std::to_string(res.evals) +
                       " evaluations (rss " + std::to_string(res.f) + ")",
                   std::move(res));
  }
  LateSurvivalFit fit;
  fit.alpha1 = res.x[0];
  fit.alpha2 = res.x[1];
  fit.alpha3 = res.x[2];
  fit.rss = res.f;
  for (const auto& t : targets) {
    fit.fitted.push_back(predicted_cumulative_death(t.day, fit.alpha1, fit.alpha2, fit.alpha3, opt.survival_28));
  }
  fit.underdetermined = underdetermined;
  fit.optimizer = std::move(res);
  return fit;
}

}  // namespace msim::health
