#pragma once

#include "msim/engine/simulator.hpp"
#include "msim/health/model.hpp"

namespace msim::health {

namespace detail {

struct Columns {
  std::size_t sex, age, smoking, bmi, waist, hdl, sbp, parents_stroke, bp_medication,
      high_glucose, diabetes, diabetes_day, stroke, stroke_day, alive, death_day, dead_stroke,
      dead_other;

  explicit Columns(const SimulationDomain& d)
      : sex(d.column("sex")), age(d.column("age")), smoking(d.column("smoking")),
        bmi(d.column("bmi")), waist(d.column("waist")), hdl(d.column("hdl")),
        sbp(d.column("sbp")), parents_stroke(d.column("parents_stroke")),
        bp_medication(d.column("bp_medication")), high_glucose(d.column("high_glucose")),
        diabetes(d.column("diabetes")), diabetes_day(d.column("diabetes_day")),
        stroke(d.column("stroke")), stroke_day(d.column("stroke_day")),
        alive(d.column("alive")), death_day(d.column("death_day")),
        dead_stroke(d.column("dead_stroke")), dead_other(d.column("dead_other")) {}
};

inline std::vector<std::string> prefixed(const std::string& prefix,
                                         const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(prefix + n);
  return out;
}

inline void mark_death(Row& row, const Columns& c, TimeStep t, std::size_t cause) {
  row.set(c.alive, 0.0);
  row.set(c.death_day, static_cast<double>(t));
  row.set(cause, 1.0);
}

}  // namespace detail

/// Diabetes is visible to the stroke model from the step after onset, so the
/// result does not depend on the order of the two events within a step.
inline double stroke_linear_predictor(const ConstRow& row, const ParameterVector& theta, TimeStep t) {
  const bool woman = row.get("sex") != 0.0;
  const std::string p = woman ? "stroke_f_" : "stroke_m_";
  const bool diabetic = row.get("diabetes") != 0.0 && row.get("diabetes_day") < static_cast<double>(t);
  double eta = theta.at(p + "intercept");
  eta += theta.at(p + "age") * row.get("age");
  eta += theta.at(p + "smoking") * row.get("smoking");
  eta += theta.at(p + "sbp") * row.get("sbp");
  eta += theta.at(p + "hdl") * row.get("hdl");
  eta += theta.at(p + "diabetes") * (diabetic ? 1.0 : 0.0);
  eta += theta.at(p + "parents_stroke") * row.get("parents_stroke");
  return eta;
}

inline double diabetes_linear_predictor(const ConstRow& row, const ParameterVector& theta) {
  double eta = theta.at("diabetes_intercept");
  for (const auto& term : diabetes_terms()) eta += theta.at("diabetes_" + term) * row.get(term);
  return eta;
}

inline ManipulationEvent aging_event(const SimulationDomain& d) {
  const std::size_t age = d.column("age"), alive = d.column("alive");
  return make_manipulation("aging", "age advances by one day", {}, {"age"},
                           [=](Row& row, const ParameterVector&, const RowDraws&) {
                             if (row[alive] == 0.0) return;
                             row.set(age, row[age] + 1.0 / 365.0);
                           });
}

inline ManipulationEvent stroke_event(const SimulationDomain& d) {
  const detail::Columns c(d);
  const std::vector<std::string> terms{"intercept", "age", "smoking", "sbp", "hdl", "diabetes", "parents_stroke"};
  auto params = detail::prefixed("stroke_m_", terms);
  for (auto& n : detail::prefixed("stroke_f_", terms)) params.push_back(n);
  std::array<std::size_t, 14> k{};
  for (std::size_t i = 0; i < params.size(); ++i) k[i] = d.parameter(params[i]);
  return make_prepared_manipulation(
      "stroke", "first stroke, sex-specific 10-year logistic risk", params, {"stroke", "stroke_day"},
      [=](const ParameterVector& theta, TimeStep step) {
        std::array<double, 14> b;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = theta[k[i]];
        const double t = static_cast<double>(step);
        return [=](Row& row, const RowDraws& psi) {
          if (row[c.alive] == 0.0 || row[c.stroke] != 0.0) return;
          const std::size_t o = row[c.sex] != 0.0 ? 7 : 0;
          const bool diabetic = row[c.diabetes] != 0.0 && row[c.diabetes_day] < t;
          double eta = b[o];
          eta += b[o + 1] * row[c.age];
          eta += b[o + 2] * row[c.smoking];
          eta += b[o + 3] * row[c.sbp];
          eta += b[o + 4] * row[c.hdl];
          if (diabetic) eta += b[o + 5];
          eta += b[o + 6] * row[c.parents_stroke];
          if (daily_event_fires(eta, psi.uniform())) {
            row.set(c.stroke, 1.0);
            row.set(c.stroke_day, t);
          }
        };
      });
}

inline ManipulationEvent diabetes_event(const SimulationDomain& d) {
  const detail::Columns c(d);
  auto params = detail::prefixed(
      "diabetes_", {"intercept", "age", "bmi", "waist", "bp_medication", "high_glucose"});
  std::array<std::size_t, 6> k{};
  for (std::size_t i = 0; i < params.size(); ++i) k[i] = d.parameter(params[i]);
  return make_prepared_manipulation(
      "diabetes", "type 2 diabetes onset, 10-year logistic risk", params, {"diabetes", "diabetes_day"},
      [=](const ParameterVector& theta, TimeStep step) {
        std::array<double, 6> b;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = theta[k[i]];
        const double t = static_cast<double>(step);
        return [=](Row& row, const RowDraws& psi) {
          if (row[c.alive] == 0.0 || row[c.diabetes] != 0.0) return;
          const double eta = b[0] + b[1] * row[c.age] + b[2] * row[c.bmi] + b[3] * row[c.waist] +
                             b[4] * row[c.bp_medication] + b[5] * row[c.high_glucose];
          if (daily_event_fires(eta, psi.uniform())) {
            row.set(c.diabetes, 1.0);
            row.set(c.diabetes_day, t);
          }
        };
      });
}

/// Death in days 0..27 after a stroke (t_i = t − stroke_day − 1); recorded
/// as a stroke death.
inline ManipulationEvent early_stroke_death_event(const SimulationDomain& d) {
  const detail::Columns c(d);
  const std::size_t a0 = d.parameter("alpha0");
  return make_prepared_manipulation(
      "early_stroke_death", "death within 28 days of a stroke", {"alpha0"},
      {"alive", "death_day", "dead_stroke"}, [=](const ParameterVector& theta, TimeStep step) {
        const double q = inv_logit(-theta[a0]);
        const double t = static_cast<double>(step);
        return [=](Row& row, const RowDraws& psi) {
          if (row[c.alive] == 0.0 || row[c.stroke] == 0.0) return;
          const double ti = t - row[c.stroke_day] - 1.0;
          if (ti < 0.0 || ti >= 28.0) return;
          if (psi.uniform() < q) detail::mark_death(row, c, step, c.dead_stroke);
        };
      });
}

/// Death from day 28 after a stroke on; recorded under other causes.
inline ManipulationEvent late_stroke_death_event(const SimulationDomain& d) {
  const detail::Columns c(d);
  const std::size_t a1 = d.parameter("alpha1"), a2 = d.parameter("alpha2"),
                    a3 = d.parameter("alpha3");
  return make_prepared_manipulation(
      "late_stroke_death", "death of a stroke survivor after 28 days", {"alpha1", "alpha2", "alpha3"},
      {"alive", "death_day", "dead_other"}, [=](const ParameterVector& theta, TimeStep step) {
        const MortalityParameters m{0.0, theta[a1], theta[a2], theta[a3]};
        const double t = static_cast<double>(step);
        return [=](Row& row, const RowDraws& psi) {
          if (row[c.alive] == 0.0 || row[c.stroke] == 0.0) return;
          const double ti = t - row[c.stroke_day] - 1.0;
          if (ti < 28.0) return;
          if (psi.uniform() < 1.0 - stroke_daily_survival(ti, m)) {
            detail::mark_death(row, c, step, c.dead_other);
          }
        };
      });
}

/// Background death probabilities on a quarter-year age grid, filled on
/// demand. The probability increases with age, so the grid values bracket
/// it and the exact value is computed only when u falls between them.
class BackgroundDeathTable {
 public:
  BackgroundDeathTable(double shape, double scale) : shape_(shape), scale_(scale) {
    background_death_prob(1.0, shape, scale);  // validates
    p_.fill(std::numeric_limits<double>::quiet_NaN());
  }

  bool dies(double age, double u) {
    const double x = age * kPerYear;
    if (x >= 0.0 && x < static_cast<double>(kSize - 1)) {
      const auto k = static_cast<std::size_t>(x);
      if (u >= at(k + 1)) return false;
      if (u < at(k)) return true;
    }
    return u < background_death_prob(age, shape_, scale_);
  }

 private:
  static constexpr std::size_t kSize = 521;  // ages 0 to 130
  static constexpr double kPerYear = 4.0;

  double at(std::size_t k) {
    if (std::isnan(p_[k])) p_[k] = background_death_prob(static_cast<double>(k) / kPerYear, shape_, scale_);
    return p_[k];
  }

  double shape_, scale_;
  std::array<double, kSize> p_;
};

inline ManipulationEvent background_death_event(const SimulationDomain& d) {
  const detail::Columns c(d);
  const std::size_t shape = d.parameter("death_shape"), scale = d.parameter("death_scale");
  return make_prepared_manipulation(
      "background_death", "death of a stroke-free individual, Weibull CDF of age",
      {"death_shape", "death_scale"}, {"alive", "death_day", "dead_other"},
      [=](const ParameterVector& theta, TimeStep step) {
        return [=, table = BackgroundDeathTable(theta[shape], theta[scale])](
                   Row& row, const RowDraws& psi) mutable {
          if (row[c.alive] == 0.0 || row[c.stroke] != 0.0) return;
          if (table.dies(row[c.age], psi.uniform())) detail::mark_death(row, c, step, c.dead_other);
        };
      });
}

inline EventSet health_events(const SimulationDomain& d) {
  EventSet s;
  s.manipulations = {aging_event(d),
                     stroke_event(d),
                     diabetes_event(d),
                     early_stroke_death_event(d),
                     late_stroke_death_event(d),
                     background_death_event(d)};
  return s;
}

/// Daily counts of new strokes, stroke deaths, other deaths and survivors.
inline std::vector<Tracker> health_trackers(const SimulationDomain& d) {
  const detail::Columns c(d);
  auto on_day = [](std::size_t flag, std::size_t day) {
    return [=](const ConstRow& r, TimeStep t) {
      return r[flag] != 0.0 && r[day] == static_cast<double>(t);
    };
  };
  return {Tracker::count("new_strokes", on_day(c.stroke, c.stroke_day)),
          Tracker::count("stroke_deaths", on_day(c.dead_stroke, c.death_day)),
          Tracker::count("other_deaths", on_day(c.dead_other, c.death_day)),
          Tracker::count("alive", [=](const ConstRow& r, TimeStep) { return r[c.alive] != 0.0; })};
}

inline Simulator health_simulator(const SimulationDomain& d, std::uint64_t seed) {
  return Simulator{health_events(d), EventOrder::shared(), seed, health_trackers(d)};
}

}  // namespace msim::health
