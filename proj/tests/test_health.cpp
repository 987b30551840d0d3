#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "msim/health/analysis.hpp"
#include "msim/health/calibration.hpp"
#include "msim/health/events.hpp"
#include "msim/health/init.hpp"
#include "msim/health/mortality.hpp"

using namespace msim;
using namespace msim::health;

namespace {

// Reference values from tools/oracles/derive.py (50-digit arithmetic).
constexpr double kDaily10 = 2.8865478084844565e-5;
constexpr double kDaily05 = 1.405285862410937e-5;
constexpr double kStrokeIntercept = -12.635156246509132;
constexpr double kDiabetesIntercept = -9.2862943611198906;
constexpr double kDaily20 = 6.113335081868739e-5;
constexpr double kBackground = 0.0027359764031407149;
constexpr double kEarlyQ = 0.011663733178012998;
constexpr double kAlpha0 = 4.4395386915560997;

void expect_rel(double got, double want, double tol) {
  EXPECT_LE(std::abs(got - want), tol * std::abs(want)) << got << " vs " << want;
}

// One living, stroke-free individual; columns not listed are 0.
Population person(const DomainPtr& d, std::map<std::string, double> values) {
  std::vector<double> row(d->variable_count(), 0.0);
  values.emplace("alive", 1.0);
  for (const auto& [k, v] : values) row[d->column(k)] = v;
  Population p(d);
  p.append_row(0, row);
  return p;
}

LatentDraws constant_draws(double u) {
  return LatentDraws::forced([u](IndividualId, TimeStep, StreamTag, std::uint32_t) { return u; });
}

double get(const Population& p, std::string_view col, std::size_t r = 0) {
  return p.value(r, p.domain().column(col));
}

}  // namespace

TEST(DailyRisk, OracleValues) {
  expect_rel(ten_year_to_daily(0.1), kDaily10, 1e-12);
  expect_rel(ten_year_to_daily(0.05), kDaily05, 1e-12);
  EXPECT_EQ(ten_year_to_daily(0.0), 0.0);
  // The 10-year logit form stays exact where 1 − exp(−3650) rounds to 1.
  expect_rel(daily_from_logit(3650.0), -std::expm1(-1.0), 1e-12);
  expect_rel(daily_from_logit(logit(0.1)), kDaily10, 1e-12);
}

TEST(DailyRisk, MonotoneAndBounded) {
  double prev = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double p10 = 0.99 * i / 10000.0;
    const double p1 = ten_year_to_daily(p10);
    EXPECT_GT(p1, prev);
    EXPECT_LE(p1, p10);
    prev = p1;
  }
}

TEST(DailyRisk, RejectsOutOfRange) {
  EXPECT_THROW(ten_year_to_daily(-0.01), NumericError);
  EXPECT_THROW(ten_year_to_daily(1.0), NumericError);
  EXPECT_THROW(ten_year_to_daily(std::nan("")), NumericError);
}

TEST(DailyRisk, ShortcutAgreesWithDirectComparison) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eta_dist(-30.0, 30.0), u_dist(0.0, 1.0);
  for (int i = 0; i < 200000; ++i) {
    const double eta = eta_dist(rng);
    const double p = daily_from_logit(eta);
    // Draws concentrated around the threshold as well as uniform ones.
    const double u = i % 2 ? u_dist(rng) : p * (0.999 + 0.002 * u_dist(rng));
    EXPECT_EQ(daily_event_fires(eta, u), u < p);
  }
}

TEST(StrokeEvent, FiresBelowDailyRisk) {
  const auto d = make_health_domain();
  auto theta = make_theta(d).with("stroke_m_intercept", kStrokeIntercept);
  const auto p = person(d, {{"age", 60}, {"smoking", 1}, {"sbp", 150}, {"hdl", 1.3}});
  expect_rel(inv_logit(stroke_linear_predictor(ConstRow(p, 0), theta, 5)), 0.05, 1e-12);
  const auto ev = stroke_event(*d);
  auto hit = apply_manipulation(ev, p, theta, constant_draws(kDaily05 * (1 - 1e-9)), 5);
  EXPECT_EQ(get(hit, "stroke"), 1.0);
  EXPECT_EQ(get(hit, "stroke_day"), 5.0);
  auto miss = apply_manipulation(ev, p, theta, constant_draws(kDaily05 * (1 + 1e-9)), 5);
  EXPECT_EQ(get(miss, "stroke"), 0.0);
}

TEST(StrokeEvent, NoSecondStrokeAndNothingForTheDead) {
  const auto d = make_health_domain();
  const auto theta = make_theta(d);
  const auto ev = stroke_event(*d);
  auto prior = person(d, {{"age", 70}, {"stroke", 1}, {"stroke_day", -100}});
  auto out = apply_manipulation(ev, prior, theta, constant_draws(0.0), 3);
  EXPECT_EQ(get(out, "stroke_day"), -100.0);
  auto dead = person(d, {{"age", 70}, {"alive", 0}});
  EXPECT_EQ(apply_manipulation(ev, dead, theta, constant_draws(0.0), 3), dead);
}

TEST(StrokeEvent, DiabetesCountsFromTheNextDay) {
  const auto d = make_health_domain();
  const auto theta = make_theta(d);
  const auto p = person(d, {{"age", 60}, {"sex", 1}, {"diabetes", 1}, {"diabetes_day", 7}});
  const double same_day = stroke_linear_predictor(ConstRow(p, 0), theta, 7);
  const double next_day = stroke_linear_predictor(ConstRow(p, 0), theta, 8);
  EXPECT_NEAR(next_day - same_day, theta.at("stroke_f_diabetes"), 1e-12);
}

TEST(DiabetesEvent, FiresBelowDailyRisk) {
  const auto d = make_health_domain();
  auto theta = make_theta(d).with("diabetes_intercept", kDiabetesIntercept);
  const auto p = person(d, {{"age", 50}, {"bmi", 30}, {"waist", 100}, {"bp_medication", 1}});
  expect_rel(inv_logit(diabetes_linear_predictor(ConstRow(p, 0), theta)), 0.2, 1e-12);
  const auto ev = diabetes_event(*d);
  auto hit = apply_manipulation(ev, p, theta, constant_draws(kDaily20 * (1 - 1e-9)), 9);
  EXPECT_EQ(get(hit, "diabetes"), 1.0);
  EXPECT_EQ(get(hit, "diabetes_day"), 9.0);
  auto miss = apply_manipulation(ev, p, theta, constant_draws(kDaily20 * (1 + 1e-9)), 9);
  EXPECT_EQ(get(miss, "diabetes"), 0.0);
}

TEST(StrokeDeath, AlphaZeroForTwentyEightDayFatality) {
  const double a0 = alpha0_for_28_day_fatality(0.28);
  expect_rel(a0, kAlpha0, 1e-12);
  expect_rel(inv_logit(-a0), kEarlyQ, 1e-12);
}

TEST(StrokeDeath, EarlyWindowIsDaysZeroToTwentySeven) {
  const auto d = make_health_domain();
  const auto ev = early_stroke_death_event(*d);
  const auto certain = make_theta(d).with("alpha0", -std::numeric_limits<double>::infinity());
  const auto never = make_theta(d).with("alpha0", std::numeric_limits<double>::infinity());
  const auto p = person(d, {{"age", 70}, {"stroke", 1}, {"stroke_day", 10}});
  for (TimeStep t : {10, 11, 38, 39}) {
    auto out = apply_manipulation(ev, p, certain, constant_draws(0.5), t);
    const bool in_window = t >= 11 && t <= 38;
    EXPECT_EQ(get(out, "alive"), in_window ? 0.0 : 1.0) << t;
    if (in_window) {
      EXPECT_EQ(get(out, "dead_stroke"), 1.0);
      EXPECT_EQ(get(out, "death_day"), static_cast<double>(t));
    }
    EXPECT_EQ(get(apply_manipulation(ev, p, never, constant_draws(0.0), t), "alive"), 1.0);
  }
}

TEST(StrokeDeath, LateDeathsCountAsOtherCauses) {
  const auto d = make_health_domain();
  const auto ev = late_stroke_death_event(*d);
  const auto theta = make_theta(d).with("alpha1", -50.0).with("alpha2", 0.0);
  const auto p = person(d, {{"age", 70}, {"stroke", 1}, {"stroke_day", 0}});
  EXPECT_EQ(get(apply_manipulation(ev, p, theta, constant_draws(0.5), 28), "alive"), 1.0);
  auto out = apply_manipulation(ev, p, theta, constant_draws(0.5), 29);
  EXPECT_EQ(get(out, "alive"), 0.0);
  EXPECT_EQ(get(out, "dead_other"), 1.0);
  EXPECT_EQ(get(out, "dead_stroke"), 0.0);
}

TEST(BackgroundDeath, OracleAndLimits) {
  expect_rel(background_death_prob(100.0, 1.0, 36500.0), kBackground, 1e-12);
  EXPECT_EQ(background_death_prob(0.0, 5.0, 300.0), 0.0);
  EXPECT_LT(background_death_prob(100.0, 5.0, 1e12), 1e-40);
  EXPECT_THROW(background_death_prob(50.0, 0.0, 300.0), NumericError);
  EXPECT_THROW(background_death_prob(50.0, 5.0, -1.0), NumericError);
  EXPECT_THROW(BackgroundDeathTable(5.0, 0.0), NumericError);
}

TEST(BackgroundDeath, TableDecidesLikeDirectEvaluation) {
  BackgroundDeathTable table(5.9, 347.6);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> age_dist(0.0, 140.0), unit(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double age = age_dist(rng);
    const double p = background_death_prob(age, 5.9, 347.6);
    const double u = i % 2 ? unit(rng) * 0.01 : p * (0.99 + 0.02 * unit(rng));
    EXPECT_EQ(table.dies(age, u), u < p) << age;
  }
}

TEST(HealthEvents, RangeKernelsMatchRowByRowApplication) {
  const auto d = make_health_domain();
  auto start = init_population(default_init_config(3000), 5, d);
  HealthParameters hp;
  hp.risk.stroke_m_intercept += 4.0;
  hp.risk.stroke_f_intercept += 4.0;
  hp.mortality.death_scale = 150.0;
  const auto theta = make_theta(d, hp);
  const auto events = health_events(*d);
  const LatentDraws draws(77);
  BoundEvents bound(events, *d);
  Population by_range = start, by_row = start;
  for (TimeStep t = 1; t <= 60; ++t) {
    manipulation_phase(by_range, 0, by_range.size(), theta, draws, t, bound, EventOrder::fixed());
    for (const auto& ev : events.manipulations) by_row = apply_manipulation(ev, by_row, theta, draws, t);
  }
  EXPECT_EQ(by_range, by_row);
  const auto strokes = by_range.column("stroke");
  EXPECT_GT(std::count(strokes.begin(), strokes.end(), 1.0), std::count(start.column("stroke").begin(),
                                                                          start.column("stroke").end(), 1.0));
}

TEST(HealthEvents, DeadRowsFrozenAndOneEventPerDay) {
  const auto d = make_health_domain();
  HealthParameters hp;
  hp.risk.stroke_m_intercept += 5.0;
  hp.risk.stroke_f_intercept += 5.0;
  hp.mortality.death_scale = 120.0;
  State s{init_population(default_init_config(2000), 8, d), make_theta(d, hp)};
  const auto sim = health_simulator(*d, 4);
  const auto c_alive = d->column("alive"), c_stroke = d->column("stroke"), c_sd = d->column("stroke_day"),
             c_dd = d->column("death_day");
  std::size_t strokes = 0, deaths = 0;
  for (TimeStep t = 1; t <= 200; ++t) {
    const State next = transition(s, sim.draws(), t, sim.events, sim.order);
    for (std::size_t r = 0; r < s.population.size(); ++r) {
      if (s.population.value(r, c_alive) == 0.0) {
        for (std::size_t j = 0; j < d->variable_count(); ++j) {
          ASSERT_EQ(next.population.value(r, j), s.population.value(r, j));
        }
        continue;
      }
      ASSERT_GE(next.population.value(r, c_stroke), s.population.value(r, c_stroke));
      const bool new_stroke = s.population.value(r, c_stroke) == 0.0 && next.population.value(r, c_stroke) == 1.0;
      const bool died = next.population.value(r, c_alive) == 0.0;
      ASSERT_FALSE(new_stroke && died) << "row " << r << " day " << t;
      if (!new_stroke) {
        ASSERT_EQ(next.population.value(r, c_sd), s.population.value(r, c_sd));
      }
      if (died) {
        ASSERT_EQ(next.population.value(r, c_dd), static_cast<double>(t));
      }
      strokes += new_stroke;
      deaths += died;
    }
    s = next;
  }
  EXPECT_GT(strokes, 20u);
  EXPECT_GT(deaths, 20u);
}

TEST(LateSurvival, PredictionMatchesOracle) {
  const double want[] = {0.41120103490251212, 0.80526980324023557, 0.96074762755477895,
                         0.99248610527615034};
  const double days[] = {365, 1825, 3650, 5475};
  for (int i = 0; i < 4; ++i) expect_rel(predicted_cumulative_death(days[i], 7, 0.5, -0.001), want[i], 1e-12);
  expect_rel(predicted_cumulative_death(28, 7, 0.5, -0.001), 0.28, 1e-12);
}

TEST(LateSurvival, RecoversCurveFromItsOwnPoints) {
  std::vector<SurvivalTarget> targets;
  for (double day : {200.0, 365.0, 1825.0, 3650.0, 5475.0}) {
    targets.push_back({day, predicted_cumulative_death(day, 7.0, 0.5, -0.003)});
  }
  const auto fit = fit_late_survival(targets);
  EXPECT_FALSE(fit.underdetermined);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    EXPECT_NEAR(fit.fitted[i], targets[i].cumulative_death, 0.02 * targets[i].cumulative_death);
  }
  EXPECT_LT(fit.rss, 1e-8);
}

TEST(LateSurvival, PublishedTargetsWithinTwoPoints) {
  const auto targets = default_survival_targets();
  const auto fit = fit_late_survival(targets);
  EXPECT_LT(fit.rss, 1e-4);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    EXPECT_NEAR(fit.fitted[i], targets[i].cumulative_death, 0.02);
  }
}

TEST(LateSurvival, InputChecks) {
  EXPECT_TRUE(fit_late_survival({{365, 0.41}}).underdetermined);
  EXPECT_THROW(fit_late_survival({}), DomainError);
  EXPECT_THROW(fit_late_survival({{20, 0.3}}), DomainError);
  EXPECT_THROW(fit_late_survival({{365, 0.41}, {1825, 0.40}}), DomainError);
  EXPECT_THROW(fit_late_survival({{365, 0.41}, {365, 0.50}}), DomainError);
}

TEST(InitPopulation, EmptyAndDeterministic) {
  EXPECT_EQ(init_population(default_init_config(0), 1).size(), 0u);
  EXPECT_EQ(init_population(default_init_config(500), 3), init_population(default_init_config(500), 3));
  EXPECT_NE(init_population(default_init_config(500), 3), init_population(default_init_config(500), 4));
}

TEST(InitPopulation, PointMassConfig) {
  auto cfg = default_init_config(200);
  cfg.woman_fraction = 0.0;
  cfg.age_weights[0] = {0, 0, 1, 0, 0, 0, 0};
  cfg.smoking[0].assign(7, 0.0);
  cfg.parents_stroke = 0.0;
  cfg.prior_stroke.assign(7, 0.0);
  cfg.diabetes_prevalence = {0.0, 0.0};
  cfg.bp_medication = {-1000.0, {}};
  cfg.high_glucose = {-1000.0, {}};
  const std::array<double, 5> point{27.0, 95.0, 5.5, 1.2, 135.0};
  for (auto& g : cfg.groups) {
    g.cov.setZero();
    for (int k = 0; k < 5; ++k) g.mean[k] = box_cox(point[k], g.lambda[k]);
  }
  const auto pop = init_population(cfg, 9);
  for (std::size_t r = 0; r < pop.size(); ++r) {
    EXPECT_EQ(get(pop, "sex", r), 0.0);
    EXPECT_EQ(get(pop, "diabetes", r), 0.0);
    EXPECT_GE(get(pop, "age", r), 50.0);
    EXPECT_LT(get(pop, "age", r), 60.0);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(get(pop, risk_factor_names()[k], r), point[k], 1e-9);
  }
}

TEST(InitPopulation, RejectsNonPositiveDefiniteCovariance) {
  auto cfg = default_init_config(10);
  cfg.groups[3].cov(0, 1) = cfg.groups[3].cov(1, 0) = 10.0;
  EXPECT_THROW(init_population(cfg, 1), DomainError);
}

TEST(InitPopulation, DefaultConfigProperties) {
  const auto pop = init_population(default_init_config(100000), 21);
  const auto& d = pop.domain();
  const auto c_sex = d.column("sex"), c_age = d.column("age"), c_smoke = d.column("smoking"),
             c_sbp = d.column("sbp"), c_stroke = d.column("stroke"), c_sd = d.column("stroke_day"),
             c_diab = d.column("diabetes");
  // SBP mean per subgroup against truncated inverse-Box-Cox moments.
  struct Group {
    int sex, smoker;
    double lo, hi, mean, sd;
  };
  const Group groups[] = {{0, 0, 60, 70, 141.56020235517726, 18.846682176618873},
                          {1, 0, 60, 70, 138.98260313576391, 20.867140490263717},
                          {0, 1, 30, 40, 126.54897444584529, 15.02360209853577}};
  for (const auto& g : groups) {
    double sum = 0.0, n = 0.0;
    for (std::size_t r = 0; r < pop.size(); ++r) {
      const double age = pop.value(r, c_age);
      if (pop.value(r, c_sex) == g.sex && pop.value(r, c_smoke) == g.smoker && age >= g.lo && age < g.hi) {
        sum += pop.value(r, c_sbp);
        n += 1.0;
      }
    }
    ASSERT_GT(n, 500.0);
    EXPECT_NEAR(sum / n, g.mean, 3.0 * g.sd / std::sqrt(n)) << g.sex << ' ' << g.smoker << ' ' << g.lo;
  }
  double diab[2] = {0, 0}, count[2] = {0, 0};
  for (std::size_t r = 0; r < pop.size(); ++r) {
    const int sex = pop.value(r, c_sex) != 0.0;
    EXPECT_GE(pop.value(r, c_age), 30.0);
    if (pop.value(r, c_stroke) != 0.0) {
      EXPECT_LE(pop.value(r, c_sd), 0.0);
      EXPECT_GE(pop.value(r, c_age) + pop.value(r, c_sd) / 365.0, 30.0 - 1.0 / 365.0);
    }
    diab[sex] += pop.value(r, c_diab);
    count[sex] += 1.0;
  }
  EXPECT_NEAR(diab[0] / count[0], 0.15, 0.01);
  EXPECT_NEAR(diab[1] / count[1], 0.10, 0.01);
}

TEST(Logistic, SeparationNamesTheColumn) {
  Eigen::MatrixXd X(6, 2);
  X << 0, 1, 1, 2, 0, 3, 1, 1, 0, 2, 1, 3;
  Eigen::VectorXd y(6);
  y << 0, 1, 0, 1, 0, 1;
  try {
    fit_logistic(X, y, {"flag", "dose"});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("flag"), std::string::npos);
  }
}

TEST(Logistic, RankDeficiencyNamesTheColumn) {
  Eigen::MatrixXd X(6, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
  Eigen::VectorXd y(6);
  y << 0, 1, 1, 0, 1, 0;
  try {
    fit_logistic(X, y, {"a", "twice_a"});
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(msg.find("twice_a") != std::string::npos || msg.find("'a'") != std::string::npos) << msg;
  }
}

TEST(Logistic, RecoversKnownCoefficients) {
  const int n = 100000;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = z(rng);
    y[i] = u(rng) < inv_logit(-1.0 + 0.5 * X(i, 0)) ? 1.0 : 0.0;
  }
  const auto fit = fit_logistic(X, y, {"x"});
  EXPECT_NEAR(fit.coef[0], -1.0, 0.03);
  EXPECT_NEAR(fit.coef[1], 0.5, 0.03);
  EXPECT_LT(fit.ci_low(1), std::exp(0.5));
  EXPECT_GT(fit.ci_high(1), std::exp(0.5));
}

TEST(Logistic, InterceptOnlyClosedForm) {
  Eigen::MatrixXd X(8, 0);
  Eigen::VectorXd y(8);
  y << 1, 0, 0, 0, 1, 0, 0, 0;
  const auto fit = fit_logistic(X, y, {});
  EXPECT_NEAR(fit.coef[0], std::log(1.0 / 3.0), 1e-6);
  EXPECT_THROW(fit_logistic(X, Eigen::VectorXd::Zero(8), {}), NumericError);
}

TEST(Incidence, OutcomeTableAndRate) {
  const auto d = make_health_domain();
  Population base(d), fin(d);
  auto add = [&](Population& p, IndividualId id, std::map<std::string, double> v) {
    std::vector<double> row(d->variable_count(), 0.0);
    v.emplace("alive", 1.0);
    for (const auto& [k, x] : v) row[d->column(k)] = x;
    p.append_row(id, row);
  };
  add(base, 0, {{"age", 50}});
  add(base, 1, {{"age", 60}});
  add(base, 2, {{"age", 70}, {"stroke", 1}, {"stroke_day", -5}});
  add(base, 3, {{"age", 80}});
  add(fin, 0, {{"age", 60}});
  add(fin, 1, {{"age", 62}, {"stroke", 1}, {"stroke_day", 730}});
  add(fin, 2, {{"age", 80}, {"stroke", 1}, {"stroke_day", -5}});
  add(fin, 3, {{"age", 81}, {"alive", 0}, {"death_day", 365}, {"dead_other", 1}});
  const auto table = stroke_outcome_table(base, fin, 3650);
  ASSERT_EQ(table.size(), 3u);
  const auto inc = stroke_incidence(table);
  EXPECT_EQ(inc.events, 1.0);
  EXPECT_DOUBLE_EQ(inc.person_years, 10.0 + 2.0 + 1.0);
  EXPECT_DOUBLE_EQ(inc.per_100k(), 1e5 / 13.0);
}

TEST(MortalityCalibration, SelfTargetScoresZero) {
  const auto d = make_health_domain();
  State start{init_population(default_init_config(5000), 6, d), make_theta(d)};
  const auto sim = health_simulator(*d, 12);
  TargetTable t;
  for (const char* k : {"30", "60", "80"}) t.series.push_back({k, 1.0, 1.0});
  t.scalars.push_back({"stroke_share", 1.0, 2000.0});
  auto problem = mortality_calibration_problem(sim, start, t, 120);
  const auto rec = run(problem.simulator, problem.start, problem.plan);
  const auto out = problem.output(rec, problem.start);
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) problem.targets.series[i].value = out[i];
  problem.targets.scalars[0].value = out[3];
  for (double v : out) ASSERT_GT(v, 0.0);
  EXPECT_EQ(evaluate_objective(problem, start.theta), 0.0);
  EXPECT_THROW(mortality_calibration_problem(sim, start, [] {
                 auto bad = default_mortality_targets();
                 bad.series[0].value = 0.0;
                 return bad;
               }()),
               DomainError);
}
