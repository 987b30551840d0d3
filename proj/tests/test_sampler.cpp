#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "msim/sampler/follow_up.hpp"
#include "msim/sampler/missingness.hpp"

using namespace msim;

namespace {

DomainPtr person_domain() {
  return make_domain({{"sex", ValueKind::binary},
                      {"age"},
                      {"bmi"},
                      {"smoking", ValueKind::binary},
                      {"waist"},
                      {"x"},
                      {"y"},
                      {"alive", ValueKind::binary}},
                     {}, "alive");
}

Population people(std::size_t n, const DomainPtr& d = person_domain()) {
  Population p(d);
  for (std::size_t i = 0; i < n; ++i) {
    p.append_row(std::vector<double>{static_cast<double>(i % 2), 30.0 + static_cast<double>(i % 40),
                                     22.0 + static_cast<double>(i % 9), static_cast<double>(i % 3 == 0),
                                     80.0 + static_cast<double>(i % 25), 10.0,
                                     static_cast<double>(i % 17), 1.0});
  }
  return p;
}

std::vector<IndividualId> all_ids(const Population& p) { return {p.ids().begin(), p.ids().end()}; }

}  // namespace

TEST(DrawSample, WholePopulation) {
  auto p = people(30);
  EXPECT_EQ(draw_sample(p, SamplingDesign::simple_random(30), LatentDraws(1)), all_ids(p));
}

TEST(DrawSample, SingleIndividual) {
  auto p = people(1);
  EXPECT_EQ(draw_sample(p, SamplingDesign::simple_random(1), LatentDraws(1)),
            std::vector<IndividualId>{0});
}

TEST(DrawSample, StratifiedCounts) {
  auto p = people(100);
  auto ids = draw_sample(p, SamplingDesign::stratified("sex", {{0.0, 5}, {1.0, 5}}), LatentDraws(4));
  ASSERT_EQ(ids.size(), 10u);
  int women = 0;
  for (auto id : ids) women += static_cast<int>(p.value(*p.find_row(id), "sex"));
  EXPECT_EQ(women, 5);
}

TEST(DrawSample, ExclusionAndOversampling) {
  auto p = people(100);
  auto excl = [](const ConstRow& r) { return r.get("y") == 0.0; };
  auto ids = draw_sample(p, SamplingDesign::simple_random(90, excl), LatentDraws(2));
  for (auto id : ids) EXPECT_NE(p.value(*p.find_row(id), "y"), 0.0);
  EXPECT_THROW(draw_sample(p, SamplingDesign::simple_random(95, excl), LatentDraws(2)), DomainError);
  EXPECT_THROW(draw_sample(p, SamplingDesign::stratified("sex", {{0.0, 51}}), LatentDraws(2)),
               DomainError);
}

TEST(DrawSample, DeterministicAndWithoutReplacement) {
  auto p = people(1000);
  auto a = draw_sample(p, SamplingDesign::simple_random(200), LatentDraws(9));
  auto b = draw_sample(p, SamplingDesign::simple_random(200), LatentDraws(9));
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
  EXPECT_NE(a, draw_sample(p, SamplingDesign::simple_random(200), LatentDraws(10)));
}

TEST(NonParticipation, ZeroCoefficientsGiveHalf) {
  auto p = people(5);
  NonParticipationModel m;
  m.rho.fill(0.0);
  for (std::size_t r = 0; r < p.size(); ++r) EXPECT_EQ(nonparticipation_prob(ConstRow(p, r), m), 0.5);
}

TEST(NonParticipation, DefaultCoefficientExamples) {
  auto d = person_domain();
  Population p(d);
  p.append_row(std::vector<double>{0, 60, 25, 1, 95, 0, 0, 1});  // man
  p.append_row(std::vector<double>{1, 60, 25, 1, 95, 0, 0, 1});  // woman
  EXPECT_NEAR(nonparticipation_linear(ConstRow(p, 0), {}), -0.64, 1e-12);
  EXPECT_NEAR(nonparticipation_prob(ConstRow(p, 0)), 0.345246539393681, 1e-12);
  EXPECT_NEAR(nonparticipation_prob(ConstRow(p, 1)), 0.278884821977137, 1e-12);
}

TEST(NonParticipation, IncreasesWithAge) {
  auto d = person_domain();
  Population p(d);
  for (int age = 30; age <= 90; age += 5) p.append_row(std::vector<double>{0, double(age), 25, 1, 95, 0, 0, 1});
  for (std::size_t r = 1; r < p.size(); ++r) {
    EXPECT_GT(nonparticipation_prob(ConstRow(p, r)), nonparticipation_prob(ConstRow(p, r - 1)));
  }
}

TEST(NonParticipation, MasksWholeRows) {
  auto p = people(2000);
  auto s = make_sample(p, all_ids(p));
  apply_nonparticipation(s, p, {}, LatentDraws(3));
  std::size_t non = 0;
  double expected = 0;
  for (std::size_t r = 0; r < s.size(); ++r) {
    expected += nonparticipation_prob(ConstRow(p, r));
    if (!s.participated(r)) {
      ++non;
      for (std::size_t j = 0; j < s.width(); ++j) EXPECT_FALSE(s.observed(r, j));
    }
  }
  EXPECT_NEAR(static_cast<double>(non), expected, 4 * std::sqrt(expected));
}

TEST(Missingness, McarExtremes) {
  auto p = people(50);
  auto s = make_sample(p, all_ids(p));
  auto none = apply_missingness(s, MissingnessMechanism::mcar(0.0), {"x", "y"}, LatentDraws(1));
  auto all = apply_missingness(s, MissingnessMechanism::mcar(1.0), {"x", "y"}, LatentDraws(1));
  for (std::size_t r = 0; r < s.size(); ++r) {
    EXPECT_TRUE(none.observed(r, 5));
    EXPECT_FALSE(all.observed(r, 5));
    EXPECT_FALSE(all.observed(r, 6));
    EXPECT_TRUE(all.observed(r, 1));
  }
}

TEST(Missingness, McarFraction) {
  auto p = people(10000);
  auto s = apply_missingness(make_sample(p, all_ids(p)), MissingnessMechanism::mcar(0.3), {"x"},
                             LatentDraws(77));
  EXPECT_NEAR(1.0 - s.observed_fraction(5), 0.3, 0.014);
}

TEST(Missingness, McarIndependentOfData) {
  auto p = people(10000);
  auto s = apply_missingness(make_sample(p, all_ids(p)), MissingnessMechanism::mcar(0.3), {"x"},
                             LatentDraws(78));
  const double n = static_cast<double>(s.size());
  for (std::size_t j : {1u, 2u, 4u, 6u}) {
    double sm = 0, sx = 0, smm = 0, sxx = 0, smx = 0;
    for (std::size_t r = 0; r < s.size(); ++r) {
      const double m = s.observed(r, 5) ? 0.0 : 1.0;
      const double x = s.unmasked_value(r, j);
      sm += m, sx += x, smm += m * m, sxx += x * x, smx += m * x;
    }
    const double cov = smx / n - (sm / n) * (sx / n);
    const double corr = cov / std::sqrt((smm / n - sm * sm / n / n) * (sxx / n - sx * sx / n / n));
    EXPECT_LT(std::abs(corr), 3.0 / std::sqrt(n)) << "column " << j;
  }
}

TEST(Missingness, MarPredictorMayNotBeMasked) {
  auto p = people(10);
  auto s = make_sample(p, all_ids(p));
  LogisticMissingness model{-1.0, {{"x", 0.1}}};
  EXPECT_THROW(apply_missingness(s, MissingnessMechanism::mar(model), {"x"}, LatentDraws(1)),
               DomainError);
  auto masked = apply_missingness(s, MissingnessMechanism::mcar(1.0), {"age"}, LatentDraws(1));
  LogisticMissingness by_age{-1.0, {{"age", 0.1}}};
  EXPECT_THROW(apply_missingness(masked, MissingnessMechanism::mar(by_age), {"x"}, LatentDraws(1)),
               DomainError);
}

TEST(Missingness, MarDependsOnObservedColumn) {
  auto p = people(20000);
  LogisticMissingness model{-4.0, {{"age", 0.08}}};
  auto s = apply_missingness(make_sample(p, all_ids(p)), MissingnessMechanism::mar(model), {"x"},
                             LatentDraws(5));
  double miss_young = 0, n_young = 0, miss_old = 0, n_old = 0;
  for (std::size_t r = 0; r < s.size(); ++r) {
    const bool old = s.unmasked_value(r, 1) >= 50;
    (old ? n_old : n_young) += 1;
    (old ? miss_old : miss_young) += s.observed(r, 5) ? 0 : 1;
  }
  EXPECT_GT(miss_old / n_old, miss_young / n_young);
}

TEST(Missingness, MnarUsesOwnValueAndRowScope) {
  auto p = people(20000);
  LogisticMissingness model{-3.0, {{"y", 0.3}}};
  auto s = apply_missingness(make_sample(p, all_ids(p)),
                             MissingnessMechanism::mnar(model, MissingnessMechanism::Scope::row),
                             {"y", "x"}, LatentDraws(6));
  double hi = 0, nhi = 0, lo = 0, nlo = 0;
  for (std::size_t r = 0; r < s.size(); ++r) {
    EXPECT_EQ(s.observed(r, 5), s.observed(r, 6));
    const bool big = s.unmasked_value(r, 6) >= 8;
    (big ? nhi : nlo) += 1;
    (big ? hi : lo) += s.observed(r, 6) ? 0 : 1;
  }
  EXPECT_GT(hi / nhi, lo / nlo);
}

TEST(Missingness, MaskingKeepsTrueValues) {
  auto p = people(100);
  auto s = make_sample(p, all_ids(p));
  auto m = apply_missingness(s, MissingnessMechanism::mcar(0.5), {"x", "y", "age"}, LatentDraws(1));
  for (std::size_t r = 0; r < s.size(); ++r) {
    for (std::size_t j = 0; j < s.width(); ++j) EXPECT_EQ(m.unmasked_value(r, j), s.unmasked_value(r, j));
  }
}

TEST(MeasurementError, NoneAndRounding) {
  auto d = make_domain({{"v"}}, {});
  Population p(d);
  p.append_row(std::vector<double>{3.7});
  auto s = make_sample(p, {0});
  EXPECT_EQ(apply_error(s, "v", error_model::None{}, LatentDraws(1)).get(0, 0), 3.7);
  EXPECT_EQ(apply_error(s, "v", error_model::Rounding{1.0}, LatentDraws(1)).get(0, 0), 4.0);
  EXPECT_EQ(apply_error(s, "v", error_model::Rounding{0.5}, LatentDraws(1)).get(0, 0), 3.5);
}

TEST(MeasurementError, AdditiveNormalMoments) {
  auto d = make_domain({{"v"}}, {});
  Population p(d);
  for (int i = 0; i < 10000; ++i) p.append_row(std::vector<double>{10.0});
  auto s = apply_error(make_sample(p, all_ids(p)), "v", error_model::AdditiveNormal{2.0}, LatentDraws(13));
  double sum = 0, sq = 0;
  for (std::size_t r = 0; r < s.size(); ++r) {
    const double v = *s.get(r, 0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / 10000.0;
  const double sd = std::sqrt((sq - 10000.0 * mean * mean) / 9999.0);
  EXPECT_NEAR(mean, 10.0, 0.06);
  EXPECT_NEAR(sd, 2.0, 0.05);
}

TEST(MeasurementError, SkipsMaskedCells) {
  auto d = make_domain({{"v"}}, {});
  Population p(d);
  p.append_row(std::vector<double>{3.7});
  auto s = make_sample(p, {0});
  s.mask(0, 0);
  auto e = apply_error(s, "v", error_model::Rounding{1.0}, LatentDraws(1));
  EXPECT_FALSE(e.get(0, 0).has_value());
  EXPECT_EQ(e.unmasked_value(0, 0), 3.7);
}

TEST(FollowUp, ZeroInviteesGiveEmptySample) {
  auto p = people(10);
  auto s = make_sample(p, {}, {"age", "sex"});
  auto f = join_follow_up(s, p, {"alive"});
  EXPECT_EQ(f.size(), 0u);
  EXPECT_EQ(f.width(), 3u);
}

TEST(FollowUp, ForcedEventIsRecordedWithDay) {
  auto d = make_domain({{"age"}, {"event", ValueKind::binary}, {"event_day"}}, {});
  Population p(d);
  p.append_row(std::vector<double>{50, 0, 0});
  Simulator sim;
  sim.events.manipulations = {{"event", "", {}, {"event", "event_day"},
                               [](Row& r, const ParameterVector&, const RowDraws& psi) {
                                 if (r[1] == 0.0 && psi.uniform() < 0.5) {
                                   r.set(1, 1.0);
                                   r.set(2, static_cast<double>(psi.time()));
                                 }
                               }}};
  sim.master_seed = 0;
  // Draws force the event on step 100 only.
  State start{p, ParameterVector(d, std::vector<double>{})};
  auto forced = LatentDraws::forced(
      [](IndividualId, TimeStep t, StreamTag, std::uint32_t) { return t == 100 ? 0.0 : 0.99; });
  auto baseline = make_sample(p, {0}, {"age"});
  // Run manually with the forced draws through transition, then join.
  State s = start;
  for (TimeStep t = 1; t <= 200; ++t) s = transition(s, forced, t, sim.events, sim.order);
  auto f = join_follow_up(baseline, s.population, {"event", "event_day"});
  EXPECT_EQ(f.get(0, "event"), 1.0);
  EXPECT_EQ(f.get(0, "event_day"), 100.0);
  EXPECT_EQ(f.get(0, "age"), 50.0);
}

TEST(FollowUp, NonParticipantsContributeNothing) {
  auto p = people(300);
  auto s = make_sample(p, all_ids(p), {"age", "sex", "bmi", "smoking", "waist"});
  apply_nonparticipation(s, p, {}, LatentDraws(2));
  auto f = join_follow_up(s, p, {"y"});
  ASSERT_LT(f.participant_count(), f.size());
  for (std::size_t r = 0; r < f.size(); ++r) {
    EXPECT_EQ(f.get(r, "y").has_value(), f.participated(r));
  }
}

TEST(FollowUp, FullInvitationMatchesPopulation) {
  auto p = people(500);
  auto s = make_sample(p, all_ids(p), {"age"});
  auto f = join_follow_up(s, p, {"smoking"});
  double pop = 0, smp = 0;
  for (double v : p.column("smoking")) pop += v;
  for (std::size_t r = 0; r < f.size(); ++r) smp += *f.get(r, "smoking");
  EXPECT_EQ(incidence_per_100k(smp, 500), incidence_per_100k(pop, 500));
}

TEST(SampleIo, CsvUsesNaTokens) {
  auto d = make_domain({{"a"}, {"b"}}, {});
  Population p(d);
  p.append_row(std::vector<double>{1.5, 2});
  p.append_row(std::vector<double>{3, 4});
  auto s = make_sample(p, {0, 1});
  s.mask(1, 0);
  s.set_participated(1, false);
  std::ostringstream csv, design;
  write_sample_csv(s, csv);
  write_design_csv(s, design);
  EXPECT_EQ(csv.str(), "id,a,b\n0,1.5,2\n1,NA,4\n");
  EXPECT_EQ(design.str(), "id,invited,participated\n0,1,1\n1,1,0\n");
  std::stringstream bin;
  write_sample_psim(s, bin);
  auto back = read_psim(s.data_unchecked().shared_domain(), bin);
  EXPECT_FALSE(back.observed[0][1]);
  EXPECT_TRUE(std::isnan(back.population.value(1, 0)));
  EXPECT_EQ(back.population.value(1, 1), 4.0);
}
