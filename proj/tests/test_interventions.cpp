#include <gtest/gtest.h>

#include "msim/interventions/salt.hpp"

using namespace msim;

namespace {

DomainPtr bp_domain() {
  return make_domain({{"x"}, {"sbp"}, {"marker"}, {"alive", ValueKind::binary},
                      {"salt_advice", ValueKind::binary}},
                     {"threshold", "p_die"}, "alive");
}

State bp_state(std::vector<double> sbp, const DomainPtr& d = bp_domain()) {
  Population p(d);
  for (std::size_t i = 0; i < sbp.size(); ++i) {
    p.append_row(std::vector<double>{static_cast<double>(i), sbp[i], 0.0, 1.0, 0.0});
  }
  return {p, ParameterVector(d, std::map<std::string, double>{{"threshold", 140}, {"p_die", 0.01}})};
}

Simulator bp_simulator() {
  Simulator sim;
  sim.master_seed = 31;
  sim.events.manipulations = {
      {"sbp-drift", "", {}, {"sbp"},
       [](Row& r, const ParameterVector&, const RowDraws& psi) {
         if (r.get("alive") == 1.0) r.set("sbp", r.get("sbp") + (psi.uniform() - 0.5) * 0.1);
       }},
      {"x-walk", "", {}, {"x"},
       [](Row& r, const ParameterVector&, const RowDraws& psi) {
         if (r.get("alive") == 1.0) r.set("x", r.get("x") + psi.uniform());
       }},
      {"death", "", {"p_die"}, {"alive"},
       [](Row& r, const ParameterVector& th, const RowDraws& psi) {
         if (r.get("alive") == 1.0 && psi.uniform() < th.at("p_die")) r.set("alive", 0.0);
       }},
  };
  sim.trackers = {Tracker::count("n", [](const ConstRow&, TimeStep) { return true; })};
  return sim;
}

std::vector<double> col(const Population& p, std::string_view name) {
  auto c = p.column(name);
  return {c.begin(), c.end()};
}

}  // namespace

TEST(Intervene, DoSetsColumn) {
  auto s = bp_state({120, 130, 140, 150});
  auto out = intervene(s, DoIntervention{0, "x", DoIntervention::constant(3.0), {}}, LatentDraws(1), 0);
  EXPECT_EQ(col(out.population, "x"), (std::vector<double>{3, 3, 3, 3}));
  EXPECT_EQ(col(out.population, "sbp"), col(s.population, "sbp"));
}

TEST(Intervene, DoRespectsTarget) {
  auto s = bp_state({120, 150});
  DoIntervention d{0, "marker", DoIntervention::constant(1.0),
                   [](const ConstRow& r) { return r.get("sbp") >= 140; }};
  auto out = intervene(s, d, LatentDraws(1), 0);
  EXPECT_EQ(col(out.population, "marker"), (std::vector<double>{0, 1}));
}

TEST(Intervene, PolicyChangesOnlyTheta) {
  auto s = bp_state({120, 150});
  auto out = intervene(s, PolicyChange{0, {{"threshold", 130}}}, LatentDraws(1), 0);
  EXPECT_EQ(out.population, s.population);
  EXPECT_EQ(out.theta.at("threshold"), 130.0);
  EXPECT_EQ(out.theta.at("p_die"), 0.01);
}

TEST(Intervene, UndeclaredNamesFail) {
  auto s = bp_state({120});
  EXPECT_THROW(intervene(s, DoIntervention{0, "nope", DoIntervention::constant(1), {}},
                         LatentDraws(1), 0),
               DomainError);
  EXPECT_THROW(intervene(s, PolicyChange{0, {{"nope", 1}}}, LatentDraws(1), 0), DomainError);
  Scenario sc{"bad", RunPlan(5), {PolicyChange{9, {{"p_die", 0.0}}}}};
  EXPECT_THROW(run_scenario(bp_simulator(), s, sc), DomainError);
}

TEST(Intervene, PopulationChangeAddsRowsOnceAtItsStep) {
  auto s = bp_state(std::vector<double>(40, 130.0));
  AccumulationEvent five{"arrivals", "",
                         [](const ParameterVector&, const RowDraws&) { return std::size_t{5}; },
                         [](const ParameterVector&, const AccumulationDraws&, std::size_t k) {
                           return RowBlock(k, std::vector<double>{0, 120, 0, 1, 0});
                         }};
  Scenario base{"base", RunPlan(20), {}};
  Scenario with{"with", RunPlan(20), {PopulationChange{10, {}, {five}}}};
  for (std::size_t k : {1u, 3u}) {
    base.plan.partitions = with.plan.partitions = k;
    auto recs = run_counterfactuals(bp_simulator(), s, {base, with});
    const auto& a = recs[0].tracker("n").values;
    const auto& b = recs[1].tracker("n").values;
    for (TimeStep t = 1; t <= 20; ++t) {
      EXPECT_EQ(b[t - 1] - a[t - 1], t >= 10 ? 5.0 : 0.0) << "t=" << t;
    }
  }
}

TEST(Counterfactuals, NullScenariosAreIdentical) {
  auto s = bp_state({120, 150, 160, 135, 145});
  Scenario a{"a", RunPlan(30, SnapshotPolicy::every_k(10)), {}};
  auto recs = run_counterfactuals(bp_simulator(), s, {a, a});
  EXPECT_EQ(recs[0].final_state, recs[1].final_state);
  ASSERT_EQ(recs[0].snapshots.size(), recs[1].snapshots.size());
  for (std::size_t i = 0; i < recs[0].snapshots.size(); ++i) {
    EXPECT_EQ(recs[0].snapshots[i].state, recs[1].snapshots[i].state);
  }
}

TEST(Counterfactuals, NoOpDoIsIdentity) {
  auto s = bp_state({120, 150, 160});
  Scenario a{"a", RunPlan(30), {}};
  Scenario b{"b", RunPlan(30),
             {DoIntervention{0, "x", [](const ConstRow& r) { return r.get("x"); }, {}}}};
  auto recs = run_counterfactuals(bp_simulator(), s, {a, b});
  EXPECT_EQ(recs[0].final_state, recs[1].final_state);
}

TEST(Counterfactuals, DoPersistsAgainstEvents) {
  auto s = bp_state({120, 150, 160});
  Scenario b{"b", RunPlan(15), {DoIntervention{5, "x", DoIntervention::constant(-1.0), {}}}};
  auto rec = run_scenario(bp_simulator(), s, b);
  for (std::size_t r = 0; r < rec.final_state.population.size(); ++r) {
    EXPECT_EQ(rec.final_state.population.value(r, "x"), -1.0);
  }
}

TEST(Counterfactuals, NonDownstreamColumnsArePaired) {
  // "marker" feeds no event; everything else must match at every snapshot.
  auto s = bp_state({120, 150, 160, 170, 110, 145});
  Scenario a{"a", RunPlan(20, SnapshotPolicy::every_k(5)), {}};
  Scenario b{"b", RunPlan(20, SnapshotPolicy::every_k(5)),
             {DoIntervention{3, "marker", DoIntervention::constant(7.0), {}}}};
  auto recs = run_counterfactuals(bp_simulator(), s, {a, b});
  for (std::size_t i = 0; i < recs[0].snapshots.size(); ++i) {
    const auto& pa = recs[0].snapshots[i].state.population;
    const auto& pb = recs[1].snapshots[i].state.population;
    for (auto name : {"x", "sbp", "alive", "salt_advice"}) {
      EXPECT_EQ(col(pa, name), col(pb, name)) << name;
    }
  }
}

TEST(Salt, IndustryLowersEveryone) {
  auto out = salt_industry(bp_state({120, 150}));
  EXPECT_DOUBLE_EQ(out.population.value(0, "sbp"), 119.03);
  EXPECT_DOUBLE_EQ(out.population.value(1, "sbp"), 149.03);
}

TEST(Salt, AdviceWithForcedCompliance) {
  // Individual 0 complies (draw below 0.5), individual 1 does not.
  auto draws = LatentDraws::forced(
      [](IndividualId id, TimeStep, StreamTag, std::uint32_t) { return id == 0 ? 0.1 : 0.9; });
  auto out = salt_advice(bp_state({150, 150}), draws);
  EXPECT_EQ(col(out.population, "sbp"), (std::vector<double>{148.0, 150.0}));
  EXPECT_EQ(col(out.population, "salt_advice"), (std::vector<double>{1.0, 0.0}));
}

TEST(Salt, AdviceWithEmptyTarget) {
  auto s = bp_state({120, 130});
  EXPECT_EQ(salt_advice(s, LatentDraws(3)).population, s.population);
}

TEST(Salt, AdviceCompliesAboutHalf) {
  auto s = bp_state(std::vector<double>(20000, 150.0));
  auto out = salt_advice(s, LatentDraws(8));
  double c = 0;
  for (double v : out.population.column("salt_advice")) c += v;
  EXPECT_NEAR(c / 20000.0, 0.5, 3 * std::sqrt(0.25 / 20000));
}

TEST(Salt, IndustryShiftInsideRunIsExact) {
  auto s = bp_state({120, 150, 160, 135});
  Scenario base{"base", RunPlan(0, SnapshotPolicy::every_k(1)), {}};
  Scenario ind{"industry", RunPlan(0, SnapshotPolicy::every_k(1)),
               {PopulationChange{0, {salt_industry_event(s.population.domain())}, {}}}};
  auto recs = run_counterfactuals(bp_simulator(), s, {base, ind});
  const auto a = col(recs[0].final_state.population, "sbp");
  const auto b = col(recs[1].final_state.population, "sbp");
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b[i], a[i] + -0.97);
}
