#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "resil/daniels.hpp"
#include "resil/engines/cross_entropy.hpp"
#include "resil/engines/indices.hpp"
#include "resil/engines/subset.hpp"

using namespace resil;

namespace {

// Components fail when x_k > t_k; inputs standard normal. The "system"
// fails once two components are down.
class LinearModel final : public StructuralModel {
 public:
  LinearModel(std::size_t dim, std::vector<double> t) : dim_(dim), t_(std::move(t)) {}
  std::size_t n_components() const override { return t_.size(); }
  std::size_t n_variables() const override { return dim_; }
  void component_margins(std::span<const double> x, std::span<double> out) const override {
    for (std::size_t k = 0; k < t_.size(); ++k) out[k] = x[k] - t_[k];
  }
  ModelOutcome simulate_from(std::span<const double>, const FailurePattern& d) const override {
    ModelOutcome o;
    o.initial_pattern = d;
    o.system_failed = d.failed_count() >= 2;
    return o;
  }
  ModelOutcome evaluate(std::span<const double> x) const override {
    std::vector<double> m(t_.size());
    component_margins(x, m);
    auto o = simulate_from(x, pattern_from_margins(m));
    o.margins = m;
    return o;
  }

 private:
  std::size_t dim_;
  std::vector<double> t_;
};

RandomModel std_normal(std::size_t d) { return RandomModel(std::vector<Marginal>(d, Marginal::normal_sd(0.0, 1.0))); }

DanielsSystem double_layer() {
  DanielsConfig c;
  c.layers = {{1.5, 1.5}, {2, 1, 1}};
  c.load = 600;
  return DanielsSystem(c);
}
RandomModel double_layer_rm() {
  return RandomModel({Marginal::normal(400, .3), Marginal::normal(400, .1), Marginal::normal(400, .35),
                      Marginal::normal(400, .2), Marginal::normal(400, .15)});
}
FailurePattern pat(ComponentMask m) { return {5, m}; }
EventQuery scenario_query(const FailurePattern& p, bool sys) { return {EventSpec::of(p), sys, PiMode::conditional}; }

double ncdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST(Budget, RequiredMcsSamples) {
  const auto n4 = required_mcs_samples(1e-4, 0.05);
  EXPECT_GE(n4, 3.9e6);
  EXPECT_LE(n4, 4.0e6);
  EXPECT_NEAR(double(required_mcs_samples(1e-5, 0.05)), 4e7, 0.01 * 4e7);
  EXPECT_EQ(required_mcs_samples(0.5, 1.0), 1u);
  EXPECT_THROW(required_mcs_samples(0.0, 0.1), DomainError);
}

TEST(Mcs, SingleLayerDanielsBar) {
  DanielsConfig c;
  c.layers = {std::vector<double>(6, 1.0)};
  c.load = 1200;
  const DanielsSystem m(c);
  const RandomModel rm(std::vector<Marginal>(6, Marginal::lognormal(400, 0.35)));
  const double sl = std::sqrt(std::log(1 + 0.35 * 0.35));
  const double p = ncdf((std::log(200.0) - (std::log(400.0) - sl * sl / 2)) / sl);
  const McsEngine e({1000000, false});
  const auto r = e.estimate(m, rm, {EventSpec(6, 1)}, 5);
  EXPECT_NEAR(r.event.probability, p, 3 * std::sqrt(p * (1 - p) / 1e6));
  EXPECT_NEAR(r.event.cov, std::sqrt((1 - p) / (1e6 * p)), 1e-3);
}

TEST(Mcs, FlaggedZero) {
  const LinearModel m(2, {50.0, 50.0});
  const auto r = McsEngine({10000, false}).estimate(m, std_normal(2), {EventSpec(2, 1)}, 1);
  EXPECT_EQ(r.event.probability, 0.0);
  EXPECT_TRUE(std::isinf(r.event.cov));
  EXPECT_TRUE(beta_from_prob(r.event.probability).unbounded);
}

TEST(Mcs, EmpiricalCovMatchesBudget) {
  const LinearModel m(1, {-std_normal_inv_cdf(1e-2)});
  const std::size_t n = required_mcs_samples(1e-2, 0.1);
  const McsEngine e({n, false});
  std::vector<double> ps;
  for (int i = 0; i < 100; ++i) ps.push_back(e.estimate(m, std_normal(1), {EventSpec(1, 1)}, 100 + i).event.probability);
  const double mean = std::accumulate(ps.begin(), ps.end(), 0.0) / ps.size();
  double v = 0;
  for (double p : ps) v += (p - mean) * (p - mean);
  const double cov = std::sqrt(v / (ps.size() - 1)) / mean;
  EXPECT_GE(cov, 0.07);
  EXPECT_LE(cov, 0.13);
}

TEST(Mcs, LatinHypercubeOption) {
  const LinearModel m(3, {1.0, 9, 9});
  const auto r = McsEngine({20000, true}).estimate(m, std_normal(3), {EventSpec(3, 1)}, 2);
  EXPECT_NEAR(r.event.probability, ncdf(-1.0), 0.005);
}

TEST(CrossEntropy, GaussianMixtureLinearTail) {
  const LinearModel m(5, {3.719, 99, 99, 99, 99});
  CeOptions o;
  o.n_per_level = 2000;
  const CeAisEngine e(o);
  const auto r = e.estimate(m, std_normal(5), {EventSpec(5, 1)}, 3);
  const double p = ncdf(-3.719);
  EXPECT_NEAR(r.event.probability, p, 2 * r.event.cov * p + 1e-12);
  EXPECT_LT(r.event.cov, 0.2);
}

TEST(CrossEntropy, VmfMixtureLinearTailHighDim) {
  const std::size_t d = 27;
  std::vector<double> t(3, 99.0);
  t[0] = 3.4;
  const LinearModel m(d, t);
  CeOptions o;
  o.family = MixtureFamily::vmf_mixture;
  o.n_per_level = 1000;
  const CeAisEngine e(o);
  const auto r = e.estimate(m, std_normal(d), {EventSpec(3, 1)}, 4);
  EXPECT_NEAR(beta_from_prob(r.event.probability).value, 3.4, 0.1);
}

TEST(CrossEntropy, AgreesWithMcsOnModerateEvents) {
  const auto m = double_layer();
  const auto rm = double_layer_rm();
  CeOptions o;
  o.n_per_level = 20000;
  const CeAisEngine ce(o);
  const McsEngine mcs({400000, false});
  for (ComponentMask s : {ComponentMask{1}, ComponentMask{4}, ComponentMask{8}}) {
    const auto a = ce.estimate(m, rm, scenario_query(pat(s), false), 7).event;
    const auto b = mcs.estimate(m, rm, scenario_query(pat(s), false), 8).event;
    const double tol = 3 * std::hypot(a.cov * a.probability, b.cov * b.probability);
    EXPECT_NEAR(a.probability, b.probability, tol) << s;
  }
}

TEST(CrossEntropy, TableOneBetasWithGaussianMixture) {
  const auto m = double_layer();
  const auto rm = double_layer_rm();
  CeOptions o;
  o.n_per_level = 100000;
  const CeAisEngine ce(o);
  const std::pair<ComponentMask, double> rows[] = {{5, 3.17}, {9, 3.44}, {1, 1.68}, {4, 2.17}, {8, 2.52}, {16, 3.35}};
  std::uint64_t seed = 10;
  for (const auto& [mask, beta] : rows) {
    const auto r = ce.estimate(m, rm, scenario_query(pat(mask), false), seed++);
    EXPECT_NEAR(beta_from_prob(r.event.probability).value, beta, 0.05) << pat(mask).label();
  }
}

TEST(Subset, LinearTailSixDims) {
  const LinearModel m(6, {4.265, 99});
  const SubsetEngine e(SubsetOptions{});
  const auto r = e.estimate(m, std_normal(6), {EventSpec(2, 1)}, 5);
  const double p = ncdf(-4.265);
  EXPECT_NEAR(r.event.probability, p, 2 * r.event.cov * p);
}

TEST(Subset, UnbiasedAcrossRepetitions) {
  const SubsetEngine e(SubsetOptions{});
  for (double beta : {2.0, 3.0, 4.0}) {
    const LinearModel m(4, {beta, 99});
    double s = 0, cov = 0;
    const int reps = 50;
    for (int i = 0; i < reps; ++i) {
      const auto r = e.estimate(m, std_normal(4), {EventSpec(2, 1)}, 1000 + i);
      s += r.event.probability;
      cov += r.event.cov;
    }
    const double mean = s / reps, p = ncdf(-beta);
    // cov of the mean of 50 runs
    EXPECT_NEAR(mean, p, 3 * (cov / reps) * p / std::sqrt(double(reps))) << beta;
  }
}

TEST(Subset, LikelyEventThroughComplement) {
  // "both survive": probability near one, estimated via its complement
  const LinearModel m(4, {2.5, 3.0});
  const double p = ncdf(2.5) * ncdf(3.0);
  const SubsetEngine e(SubsetOptions{});
  double s = 0;
  const int reps = 30;
  for (int i = 0; i < reps; ++i) {
    const auto r = e.estimate(m, std_normal(4), scenario_query(FailurePattern(2, 0), true), 300 + i);
    EXPECT_LT(r.event.cov, 0.01);
    ASSERT_TRUE(r.system_given_event);
    EXPECT_EQ(r.system_given_event->probability, 0.0);
    s += r.event.probability;
  }
  // complement 7.6e-3 with per-run cov ~0.2: the mean is good to ~3e-4
  EXPECT_NEAR(s / reps, p, 1e-3);
  EXPECT_NEAR(beta_from_prob(s / reps).value, beta_from_prob(p).value, 0.05);
}

TEST(Subset, CountsMatchInstrumentedModel) {
  const LinearModel inner(4, {3.0, 99});
  const CountingModel m(inner);
  const auto r = SubsetEngine(SubsetOptions{}).estimate(m, std_normal(4), {EventSpec(2, 1)}, 9);
  EXPECT_EQ(r.n_evaluations(), m.calls());
}

TEST(Engines, EvaluationCountsMatchInstrumentedModel) {
  const auto inner = double_layer();
  const auto rm = double_layer_rm();
  CeOptions gm;
  gm.n_per_level = 3000;
  CeOptions vm = gm;
  vm.family = MixtureFamily::vmf_mixture;
  const McsEngine mcs({5000, false});
  const CeAisEngine ce1(gm), ce2(vm);
  const SubsetEngine ss(SubsetOptions{});
  const AnalyticEngine an(2000);
  const ReliabilityEngine* engines[] = {&mcs, &ce1, &ce2, &ss, &an};
  for (const auto* e : engines) {
    for (bool sys : {false, true}) {
      const CountingModel m(inner);
      const auto r = e->estimate(m, rm, scenario_query(pat(1), sys), 11);
      EXPECT_EQ(r.n_evaluations(), m.calls()) << e->name() << " sys=" << sys;
    }
  }
}

TEST(Redundancy, RatioFormMatchesRejection) {
  const auto m = double_layer();
  const auto rm = double_layer_rm();
  // rejection oracle: keep samples whose pattern is {C3}, count collapses
  Rng rng(21);
  std::size_t kept = 0, sys = 0;
  std::vector<double> u(5), x(5);
  for (int i = 0; i < 2000000; ++i) {
    for (auto& v : u) v = rng.normal();
    rm.to_physical(u, x);
    const auto o = m.evaluate(x);
    if (o.initial_pattern.failed == 4) {
      ++kept;
      sys += o.system_failed;
    }
  }
  const double p_ref = double(sys) / kept;
  const double sd_ref = std::sqrt(p_ref * (1 - p_ref) / kept);
  const auto q = scenario_query(pat(4), true);
  const auto a = McsEngine({2000000, false}).estimate(m, rm, q, 22).system_given_event;
  const auto b = AnalyticEngine(200000).estimate(m, rm, q, 23).system_given_event;
  ASSERT_TRUE(a && b);
  EXPECT_NEAR(a->probability, p_ref, 3 * std::hypot(sd_ref, a->cov * a->probability));
  EXPECT_NEAR(b->probability, p_ref, 3 * std::hypot(sd_ref, b->cov * b->probability));
}

TEST(Indices, TableOneCaseFourAndShading) {
  const auto m = double_layer();
  const auto rm = double_layer_rm();
  const auto t = ResilienceThreshold::direct(1e-4);
  const AnalyticEngine e(400000);
  const auto rep = estimate_scenario_indices(m, rm, {pat(4), pat(2)}, t, e, 1);
  ASSERT_EQ(rep.rows.size(), 2u);
  const auto& c4 = rep.rows[0].indices;
  EXPECT_NEAR(c4.beta.value, 2.17, 0.05);
  ASSERT_TRUE(c4.pi);
  EXPECT_NEAR(c4.pi->value, 2.57, 0.05);
  EXPECT_NEAR(c4.combined, 3.79, 0.05);
  // C2 alone: far beyond the threshold, pi is not computed
  EXPECT_TRUE(rep.rows[1].trivial);
  EXPECT_FALSE(rep.rows[1].indices.pi);
  EXPECT_TRUE(rep.rows[1].resilient);

  const CountingModel cm(m);
  const auto none = estimate_scenario_indices(cm, rm, {}, t, e, 1);
  EXPECT_TRUE(none.rows.empty());
  EXPECT_EQ(none.n_evaluations, 0u);
  EXPECT_EQ(cm.calls(), 0u);
}

TEST(Indices, ImposedDamageMode) {
  const auto m = double_layer();
  const auto rm = double_layer_rm();
  const auto t = ResilienceThreshold::direct(1e-4);
  const AnalyticEngine e(1000);
  const auto rep = estimate_scenario_indices(m, rm, {pat(1)}, t, e, 1, PiMode::imposed_damage);
  ASSERT_TRUE(rep.rows[0].indices.pi);
  // with C1 removed, C2 carries 600/1.5 = 400 against N(400, 40): about half collapse
  EXPECT_NEAR(ncdf(-rep.rows[0].indices.pi->value), 0.5, 0.05);
}
