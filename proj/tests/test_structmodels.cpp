#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "resil/daniels.hpp"
#include "resil/random_model.hpp"
#include "resil/sampling.hpp"
#include "resil/shear_frame.hpp"
#include "resil/truss.hpp"

using namespace resil;

namespace {

DanielsConfig double_layer() {
  DanielsConfig c;
  c.layers = {{1.5, 1.5}, {2, 1, 1}};
  c.load = 600;
  return c;
}

RandomModel double_layer_rm() {
  return RandomModel({Marginal::normal(400, .3), Marginal::normal(400, .1), Marginal::normal(400, .35),
                      Marginal::normal(400, .2), Marginal::normal(400, .15)});
}

double ncdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Independent plane-truss solver used as the oracle: dense global matrix,
// penalty-free row/column elimination, LU solve.
std::vector<double> oracle_stresses(const TrussConfig& c, const std::vector<double>& factor, const Eigen::VectorXd& f) {
  const int n = static_cast<int>(2 * c.nodes.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < c.members.size(); ++e) {
    const auto& m = c.members[e];
    const double dx = c.nodes[m.node_j].x - c.nodes[m.node_i].x, dy = c.nodes[m.node_j].y - c.nodes[m.node_i].y;
    const double L = std::hypot(dx, dy), cs = dx / L, sn = dy / L;
    Eigen::Vector4d t(-cs, -sn, cs, sn);
    const Eigen::Matrix4d ke = factor[e] * m.modulus * m.area / L * t * t.transpose();
    const int d[4] = {int(2 * m.node_i), int(2 * m.node_i + 1), int(2 * m.node_j), int(2 * m.node_j + 1)};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) K(d[a], d[b]) += ke(a, b);
  }
  std::vector<int> fixed(n, 0);
  for (const auto& s : c.supports) fixed[2 * s.node + static_cast<int>(s.dof)] = 1;
  std::vector<int> freed;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) freed.push_back(i);
  const int nf = static_cast<int>(freed.size());
  Eigen::MatrixXd Kf(nf, nf);
  Eigen::VectorXd ff(nf);
  for (int i = 0; i < nf; ++i) {
    ff(i) = f(freed[i]);
    for (int j = 0; j < nf; ++j) Kf(i, j) = K(freed[i], freed[j]);
  }
  const Eigen::VectorXd uf = Kf.fullPivLu().solve(ff);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < nf; ++i) u(freed[i]) = uf(i);
  std::vector<double> s;
  for (std::size_t e = 0; e < c.members.size(); ++e) {
    const auto& m = c.members[e];
    const double dx = c.nodes[m.node_j].x - c.nodes[m.node_i].x, dy = c.nodes[m.node_j].y - c.nodes[m.node_i].y;
    const double L = std::hypot(dx, dy);
    const double du = u(2 * m.node_j) - u(2 * m.node_i), dv = u(2 * m.node_j + 1) - u(2 * m.node_i + 1);
    s.push_back(factor[e] * m.modulus * (dx * du + dy * dv) / (L * L));
  }
  return s;
}

// Indeterminate two-bay test truss: 3 pinned bases, 2 free nodes, 6 bars.
TrussConfig small_truss() {
  TrussConfig c;
  c.nodes = {{0, 0}, {4, 0}, {8, 0}, {2, 3}, {6, 3}};
  const double A = 1e-4, E = 70e9;
  c.members = {{0, 3, A, E}, {1, 3, A, E}, {1, 4, A, E}, {2, 4, A, E}, {3, 4, A, E}, {0, 4, A, E}};
  for (std::size_t n : {0u, 1u, 2u}) {
    c.supports.push_back({n, Dof::x});
    c.supports.push_back({n, Dof::y});
  }
  c.loads = {{3, Dof::x, 0, 0.0, 1.0}, {3, Dof::y, 1, 0.0, -1.0}, {4, Dof::x, 2, 0.0, 1.0}};
  for (int k = 0; k < 6; ++k) c.yields.push_back({std::size_t{3}, 0.0, 1.0});
  c.n_variables = 4;
  c.damage_stiffness_factor = 0.5;
  c.system_rule = MaxFailedCountRule{2};
  return c;
}

}  // namespace

TEST(Daniels, UnbreakableAndZeroStrength) {
  const DanielsSystem m(double_layer());
  auto out = m.evaluate(std::vector<double>(5, 1e6));
  EXPECT_TRUE(out.initial_pattern.is_null());
  EXPECT_FALSE(out.system_failed);
  out = m.evaluate(std::vector<double>(5, 1e-9));
  EXPECT_EQ(out.initial_pattern.failed, full_mask(5));
  EXPECT_TRUE(out.system_failed);
  EXPECT_THROW(m.evaluate(std::vector<double>(4, 1.0)), DomainError);
}

TEST(Daniels, CaseThreeBetaAgainstClosedForm) {
  const DanielsSystem m(double_layer());
  const auto rm = double_layer_rm();
  // intact stresses 200, 200, 100, 200, 200
  const double s[5] = {200, 200, 100, 200, 200};
  const double sd[5] = {120, 40, 140, 80, 60};
  double p = ncdf((s[0] - 400) / sd[0]);
  for (int k = 1; k < 5; ++k) p *= 1 - ncdf((s[k] - 400) / sd[k]);
  EXPECT_NEAR(-std_normal_inv_cdf(p), 1.68, 0.01);

  Rng rng(1);
  const int n = 400000;
  int hits = 0;
  std::vector<double> u(5), x(5);
  for (int i = 0; i < n; ++i) {
    for (auto& v : u) v = rng.normal();
    rm.to_physical(u, x);
    hits += m.evaluate(x).initial_pattern.failed == 1 ? 1 : 0;
  }
  const double ph = double(hits) / n;
  EXPECT_NEAR(ph, p, 3 * std::sqrt(p * (1 - p) / n));
  // separable closed form agrees
  const auto t = m.separable_thresholds(rm);
  ASSERT_TRUE(t);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR((*t)[k], (s[k] - 400) / sd[k], 1e-12);
}

TEST(Daniels, SingleLayerBarProbability) {
  DanielsConfig c;
  c.layers = {std::vector<double>(6, 1.0)};
  c.load = 1200;
  const DanielsSystem m(c);
  const RandomModel rm(std::vector<Marginal>(6, Marginal::lognormal(400, 0.35)));
  const double sl = std::sqrt(std::log(1 + 0.35 * 0.35));
  const double p = ncdf((std::log(200.0) - (std::log(400.0) - sl * sl / 2)) / sl);
  EXPECT_NEAR(-std_normal_inv_cdf(p), 1.87, 0.01);
  Rng rng(2);
  const int n = 200000;
  int hits = 0;
  std::vector<double> u(6), x(6);
  for (int i = 0; i < n; ++i) {
    for (auto& v : u) v = rng.normal();
    rm.to_physical(u, x);
    hits += m.evaluate(x).initial_pattern.has_failed(2) ? 1 : 0;
  }
  EXPECT_NEAR(double(hits) / n, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Daniels, CascadeMonotoneAndBounded) {
  for (auto red : {Redistribution::single_step, Redistribution::full}) {
    auto c = double_layer();
    c.redistribution = red;
    const DanielsSystem m(c);
    const auto rm = double_layer_rm();
    Rng rng(3);
    std::vector<double> u(5), x(5);
    for (int i = 0; i < 20000; ++i) {
      for (auto& v : u) v = 1.5 * rng.normal();
      rm.to_physical(u, x);
      const auto out = m.evaluate(x);
      std::set<std::size_t> seen;
      for (auto k : out.cascade_trace) {
        ASSERT_FALSE(out.initial_pattern.has_failed(k));
        ASSERT_TRUE(seen.insert(k).second);
      }
      ASSERT_LE(out.cascade_trace.size(), 5u);
      // determinism
      const auto again = m.evaluate(x);
      ASSERT_EQ(again.cascade_trace, out.cascade_trace);
      ASSERT_EQ(again.system_failed, out.system_failed);
    }
  }
}

TEST(Truss, PatchTestSingleBar) {
  TrussConfig c;
  c.nodes = {{0, 0}, {2.5, 0}};
  c.members = {{0, 1, 3e-4, 2.1e11}};
  c.supports = {{0, Dof::x}, {0, Dof::y}, {1, Dof::y}};
  c.loads = {{1, Dof::x, 0, 0.0, 1.0}};
  c.yields = {{std::nullopt, 1e12, 1.0}};
  c.n_variables = 1;
  const TrussModel m(c);
  const auto sol = m.linear_solve(0, m.nodal_forces(std::vector<double>{12345.0}));
  ASSERT_TRUE(sol.stable);
  EXPECT_NEAR(sol.stresses[0], 12345.0 / 3e-4, 1e-10 * 12345.0 / 3e-4);
  const auto zero = m.linear_solve(0, m.nodal_forces(std::vector<double>{0.0}));
  EXPECT_EQ(zero.stresses[0], 0.0);
}

TEST(Truss, UnstableIntactIsConfigError) {
  TrussConfig c;
  c.nodes = {{0, 0}, {1, 0}, {1, 1}};
  c.members = {{0, 1, 1e-4, 2e11}, {1, 2, 1e-4, 2e11}};
  c.supports = {{0, Dof::x}, {0, Dof::y}, {1, Dof::y}};
  c.yields = {{std::nullopt, 1.0, 1.0}, {std::nullopt, 1.0, 1.0}};
  EXPECT_THROW(TrussModel m(c), ConfigError);
}

TEST(Truss, DamagedSolveMatchesIndependentOracle) {
  const auto c = small_truss();
  const TrussModel m(c);
  const std::vector<double> x = {4000, 9000, 2500, 250e6};
  const auto f = m.nodal_forces(x);
  for (ComponentMask dmg : {ComponentMask{0}, ComponentMask{0b000101}, ComponentMask{0b110000}}) {
    std::vector<double> factor(6, 1.0);
    for (int k = 0; k < 6; ++k)
      if ((dmg >> k) & 1U) factor[k] = 0.5;
    const auto ref = oracle_stresses(c, factor, f);
    const auto sol = m.linear_solve(dmg, f);
    ASSERT_TRUE(sol.stable);
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(sol.stresses[k], ref[k], 1e-8 * std::fabs(ref[k]) + 1e-6);
  }
}

TEST(Truss, CompressionCountsAgainstYield) {
  const auto c = small_truss();
  const TrussModel m(c);
  const std::vector<double> x = {-4000, 9000, -2500, 1.0};
  const auto margins = static_cast<const StructuralModel&>(m).component_margins(x);
  const auto sol = m.linear_solve(0, m.nodal_forces(x));
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(margins[k], std::fabs(sol.stresses[k]) - 1.0, 1e-6);
}

TEST(Truss, YieldScalingEmptiesPattern) {
  const auto c = small_truss();
  const TrussModel m(c);
  std::vector<double> x = {4000, 9000, 2500, 1.0};
  const auto sol = m.linear_solve(0, m.nodal_forces(x));
  double umax = 0;
  for (double s : sol.stresses) umax = std::max(umax, std::fabs(s));
  EXPECT_GT(m.evaluate(x).initial_pattern.failed_count(), 0u);
  x[3] = 1.01 * umax;
  EXPECT_TRUE(m.evaluate(x).initial_pattern.is_null());
}

TEST(Truss, CascadeMonotoneAndCountRule) {
  const auto c = small_truss();
  const TrussModel m(c);
  Rng rng(4);
  for (int i = 0; i < 3000; ++i) {
    const std::vector<double> x = {4000 * (1 + rng.normal()), 9000 * (1 + rng.normal()), 2500 * (1 + rng.normal()),
                                   60e6 * (1 + 0.3 * rng.normal())};
    const auto out = m.evaluate(x);
    std::set<std::size_t> seen;
    for (auto k : out.cascade_trace) {
      ASSERT_FALSE(out.initial_pattern.has_failed(k));
      ASSERT_TRUE(seen.insert(k).second);
    }
    ASSERT_LE(out.cascade_trace.size(), 6u);
    if (out.initial_pattern.failed_count() > 2) { ASSERT_TRUE(out.system_failed); }
    if (out.initial_pattern.failed_count() + out.cascade_trace.size() <= 2) { ASSERT_FALSE(out.system_failed); }
  }
}

TEST(Truss, RuptureTurnsDeterminateDamageIntoMechanism) {
  // statically determinate triangle: damage alone never changes forces
  TrussConfig c;
  c.nodes = {{0, 0}, {4, 0}, {2, 2}};
  c.members = {{0, 1, 1e-4, 2e11}, {0, 2, 1e-4, 2e11}, {1, 2, 1e-4, 2e11}};
  c.supports = {{0, Dof::x}, {0, Dof::y}, {1, Dof::y}};
  c.loads = {{2, Dof::y, 0, 0.0, -1.0}};
  c.yields = std::vector<YieldSource>(3, {std::nullopt, 100e6, 1.0});
  c.n_variables = 1;
  const TrussModel plain(c);
  const std::vector<double> x = {16000.0};  // diagonal stress ~ 113 MPa
  auto out = plain.evaluate(x);
  EXPECT_EQ(out.initial_pattern.failed, 0b110u);
  EXPECT_FALSE(out.system_failed);
  c.rupture_ratio = 1.05;
  const TrussModel brittle(c);
  out = brittle.evaluate(x);
  EXPECT_TRUE(out.system_failed);
}

TEST(ShearFrame, ZeroAndHugeForces) {
  ShearFrameConfig c;
  c.stories = {{8e4, 2e4, 600, 4}, {6e4, 2e4, 500, 4}, {4e4, 2e4, 400, 4}};
  c.force_variable = {0, 1, 2};
  c.force_scale = {1, 1, 1};
  c.n_variables = 3;
  const ShearFrameModel m(c);
  auto out = m.evaluate(std::vector<double>{0, 0, 0});
  EXPECT_TRUE(out.initial_pattern.is_null());
  EXPECT_FALSE(out.system_failed);
  out = m.evaluate(std::vector<double>{1e9, 1e9, 1e9});
  EXPECT_EQ(out.initial_pattern.failed, 0b111u);
  EXPECT_TRUE(out.system_failed);
  // story shear accumulates from the roof down
  const auto v = m.story_shears(std::vector<double>{1, 2, 3});
  EXPECT_EQ(v, (std::vector<double>{6, 5, 3}));
  // damage softens the structure
  const std::vector<double> x = {100, 100, 100};
  EXPECT_GT(m.roof_drift_ratio(x, 0b111), m.roof_drift_ratio(x, 0));
}
