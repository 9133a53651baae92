#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "resil/model.hpp"

namespace resil {

struct TrussNode {
  double x = 0.0;
  double y = 0.0;
};

struct TrussMember {
  std::size_t node_i = 0;
  std::size_t node_j = 0;
  double area = 0.0;     // m^2
  double modulus = 0.0;  // Pa
};

enum class Dof : std::size_t { x = 0, y = 1 };

struct TrussSupport {
  std::size_t node = 0;
  Dof dof = Dof::x;
};

/// A nodal force entry. The magnitude is either the realization x[variable]
/// (scaled) or a constant; units follow the model (N).
struct TrussLoad {
  std::size_t node = 0;
  Dof dof = Dof::x;
  std::optional<std::size_t> variable;
  double value = 0.0;  // constant magnitude when no variable
  double scale = 1.0;  // multiplies the variable; sign gives direction
};

/// Member yield strength source: a random variable (scaled) or a constant (Pa).
struct YieldSource {
  std::optional<std::size_t> variable;
  double value = 0.0;
  double scale = 1.0;
};

struct InstabilityRule {};
struct MaxFailedCountRule {
  std::size_t max_failed = 0;  // system fails when more members are damaged
};
struct DriftLimitRule {
  std::size_t node = 0;
  Dof dof = Dof::x;
  double height = 1.0;
  double limit = 0.1;  // |displacement| / height
};
using SystemRule = std::variant<InstabilityRule, MaxFailedCountRule, DriftLimitRule>;

struct TrussConfig {
  std::vector<TrussNode> nodes;
  std::vector<TrussMember> members;
  std::vector<TrussSupport> supports;
  std::vector<TrussLoad> loads;
  std::vector<YieldSource> yields;  // one per member
  std::size_t n_variables = 0;
  double damage_stiffness_factor = 0.2;
  /// Damaged members whose |stress| exceeds this multiple of their yield
  /// strength rupture (zero stiffness). Unset: damaged members never rupture.
  std::optional<double> rupture_ratio;
  SystemRule system_rule = InstabilityRule{};
  double condition_limit = 1e12;

  void validate() const;
};

struct TrussSolution {
  bool stable = true;
  double condition_estimate = 0.0;
  double relative_residual = 0.0;
  Eigen::VectorXd displacements;  // 2 * n_nodes, zeros at supports
  std::vector<double> stresses;   // Pa, tension positive
};

inline void TrussConfig::validate() const {
  if (nodes.size() < 2) throw ConfigError("truss: at least two nodes required");
  if (members.empty() || members.size() > kMaxComponents) throw ConfigError("truss: 1..64 members required");
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto& m = members[k];
    const std::string at = "truss: member " + std::to_string(k + 1);
    if (m.node_i >= nodes.size() || m.node_j >= nodes.size() || m.node_i == m.node_j) {
      throw ConfigError(at + " has invalid nodes");
    }
    if (!(m.area > 0.0) || !(m.modulus > 0.0)) throw ConfigError(at + " needs positive area and modulus");
    const double dx = nodes[m.node_j].x - nodes[m.node_i].x;
    const double dy = nodes[m.node_j].y - nodes[m.node_i].y;
    if (!(std::hypot(dx, dy) > 0.0)) throw ConfigError(at + " has zero length");
  }
  for (const auto& s : supports) {
    if (s.node >= nodes.size()) throw ConfigError("truss: support on unknown node");
  }
  for (const auto& l : loads) {
    if (l.node >= nodes.size()) throw ConfigError("truss: load on unknown node");
    if (l.variable && *l.variable >= n_variables) throw ConfigError("truss: load variable index out of range");
  }
  if (yields.size() != members.size()) throw ConfigError("truss: one yield source per member required");
  for (const auto& y : yields) {
    if (y.variable && *y.variable >= n_variables) throw ConfigError("truss: yield variable index out of range");
  }
  if (!(damage_stiffness_factor >= 0.0 && damage_stiffness_factor <= 1.0)) {
    throw ConfigError("truss: damage_stiffness_factor must lie in [0,1]");
  }
  if (rupture_ratio && !(*rupture_ratio > 0.0)) throw ConfigError("truss: rupture_ratio must be positive");
  if (const auto* d = std::get_if<DriftLimitRule>(&system_rule)) {
    if (d->node >= nodes.size() || !(d->height > 0.0) || !(d->limit > 0.0)) {
      throw ConfigError("truss: invalid drift rule");
    }
  }
}

/// Plane truss of linear bar elements with stiffness-degrading member damage.
class TrussModel final : public StructuralModel {
 public:
  explicit TrussModel(TrussConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::size_t ndof = 2 * cfg_.nodes.size();
    std::vector<bool> fixed(ndof, false);
    for (const auto& s : cfg_.supports) fixed[2 * s.node + static_cast<std::size_t>(s.dof)] = true;
    free_index_.assign(ndof, -1);
    for (std::size_t i = 0; i < ndof; ++i) {
      if (!fixed[i]) {
        free_index_[i] = static_cast<long>(free_dofs_.size());
        free_dofs_.push_back(i);
      }
    }
    if (free_dofs_.empty()) throw ConfigError("truss: every degree of freedom is constrained");
    for (const auto& m : cfg_.members) {
      const double dx = cfg_.nodes[m.node_j].x - cfg_.nodes[m.node_i].x;
      const double dy = cfg_.nodes[m.node_j].y - cfg_.nodes[m.node_i].y;
      const double len = std::hypot(dx, dy);
      geometry_.push_back({dx / len, dy / len, len});
    }
    std::vector<double> unit(cfg_.members.size(), 1.0);
    const auto probe = solve_factors(unit, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof)));
    if (!probe.stable) throw ConfigError("truss: intact structure is unstable under its supports");
    // Intact stresses are linear in the nodal forces; cache the influence
    // matrix so margin evaluation is a matrix-vector product.
    influence_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg_.members.size()), static_cast<Eigen::Index>(ndof));
    for (std::size_t i : free_dofs_) {
      Eigen::VectorXd unit_force = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof));
      unit_force(static_cast<Eigen::Index>(i)) = 1.0;
      const auto sol = solve_factors(unit, unit_force);
      for (std::size_t e = 0; e < cfg_.members.size(); ++e) {
        influence_(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i)) = sol.stresses[e];
      }
    }
  }

  const TrussConfig& config() const noexcept { return cfg_; }
  std::size_t n_components() const override { return cfg_.members.size(); }
  std::size_t n_variables() const override { return cfg_.n_variables; }

  Eigen::VectorXd nodal_forces(std::span<const double> x) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * cfg_.nodes.size()));
    for (const auto& l : cfg_.loads) {
      const double v = l.variable ? l.scale * x[*l.variable] : l.value;
      f(static_cast<Eigen::Index>(2 * l.node + static_cast<std::size_t>(l.dof))) += v;
    }
    return f;
  }

  double yield_strength(std::span<const double> x, std::size_t k) const {
    const auto& y = cfg_.yields[k];
    return y.variable ? y.scale * x[*y.variable] : y.value;
  }

  /// Linear solve with damaged members scaled by the damage factor.
  TrussSolution linear_solve(ComponentMask damage, const Eigen::VectorXd& forces) const {
    std::vector<double> factors(cfg_.members.size(), 1.0);
    for (std::size_t k = 0; k < factors.size(); ++k) {
      if ((damage >> k) & 1U) factors[k] = cfg_.damage_stiffness_factor;
    }
    return solve_factors(factors, forces);
  }

  void component_margins(std::span<const double> x, std::span<double> out) const override {
    check(x);
    const Eigen::VectorXd stress = influence_ * nodal_forces(x);
    for (std::size_t k = 0; k < n_components(); ++k) {
      out[k] = std::fabs(stress(static_cast<Eigen::Index>(k))) - yield_strength(x, k);
    }
  }

  ModelOutcome simulate_from(std::span<const double> x, const FailurePattern& damage) const override {
    check(x);
    if (damage.n_components != n_components()) throw DomainError("truss: damage pattern size mismatch");
    ModelOutcome out;
    out.initial_pattern = damage;
    const Eigen::VectorXd f = nodal_forces(x);
    std::vector<double> factors(n_components(), 1.0);
    ComponentMask damaged = damage.failed;
    for (std::size_t k = 0; k < n_components(); ++k) {
      if (damage.has_failed(k)) factors[k] = cfg_.damage_stiffness_factor;
    }
    // Each pass damages or ruptures at least one member, so the loop is
    // bounded by twice the member count.
    for (std::size_t iter = 0; iter <= 2 * n_components(); ++iter) {
      if (rule_triggered_by_count(damaged)) {
        out.system_failed = true;
        return out;
      }
      const auto sol = solve_factors(factors, f);
      if (!sol.stable) {
        // A mechanism is a collapse under every rule.
        out.system_failed = true;
        return out;
      }
      if (const auto* d = std::get_if<DriftLimitRule>(&cfg_.system_rule)) {
        const double disp = sol.displacements(static_cast<Eigen::Index>(2 * d->node + static_cast<std::size_t>(d->dof)));
        if (std::fabs(disp) / d->height > d->limit) {
          out.system_failed = true;
          return out;
        }
      }
      bool changed = false;
      for (std::size_t k = 0; k < n_components(); ++k) {
        const double s = std::fabs(sol.stresses[k]);
        const double fy = yield_strength(x, k);
        if (!((damaged >> k) & 1U)) {
          if (s > fy) {
            damaged |= component_bit(k);
            factors[k] = cfg_.damage_stiffness_factor;
            out.cascade_trace.push_back(k);
            changed = true;
          }
        } else if (cfg_.rupture_ratio && factors[k] > 0.0 && s > *cfg_.rupture_ratio * fy) {
          factors[k] = 0.0;
          changed = true;
        }
      }
      if (!changed) return out;
    }
    return out;
  }

  ModelOutcome evaluate(std::span<const double> x) const override {
    std::vector<double> m(n_components());
    component_margins(x, m);
    auto out = simulate_from(x, pattern_from_margins(m));
    out.margins = std::move(m);
    return out;
  }

 private:
  struct Geometry {
    double c;
    double s;
    double length;
  };

  bool rule_triggered_by_count(ComponentMask damaged) const {
    if (const auto* r = std::get_if<MaxFailedCountRule>(&cfg_.system_rule)) {
      return static_cast<std::size_t>(std::popcount(damaged)) > r->max_failed;
    }
    return false;
  }

  void check(std::span<const double> x) const {
    if (x.size() != cfg_.n_variables) throw DomainError("truss: realization length mismatch");
  }

  TrussSolution solve_factors(const std::vector<double>& factors, const Eigen::VectorXd& forces) const {
    const auto nf = static_cast<Eigen::Index>(free_dofs_.size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nf, nf);
    for (std::size_t e = 0; e < cfg_.members.size(); ++e) {
      if (factors[e] == 0.0) continue;
      const auto& m = cfg_.members[e];
      const auto& g = geometry_[e];
      const double ke = factors[e] * m.modulus * m.area / g.length;
      const double t[4] = {-g.c, -g.s, g.c, g.s};
      const std::size_t dofs[4] = {2 * m.node_i, 2 * m.node_i + 1, 2 * m.node_j, 2 * m.node_j + 1};
      for (int a = 0; a < 4; ++a) {
        const long ia = free_index_[dofs[a]];
        if (ia < 0) continue;
        for (int b = 0; b < 4; ++b) {
          const long ib = free_index_[dofs[b]];
          if (ib < 0) continue;
          k(ia, ib) += ke * t[a] * t[b];
        }
      }
    }
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index i = 0; i < nf; ++i) rhs(i) = forces(static_cast<Eigen::Index>(free_dofs_[static_cast<std::size_t>(i)]));

    TrussSolution sol;
    sol.displacements = Eigen::VectorXd::Zero(forces.size());
    sol.stresses.assign(cfg_.members.size(), 0.0);
    // Scale to unit diagonal so the condition estimate reflects geometry,
    // not the magnitude of E*A/L.
    Eigen::VectorXd dscale(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
      const double dii = k(i, i);
      if (!(dii > 0.0)) {
        sol.stable = false;
        sol.condition_estimate = std::numeric_limits<double>::infinity();
        return sol;
      }
      dscale(i) = 1.0 / std::sqrt(dii);
    }
    const Eigen::MatrixXd ks = dscale.asDiagonal() * k * dscale.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(ks);
    if (llt.info() != Eigen::Success) {
      sol.stable = false;
      sol.condition_estimate = std::numeric_limits<double>::infinity();
      return sol;
    }
    const double rc = llt.rcond();
    sol.condition_estimate = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(sol.condition_estimate <= cfg_.condition_limit)) {
      sol.stable = false;
      return sol;
    }
    const Eigen::VectorXd us = llt.solve(dscale.asDiagonal() * rhs);
    const Eigen::VectorXd u = dscale.asDiagonal() * us;
    const double fnorm = rhs.norm();
    sol.relative_residual = fnorm > 0.0 ? (k * u - rhs).norm() / fnorm : (k * u).norm();
    for (Eigen::Index i = 0; i < nf; ++i) sol.displacements(static_cast<Eigen::Index>(free_dofs_[static_cast<std::size_t>(i)])) = u(i);
    for (std::size_t e = 0; e < cfg_.members.size(); ++e) {
      const auto& m = cfg_.members[e];
      const auto& g = geometry_[e];
      const double du = sol.displacements(static_cast<Eigen::Index>(2 * m.node_j)) -
                        sol.displacements(static_cast<Eigen::Index>(2 * m.node_i));
      const double dv = sol.displacements(static_cast<Eigen::Index>(2 * m.node_j + 1)) -
                        sol.displacements(static_cast<Eigen::Index>(2 * m.node_i + 1));
      sol.stresses[e] = factors[e] * m.modulus * (g.c * du + g.s * dv) / g.length;
    }
    return sol;
  }

  TrussConfig cfg_;
  std::vector<std::size_t> free_dofs_;
  std::vector<long> free_index_;
  std::vector<Geometry> geometry_;
  Eigen::MatrixXd influence_;
};

}  // namespace resil
