#pragma once

#include <cmath>
#include <vector>

#include "resil/model.hpp"

namespace resil {

/// One story of the shear-building stand-in: a group of strong columns plus
/// the single weak column that is the component of interest.
struct ShearStory {
  double strong_stiffness = 0.0;  // kN/m, all strong columns together
  double weak_stiffness = 0.0;    // kN/m
  double weak_capacity = 0.0;     // kN, shear the weak column can carry
  double height = 0.0;            // m
};

/// Lateral floor forces come from realization entries (one variable per
/// floor, scaled); story i carries the sum of the forces at floors i..top.
struct ShearFrameConfig {
  std::vector<ShearStory> stories;
  std::vector<std::size_t> force_variable;  // per floor
  std::vector<double> force_scale;          // per floor, defaults to 1
  std::size_t n_variables = 0;
  double damage_stiffness_factor = 0.5;
  double roof_drift_limit = 0.10;

  void validate() const {
    if (stories.empty() || stories.size() > kMaxComponents) throw ConfigError("shear frame: 1..64 stories required");
    for (const auto& s : stories) {
      if (!(s.strong_stiffness >= 0.0) || !(s.weak_stiffness > 0.0) || !(s.weak_capacity > 0.0) ||
          !(s.height > 0.0)) {
        throw ConfigError("shear frame: story stiffness, capacity and height must be positive");
      }
    }
    if (force_variable.size() != stories.size()) throw ConfigError("shear frame: one force variable per floor");
    for (auto v : force_variable) {
      if (v >= n_variables) throw ConfigError("shear frame: force variable index out of range");
    }
    if (!force_scale.empty() && force_scale.size() != stories.size()) {
      throw ConfigError("shear frame: force_scale must have one entry per floor");
    }
    if (!(damage_stiffness_factor >= 0.0 && damage_stiffness_factor <= 1.0)) {
      throw ConfigError("shear frame: damage_stiffness_factor must lie in [0,1]");
    }
    if (!(roof_drift_limit > 0.0)) throw ConfigError("shear frame: roof_drift_limit must be positive");
  }
};

class ShearFrameModel final : public StructuralModel {
 public:
  explicit ShearFrameModel(ShearFrameConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.force_scale.empty()) cfg_.force_scale.assign(cfg_.stories.size(), 1.0);
    for (const auto& s : cfg_.stories) total_height_ += s.height;
  }

  const ShearFrameConfig& config() const noexcept { return cfg_; }
  std::size_t n_components() const override { return cfg_.stories.size(); }
  std::size_t n_variables() const override { return cfg_.n_variables; }

  std::vector<double> story_shears(std::span<const double> x) const {
    check(x);
    const std::size_t n = cfg_.stories.size();
    std::vector<double> v(n, 0.0);
    double acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      acc += cfg_.force_scale[i] * x[cfg_.force_variable[i]];
      v[i] = acc;
    }
    return v;
  }

  double roof_drift_ratio(std::span<const double> x, ComponentMask damage) const {
    const auto v = story_shears(x);
    double disp = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) disp += v[i] / story_stiffness(i, (damage >> i) & 1U);
    return std::fabs(disp) / total_height_;
  }

  void component_margins(std::span<const double> x, std::span<double> out) const override {
    const auto v = story_shears(x);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = weak_demand(i, v[i], false) - cfg_.stories[i].weak_capacity;
  }

  ModelOutcome simulate_from(std::span<const double> x, const FailurePattern& damage) const override {
    if (damage.n_components != n_components()) throw DomainError("shear frame: damage pattern size mismatch");
    const auto v = story_shears(x);
    ModelOutcome out;
    out.initial_pattern = damage;
    ComponentMask damaged = damage.failed;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if ((damaged >> i) & 1U) continue;
        if (weak_demand(i, v[i], false) > cfg_.stories[i].weak_capacity) {
          damaged |= component_bit(i);
          out.cascade_trace.push_back(i);
          changed = true;
        }
      }
    }
    out.system_failed = roof_drift_ratio(x, damaged) > cfg_.roof_drift_limit;
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
  double story_stiffness(std::size_t i, bool damaged) const {
    const auto& s = cfg_.stories[i];
    return s.strong_stiffness + s.weak_stiffness * (damaged ? cfg_.damage_stiffness_factor : 1.0);
  }
  /// Weak-column shear: its stiffness share of the story shear.
  double weak_demand(std::size_t i, double shear, bool damaged) const {
    const auto& s = cfg_.stories[i];
    const double kw = s.weak_stiffness * (damaged ? cfg_.damage_stiffness_factor : 1.0);
    return std::fabs(shear) * kw / story_stiffness(i, damaged);
  }
  void check(std::span<const double> x) const {
    if (x.size() != cfg_.n_variables) throw DomainError("shear frame: realization length mismatch");
  }

  ShearFrameConfig cfg_;
  double total_height_ = 0.0;
};

}  // namespace resil
