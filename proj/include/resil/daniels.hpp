#pragma once

#include <limits>
#include <numeric>
#include <vector>

#include "resil/model.hpp"

namespace resil {

enum class Redistribution {
  single_step,  // survivors of each layer are re-checked once
  full,         // iterate until no further bar fails
};

/// Bundles of perfectly brittle bars. Layers act in series so every layer
/// carries the full load; within a layer the load is shared equally by the
/// intact bars. A layer whose bars have all failed is a system failure.
struct DanielsConfig {
  std::vector<std::vector<double>> layers;  // bar areas per layer
  double load = 0.0;
  Redistribution redistribution = Redistribution::single_step;

  void validate() const {
    if (layers.empty()) throw ConfigError("daniels: at least one layer required");
    for (const auto& l : layers) {
      if (l.empty()) throw ConfigError("daniels: every layer needs at least one bar");
      for (double a : l) {
        if (!(a > 0.0)) throw ConfigError("daniels: bar areas must be positive");
      }
    }
    if (!(load >= 0.0) || !std::isfinite(load)) throw ConfigError("daniels: load must be finite and >= 0");
    std::size_t n = 0;
    for (const auto& l : layers) n += l.size();
    if (n > kMaxComponents) throw ConfigError("daniels: too many bars");
  }
};

class DanielsSystem final : public StructuralModel {
 public:
  explicit DanielsSystem(DanielsConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (std::size_t l = 0; l < cfg_.layers.size(); ++l) {
      for (double a : cfg_.layers[l]) {
        layer_of_.push_back(l);
        area_.push_back(a);
      }
    }
    intact_stress_.resize(area_.size());
    for (std::size_t k = 0; k < area_.size(); ++k) {
      intact_stress_[k] = cfg_.load / static_cast<double>(cfg_.layers[layer_of_[k]].size()) / area_[k];
    }
  }

  const DanielsConfig& config() const noexcept { return cfg_; }
  std::size_t n_components() const override { return area_.size(); }
  std::size_t n_variables() const override { return area_.size(); }
  double intact_stress(std::size_t k) const { return intact_stress_.at(k); }

  void component_margins(std::span<const double> x, std::span<double> out) const override {
    check(x);
    for (std::size_t k = 0; k < area_.size(); ++k) out[k] = intact_stress_[k] - x[k];
  }

  ModelOutcome simulate_from(std::span<const double> x, const FailurePattern& damage) const override {
    check(x);
    if (damage.n_components != n_components()) throw DomainError("daniels: damage pattern size mismatch");
    ModelOutcome out;
    out.initial_pattern = damage;
    std::vector<bool> failed(area_.size());
    for (std::size_t k = 0; k < area_.size(); ++k) failed[k] = damage.has_failed(k);

    std::size_t first = 0;
    for (const auto& layer : cfg_.layers) {
      const std::size_t n = layer.size();
      bool changed = true;
      while (changed) {
        changed = false;
        std::size_t survivors = 0;
        for (std::size_t j = 0; j < n; ++j) survivors += failed[first + j] ? 0U : 1U;
        if (survivors == 0) break;
        const double share = cfg_.load / static_cast<double>(survivors);
        std::vector<std::size_t> newly;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = first + j;
          if (!failed[k] && x[k] < share / area_[k]) newly.push_back(k);
        }
        for (auto k : newly) {
          failed[k] = true;
          out.cascade_trace.push_back(k);
        }
        changed = !newly.empty() && cfg_.redistribution == Redistribution::full;
      }
      bool all = true;
      for (std::size_t j = 0; j < n; ++j) all = all && failed[first + j];
      out.system_failed = out.system_failed || all;
      first += n;
    }
    return out;
  }

  ModelOutcome evaluate(std::span<const double> x) const override {
    std::vector<double> m(area_.size());
    component_margins(x, m);
    auto out = simulate_from(x, pattern_from_margins(m));
    out.margins = std::move(m);
    return out;
  }

  /// Bar k fails iff its yield is below the intact stress, i.e. iff
  /// u_k < Phi^-1(F_k(stress_k)) when the yields are independent.
  std::optional<std::vector<double>> separable_thresholds(const RandomModel& rm) const override {
    if (!rm.independent() || rm.dim() != n_variables()) return std::nullopt;
    std::vector<double> t(area_.size());
    for (std::size_t k = 0; k < area_.size(); ++k) {
      const auto& m = rm.marginals()[k];
      if (m.kind == MarginalKind::lognormal && intact_stress_[k] <= 0.0) {
        t[k] = -std::numeric_limits<double>::infinity();
      } else {
        t[k] = m.to_standard(intact_stress_[k]);
      }
    }
    return t;
  }

 private:
  void check(std::span<const double> x) const {
    if (x.size() != area_.size()) throw DomainError("daniels: realization length must equal the bar count");
  }

  DanielsConfig cfg_;
  std::vector<std::size_t> layer_of_;
  std::vector<double> area_;
  std::vector<double> intact_stress_;
};

}  // namespace resil
