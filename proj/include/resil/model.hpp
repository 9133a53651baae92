#pragma once

#include <algorithm>
#include <atomic>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "resil/random_model.hpp"
#include "resil/scenarios.hpp"

namespace resil {

/// Result of one structural analysis of a realization.
struct ModelOutcome {
  FailurePattern initial_pattern;
  bool system_failed = false;
  /// Components (0-based) failed during redistribution, in failure order.
  std::vector<std::size_t> cascade_trace;
  /// Intact-state margins; filled by evaluate(), empty from simulate_from().
  std::vector<double> margins;
};

/// Deterministic structural evaluator over physical-space realizations x.
///
/// Each of component_margins, evaluate and simulate_from counts as one model
/// call ("structural analysis") in the simulation ledgers.
class StructuralModel {
 public:
  virtual ~StructuralModel() = default;

  virtual std::size_t n_components() const = 0;
  virtual std::size_t n_variables() const = 0;

  /// Intact-configuration margins, demand minus capacity; component k is in
  /// the initial pattern iff out[k] > 0.
  virtual void component_margins(std::span<const double> x, std::span<double> out) const = 0;

  /// Redistribution starting from an imposed damage state.
  virtual ModelOutcome simulate_from(std::span<const double> x, const FailurePattern& damage) const = 0;

  /// Initial pattern from the intact state followed by the cascade.
  virtual ModelOutcome evaluate(std::span<const double> x) const = 0;

  /// Separable component limit states: when every component k fails iff
  /// u_k < t_k in independent standard-normal space, returns the t_k. Lets
  /// engines use closed-form event probabilities and exact conditional
  /// sampling.
  virtual std::optional<std::vector<double>> separable_thresholds(const RandomModel&) const {
    return std::nullopt;
  }

  std::vector<double> component_margins(std::span<const double> x) const {
    std::vector<double> m(n_components());
    component_margins(x, m);
    return m;
  }
};

/// Pattern of the components whose margins are positive.
inline FailurePattern pattern_from_margins(std::span<const double> margins) {
  ComponentMask m = 0;
  for (std::size_t k = 0; k < margins.size(); ++k) {
    if (margins[k] > 0.0) m |= component_bit(k);
  }
  return {margins.size(), m};
}

/// Scalar event driver: the event holds iff driver > 0. Minimum over the
/// required-failed margins and the negated required-survived margins.
inline double event_driver(const EventSpec& e, std::span<const double> margins) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < e.n_components; ++k) {
    if ((e.required_failed >> k) & 1U) g = std::min(g, margins[k]);
    if ((e.required_survived >> k) & 1U) g = std::min(g, -margins[k]);
  }
  return g;
}

inline bool event_holds(const EventSpec& e, std::span<const double> margins) {
  for (std::size_t k = 0; k < e.n_components; ++k) {
    const bool failed = margins[k] > 0.0;
    if (((e.required_failed >> k) & 1U) && !failed) return false;
    if (((e.required_survived >> k) & 1U) && failed) return false;
  }
  return true;
}

/// Pass-through wrapper counting every model call.
class CountingModel final : public StructuralModel {
 public:
  explicit CountingModel(const StructuralModel& inner) : inner_(inner) {}

  std::size_t n_components() const override { return inner_.n_components(); }
  std::size_t n_variables() const override { return inner_.n_variables(); }
  void component_margins(std::span<const double> x, std::span<double> out) const override {
    ++calls_;
    inner_.component_margins(x, out);
  }
  ModelOutcome simulate_from(std::span<const double> x, const FailurePattern& damage) const override {
    ++calls_;
    return inner_.simulate_from(x, damage);
  }
  ModelOutcome evaluate(std::span<const double> x) const override {
    ++calls_;
    return inner_.evaluate(x);
  }
  std::optional<std::vector<double>> separable_thresholds(const RandomModel& rm) const override {
    return inner_.separable_thresholds(rm);
  }

  std::size_t calls() const noexcept { return calls_.load(); }
  void reset() noexcept { calls_ = 0; }

 private:
  const StructuralModel& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace resil
