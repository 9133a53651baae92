#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resil/errors.hpp"

namespace resil {

using ComponentMask = std::uint64_t;
inline constexpr std::size_t kMaxComponents = 64;

inline ComponentMask component_bit(std::size_t k) { return ComponentMask{1} << k; }

inline ComponentMask full_mask(std::size_t n) {
  return n >= 64 ? ~ComponentMask{0} : (component_bit(n) - 1);
}

/// Fully specified initial-disruption scenario: every component is either
/// failed (bit set) or survived. Identity is the failed-bitset integer.
struct FailurePattern {
  std::size_t n_components = 0;
  ComponentMask failed = 0;

  FailurePattern() = default;
  FailurePattern(std::size_t n, ComponentMask mask) : n_components(n), failed(mask) {
    if (n == 0 || n > kMaxComponents) throw DomainError("failure pattern: component count must be 1..64");
    if ((mask & ~full_mask(n)) != 0) throw DomainError("failure pattern: mask has bits beyond n_components");
  }

  static FailurePattern from_components(std::size_t n, const std::vector<std::size_t>& failed_zero_based) {
    ComponentMask m = 0;
    for (auto k : failed_zero_based) {
      if (k >= n) throw DomainError("failure pattern: component index out of range");
      m |= component_bit(k);
    }
    return {n, m};
  }

  bool is_null() const noexcept { return failed == 0; }
  bool has_failed(std::size_t k) const noexcept { return (failed >> k) & 1U; }
  std::size_t failed_count() const noexcept { return static_cast<std::size_t>(std::popcount(failed)); }
  ComponentMask survived() const noexcept { return ~failed & full_mask(n_components); }

  /// Failed components, 1-based, ascending.
  std::vector<std::size_t> failed_components() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n_components; ++k) {
      if (has_failed(k)) out.push_back(k + 1);
    }
    return out;
  }

  /// "C1 C3" style label with survivals omitted; "none" for the null pattern.
  std::string label() const {
    if (is_null()) return "none";
    std::string s;
    for (auto k : failed_components()) {
      if (!s.empty()) s += ' ';
      s += 'C' + std::to_string(k);
    }
    return s;
  }

  friend bool operator==(const FailurePattern&, const FailurePattern&) = default;
  friend auto operator<=>(const FailurePattern& a, const FailurePattern& b) {
    if (auto c = a.n_components <=> b.n_components; c != 0) return c;
    return a.failed <=> b.failed;
  }
};

/// Partial joint event: components that must fail and components that must
/// survive; unmentioned components are unconstrained.
struct EventSpec {
  std::size_t n_components = 0;
  ComponentMask required_failed = 0;
  ComponentMask required_survived = 0;

  EventSpec() = default;
  EventSpec(std::size_t n, ComponentMask fail, ComponentMask survive = 0)
      : n_components(n), required_failed(fail), required_survived(survive) {
    if (n == 0 || n > kMaxComponents) throw DomainError("event: component count must be 1..64");
    if (((fail | survive) & ~full_mask(n)) != 0) throw DomainError("event: mask has bits beyond n_components");
    if ((fail & survive) != 0) throw DomainError("event: a component cannot be required to both fail and survive");
  }

  /// The full-pattern event: exhaustive masks.
  static EventSpec of(const FailurePattern& p) { return {p.n_components, p.failed, p.survived()}; }

  bool is_full_pattern() const noexcept {
    return (required_failed | required_survived) == full_mask(n_components);
  }
  std::size_t order() const noexcept { return static_cast<std::size_t>(std::popcount(required_failed)); }

  std::string label() const {
    std::string s;
    for (std::size_t k = 0; k < n_components; ++k) {
      if ((required_failed >> k) & 1U) s += (s.empty() ? "C" : " C") + std::to_string(k + 1);
      if ((required_survived >> k) & 1U) s += (s.empty() ? "~C" : " ~C") + std::to_string(k + 1);
    }
    return s.empty() ? "any" : s;
  }

  friend bool operator==(const EventSpec&, const EventSpec&) = default;
};

/// True iff the pattern satisfies every requirement of the event.
inline bool event_contains(const EventSpec& event, const FailurePattern& pattern) {
  if (event.n_components != pattern.n_components) {
    throw DomainError("event_contains: component counts differ");
  }
  return (pattern.failed & event.required_failed) == event.required_failed &&
         (pattern.failed & event.required_survived) == 0;
}

inline constexpr std::size_t kMaxEnumerableComponents = 30;

/// All 2^n MECE patterns in ascending mask order (the null pattern first
/// when included).
inline std::vector<FailurePattern> enumerate_scenarios(std::size_t n_components, bool include_null) {
  if (n_components == 0) throw DomainError("enumerate_scenarios: need at least one component");
  if (n_components > kMaxEnumerableComponents) {
    throw DomainError("enumerate_scenarios: " + std::to_string(n_components) +
                      " components give too many scenarios to enumerate; use a screening method");
  }
  const ComponentMask total = component_bit(n_components);
  std::vector<FailurePattern> out;
  out.reserve(static_cast<std::size_t>(total));
  for (ComponentMask m = include_null ? 0 : 1; m < total; ++m) out.emplace_back(n_components, m);
  return out;
}

}  // namespace resil
