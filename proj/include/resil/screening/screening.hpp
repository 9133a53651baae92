#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "resil/engines/estimate.hpp"
#include "resil/resilience.hpp"
#include "resil/sampling.hpp"

namespace resil {

/// Per-iteration diagnostics of an adaptive screen.
struct ScreeningIteration {
  std::size_t iteration = 0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  double convergence_ratio = 0.0;
  std::size_t n_model_calls = 0;
  std::size_t epochs = 0;
  double final_loss = 0.0;
};

/// One event estimated during sequential search.
struct SearchedEvent {
  std::size_t phase = 0;
  EventSpec event;
  double beta = 0.0;
  double cov = 0.0;
  std::size_t n_evaluations = 0;
  bool excluded = false;
};

struct ScreeningReport {
  std::string method;
  std::vector<FailurePattern> noteworthy;
  std::vector<EventSpec> excluded_events;
  std::size_t n_model_calls = 0;
  std::size_t n_surrogate_calls = 0;
  std::vector<ScreeningIteration> history;
  std::vector<SearchedEvent> searched;
  /// Surrogate screens only: patterns predicted over the probe set.
  std::vector<FailurePattern> predicted;
  /// n-ball screens: occurrence count per observed pattern (same order as noteworthy).
  std::vector<std::size_t> occurrences;
  std::vector<std::string> warnings;

  bool contains(const FailurePattern& p) const {
    return std::find(noteworthy.begin(), noteworthy.end(), p) != noteworthy.end();
  }
};

/// Patterns ordered by failure count, then mask.
inline void sort_patterns(std::vector<FailurePattern>& v) {
  std::sort(v.begin(), v.end(), [](const FailurePattern& a, const FailurePattern& b) {
    const auto ca = std::popcount(a.failed);
    const auto cb = std::popcount(b.failed);
    return ca != cb ? ca < cb : a.failed < b.failed;
  });
}

struct SequentialOptions {
  /// Also report the intact (null) pattern; it is never trivial in practice
  /// and some reference counts include it.
  bool include_null = false;
  std::size_t max_order = kMaxComponents;
};

namespace detail {

template <class Fn>
auto with_context(const std::string& ctx, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(ctx + ": " + e.what());
  }
}

}  // namespace detail

/// Phase-wise search over joint component-failure events. An event whose
/// probability is below the threshold is excluded together with every event
/// containing it; the surviving events are the noteworthy scenarios.
inline ScreeningReport sequential_search(const StructuralModel& model, const RandomModel& rm,
                                         const ResilienceThreshold& threshold, const ReliabilityEngine& engine,
                                         std::uint64_t seed, const SequentialOptions& opt = {}) {
  const std::size_t n = model.n_components();
  CountingModel counted(model);
  ScreeningReport rep;
  rep.method = "sequential";
  std::vector<ComponentMask> kept;

  auto estimate = [&](std::size_t phase, ComponentMask mask) {
    const EventSpec ev(n, mask, 0);
    const auto est = detail::with_context("sequential search phase " + std::to_string(phase) + " event " + ev.label(),
                                          [&] { return engine.estimate(counted, rm, EventQuery{ev}, derive_seed(seed, mask)); });
    const Index b = beta_from_prob(est.event.probability);
    SearchedEvent s{phase, ev, b.value, est.event.cov, est.n_evaluations(), check_trivial(b.value, threshold)};
    rep.searched.push_back(s);
    if (s.excluded) {
      rep.excluded_events.push_back(ev);
    } else {
      kept.push_back(mask);
    }
  };

  for (std::size_t k = 0; k < n; ++k) estimate(1, component_bit(k));
  std::vector<ComponentMask> all_kept = kept;
  for (std::size_t m = 2; m <= std::min(n, opt.max_order) && kept.size() >= m; ++m) {
    const std::set<ComponentMask> prev(kept.begin(), kept.end());
    std::set<ComponentMask> candidates;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        const ComponentMask u = kept[i] | kept[j];
        if (static_cast<std::size_t>(std::popcount(u)) != m) continue;
        bool ok = true;
        for (ComponentMask rest = u; rest && ok; rest &= rest - 1) {
          ok = prev.count(u & ~(rest & -rest)) > 0;
        }
        if (ok) candidates.insert(u);
      }
    }
    kept.clear();
    for (auto c : candidates) estimate(m, c);
    all_kept.insert(all_kept.end(), kept.begin(), kept.end());
  }

  if (opt.include_null) rep.noteworthy.emplace_back(n, 0);
  for (auto m : all_kept) rep.noteworthy.emplace_back(n, m);
  sort_patterns(rep.noteworthy);
  rep.n_model_calls = counted.calls();
  return rep;
}

/// Default n-ball sample count: 10^4 scaled with -log10(p_threshold) / 4.
inline std::size_t default_nball_samples(double p_threshold, double base = 1e4, double per_decade = 0.25) {
  const double decades = -std::log10(p_threshold);
  return static_cast<std::size_t>(std::llround(base * std::max(1.0, per_decade * decades)));
}

/// Uniform sampling inside the ball of radius radius_factor * R in standard
/// normal space; every distinct non-null initial pattern observed is
/// noteworthy.
inline ScreeningReport nball_screen(const StructuralModel& model, const RandomModel& rm,
                                    const ResilienceThreshold& threshold, std::size_t n_samples, double radius_factor,
                                    std::uint64_t seed, bool include_null = false) {
  if (n_samples == 0) throw ConfigError("n-ball: n_samples must be at least 1");
  if (!(radius_factor >= 1.0)) throw ConfigError("n-ball: radius_factor must be >= 1");
  const std::size_t n = model.n_components();
  CountingModel counted(model);
  const double radius = radius_factor * threshold.radius();
  Rng rng(seed);
  std::vector<double> u(rm.dim());
  std::vector<double> x(rm.dim());
  std::vector<double> margins(n);
  std::map<ComponentMask, std::size_t> seen;
  for (std::size_t i = 0; i < n_samples; ++i) {
    sample_shell_point(rng, 0.0, radius, u);
    rm.to_physical(u, x);
    counted.component_margins(x, margins);
    const auto p = pattern_from_margins(margins);
    if (include_null || !p.is_null()) ++seen[p.failed];
  }
  ScreeningReport rep;
  rep.method = "nball";
  for (const auto& [m, c] : seen) rep.noteworthy.emplace_back(n, m);
  sort_patterns(rep.noteworthy);
  for (const auto& p : rep.noteworthy) rep.occurrences.push_back(seen[p.failed]);
  rep.n_model_calls = counted.calls();
  return rep;
}

}  // namespace resil
