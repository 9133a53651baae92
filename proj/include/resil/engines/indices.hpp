#pragma once

#include <cstdint>
#include <vector>

#include "resil/engines/estimate.hpp"
#include "resil/resilience.hpp"

namespace resil {

struct ScenarioIndices {
  FailurePattern scenario;
  ResilienceIndices indices;
  bool trivial = false;
  bool resilient = true;
  std::size_t n_evaluations = 0;
};

struct IndicesReport {
  std::vector<ScenarioIndices> rows;
  std::size_t n_evaluations = 0;
};

/// beta per scenario, pi only where beta does not already clear the radius.
inline IndicesReport estimate_scenario_indices(const StructuralModel& model, const RandomModel& rm,
                                               const std::vector<FailurePattern>& scenarios,
                                               const ResilienceThreshold& threshold, const ReliabilityEngine& engine,
                                               std::uint64_t seed, PiMode pi_mode = PiMode::conditional) {
  IndicesReport rep;
  std::uint64_t stream = 0;
  for (const auto& s : scenarios) {
    if (s.n_components != model.n_components()) throw DomainError("scenario size does not match the model");
    const EventSpec ev = EventSpec::of(s);
    EventQuery q{ev, false, pi_mode};
    auto est = engine.estimate(model, rm, q, derive_seed(seed, stream++));
    ScenarioIndices row{s, resilience_indices(est.event.as_probability(), std::nullopt), false, true, est.n_evaluations()};
    row.trivial = check_trivial(row.indices.beta.value, threshold);
    if (!row.trivial) {
      q.want_system_failure = true;
      // Re-estimating jointly keeps beta and pi on the same sample set.
      est = engine.estimate(model, rm, q, derive_seed(seed, stream++));
      row.n_evaluations += est.n_evaluations();
      std::optional<ProbabilityEstimate> ps;
      if (est.system_given_event) ps = est.system_given_event->as_probability();
      row.indices = resilience_indices(est.event.as_probability(), ps);
    }
    row.resilient = check_resilient(row.indices, threshold);
    rep.n_evaluations += row.n_evaluations;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace resil
