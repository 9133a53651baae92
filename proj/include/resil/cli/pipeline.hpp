#pragma once

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include "resil/cli/config.hpp"
#include "resil/engines/indices.hpp"

namespace resil::cli {

struct StageTimes {
  double screening_seconds = 0.0;
  double estimation_seconds = 0.0;
};

struct RunReport {
  std::string name;
  std::string model;
  double p_threshold = 0.0;
  double radius = 0.0;
  ScreeningReport screening;
  std::vector<ScenarioIndices> rows;
  std::vector<FailurePattern> critical;
  std::size_t screening_calls = 0;
  std::size_t estimation_calls = 0;
  /// Every evaluation the instrumented model saw.
  std::size_t total_calls = 0;
  StageTimes times;
};

namespace detail {

class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(stage + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(stage + ": " + e.what());
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Ascending combined index, critical cases first; ties keep pattern order.
inline void order_rows(std::vector<ScenarioIndices>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ScenarioIndices& a, const ScenarioIndices& b) { return a.indices.combined < b.indices.combined; });
}

}  // namespace detail

/// Screening stage alone.
inline ScreeningReport run_screening(const AnalysisConfig& cfg, const StructuralModel& model, const RandomModel& rm,
                                     SurrogateNet* trained = nullptr) {
  const auto& s = cfg.screening;
  const std::uint64_t seed = derive_seed(cfg.seed, 1);
  return detail::in_stage("screening", [&] {
    switch (s.method) {
      case ScreeningMethod::sequential: {
        const auto engine = make_engine(s.engine, rm.dim());
        return sequential_search(model, rm, cfg.threshold, *engine, seed, s.sequential);
      }
      case ScreeningMethod::nball: {
        const std::size_t n =
            s.nball_samples.value_or(default_nball_samples(cfg.threshold.p_threshold(), 1e4, s.nball_per_decade));
        return nball_screen(model, rm, cfg.threshold, n, s.nball_radius_factor, seed, s.sequential.include_null);
      }
      case ScreeningMethod::adaptive: {
        AdaptiveConfig a = s.adaptive;
        a.seed = seed;
        auto rep = surrogate_adaptive_screen(model, rm, cfg.threshold, a, trained);
        if (s.include_predicted) {
          for (const auto& p : rep.predicted) {
            if (!rep.contains(p)) rep.noteworthy.push_back(p);
          }
          sort_patterns(rep.noteworthy);
          rep.occurrences.clear();
        }
        return rep;
      }
      case ScreeningMethod::enumerate: {
        ScreeningReport rep;
        rep.method = "enumerate";
        rep.noteworthy = enumerate_scenarios(model.n_components(), s.sequential.include_null);
        return rep;
      }
    }
    throw ConfigError("unknown screening method");
  });
}

/// Index estimation alone, over the given scenarios.
inline IndicesReport run_estimation(const AnalysisConfig& cfg, const StructuralModel& model, const RandomModel& rm,
                                    const std::vector<FailurePattern>& scenarios) {
  return detail::in_stage("estimation", [&] {
    const auto engine = make_engine(cfg.engine, rm.dim());
    return estimate_scenario_indices(model, rm, scenarios, cfg.threshold, *engine, derive_seed(cfg.seed, 2),
                                     cfg.engine.pi_mode);
  });
}

/// Screen, estimate the noteworthy scenarios, classify.
inline RunReport run_pipeline(const AnalysisConfig& cfg, SurrogateNet* trained = nullptr) {
  const auto base = cfg.build_model();
  const RandomModel rm = cfg.build_random_model();
  CountingModel model(*base);

  RunReport rep;
  rep.name = cfg.name;
  rep.model = cfg.model_type();
  rep.p_threshold = cfg.threshold.p_threshold();
  rep.radius = cfg.threshold.radius();

  auto t0 = std::chrono::steady_clock::now();
  rep.screening = run_screening(cfg, model, rm, trained);
  rep.times.screening_seconds = detail::seconds_since(t0);
  rep.screening_calls = model.calls();

  t0 = std::chrono::steady_clock::now();
  const auto est = run_estimation(cfg, model, rm, rep.screening.noteworthy);
  rep.times.estimation_seconds = detail::seconds_since(t0);
  rep.estimation_calls = model.calls() - rep.screening_calls;
  rep.total_calls = model.calls();

  rep.rows = est.rows;
  detail::order_rows(rep.rows);
  for (const auto& r : rep.rows) {
    if (!r.resilient) rep.critical.push_back(r.scenario);
  }
  return rep;
}

/// Estimate indices for the configured scenario list (every pattern when empty).
inline RunReport run_estimate_only(const AnalysisConfig& cfg) {
  const auto base = cfg.build_model();
  const RandomModel rm = cfg.build_random_model();
  CountingModel model(*base);

  RunReport rep;
  rep.name = cfg.name;
  rep.model = cfg.model_type();
  rep.p_threshold = cfg.threshold.p_threshold();
  rep.radius = cfg.threshold.radius();
  rep.screening.method = "given";
  rep.screening.noteworthy =
      cfg.scenarios.empty() ? enumerate_scenarios(model.n_components(), true) : cfg.scenarios;

  const auto t0 = std::chrono::steady_clock::now();
  rep.rows = run_estimation(cfg, model, rm, rep.screening.noteworthy).rows;
  detail::order_rows(rep.rows);
  rep.times.estimation_seconds = detail::seconds_since(t0);
  rep.estimation_calls = rep.total_calls = model.calls();
  for (const auto& r : rep.rows) {
    if (!r.resilient) rep.critical.push_back(r.scenario);
  }
  return rep;
}

}  // namespace resil::cli
