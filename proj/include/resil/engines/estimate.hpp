#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "resil/model.hpp"
#include "resil/random_model.hpp"
#include "resil/resilience.hpp"
#include "resil/sampling.hpp"
#include "resil/scenarios.hpp"

namespace resil {

/// How the system-failure probability given a scenario is defined.
enum class PiMode {
  /// P(F_sys and F_i) / P(F_i): realizations are drawn from the input
  /// distribution restricted to the scenario, then cascaded.
  conditional,
  /// The scenario's damage is imposed on the structure and the input is
  /// drawn unconditionally before cascading.
  imposed_damage,
};

struct EventQuery {
  EventSpec target;
  bool want_system_failure = false;
  PiMode pi_mode = PiMode::conditional;
  /// Sample size for imposed-damage redundancy estimates.
  std::size_t imposed_samples = 100000;
};

struct EstimateResult {
  double probability = 0.0;
  double cov = 0.0;
  std::size_t n_evaluations = 0;
  std::string method;

  bool flagged_zero() const noexcept { return probability == 0.0; }
  ProbabilityEstimate as_probability() const { return {probability, cov}; }
};

struct EventEstimate {
  EstimateResult event;
  std::optional<EstimateResult> system_given_event;

  std::size_t n_evaluations() const noexcept {
    return event.n_evaluations + (system_given_event ? system_given_event->n_evaluations : 0);
  }
};

/// Estimator of intact-state event probabilities (and optionally the
/// system-failure probability given the event).
class ReliabilityEngine {
 public:
  virtual ~ReliabilityEngine() = default;
  virtual std::string name() const = 0;
  virtual EventEstimate estimate(const StructuralModel& model, const RandomModel& rm, const EventQuery& query,
                                 std::uint64_t seed) const = 0;
};

/// Eq.-style MCS budget: N = ceil((1 - p) / (eta^2 p)).
inline std::size_t required_mcs_samples(double p_target, double eta) {
  if (!(p_target > 0.0 && p_target < 1.0)) throw DomainError("required_mcs_samples: p_target must lie in (0,1)");
  if (!(eta > 0.0)) throw DomainError("required_mcs_samples: eta must be positive");
  const double n = (1.0 - p_target) / (eta * eta * p_target);
  // Guard the ceiling against representation error (e.g. 0.9999999999).
  const double r = std::round(n);
  return static_cast<std::size_t>(std::fabs(n - r) < 1e-9 * std::max(1.0, r) ? r : std::ceil(n));
}

/// Indicator-mean estimate and its coefficient of variation.
inline EstimateResult binomial_estimate(std::size_t hits, std::size_t n, std::size_t calls, std::string method) {
  EstimateResult r;
  r.method = std::move(method);
  r.n_evaluations = calls;
  if (n == 0 || hits == 0) {
    r.probability = 0.0;
    r.cov = std::numeric_limits<double>::infinity();
    return r;
  }
  r.probability = static_cast<double>(hits) / static_cast<double>(n);
  r.cov = std::sqrt((1.0 - r.probability) / (static_cast<double>(n) * r.probability));
  return r;
}

/// Redundancy under imposed damage: x from the prior, damage fixed.
inline EstimateResult estimate_imposed_damage(const StructuralModel& model, const RandomModel& rm,
                                              const FailurePattern& damage, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(rm.dim());
  std::vector<double> x(rm.dim());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : u) v = rng.normal();
    rm.to_physical(u, x);
    hits += model.simulate_from(x, damage).system_failed ? 1U : 0U;
  }
  return binomial_estimate(hits, n, n, "mcs-imposed");
}

inline FailurePattern pattern_of(const EventSpec& e) {
  if (!e.is_full_pattern()) throw DomainError("imposed-damage redundancy needs a fully specified scenario");
  return {e.n_components, e.required_failed};
}

struct McsOptions {
  std::size_t n_samples = 100000;
  bool latin_hypercube = false;
};

/// Crude Monte Carlo. Conditioning on the event uses the ratio of joint to
/// marginal counts from the same sample set.
class McsEngine final : public ReliabilityEngine {
 public:
  explicit McsEngine(McsOptions opts = {}) : opts_(opts) {
    if (opts_.n_samples == 0) throw ConfigError("mcs: n_samples must be at least 1");
  }
  std::string name() const override { return "mcs"; }

  EventEstimate estimate(const StructuralModel& model, const RandomModel& rm, const EventQuery& q,
                         std::uint64_t seed) const override {
    const std::size_t n = opts_.n_samples;
    const bool joint = q.want_system_failure && q.pi_mode == PiMode::conditional;
    Rng rng(seed);
    Eigen::MatrixXd lhs;
    if (opts_.latin_hypercube && n >= 2) lhs = sample_lhs(rm.dim(), n, derive_seed(seed, 1));
    std::vector<double> u(rm.dim());
    std::vector<double> x(rm.dim());
    std::vector<double> margins(model.n_components());
    std::size_t hits = 0;
    std::size_t sys_hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (lhs.size() > 0) {
        for (std::size_t j = 0; j < u.size(); ++j) {
          u[j] = lhs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      } else {
        for (double& v : u) v = rng.normal();
      }
      rm.to_physical(u, x);
      if (joint) {
        const auto out = model.evaluate(x);
        if (event_holds(q.target, out.margins)) {
          ++hits;
          sys_hits += out.system_failed ? 1U : 0U;
        }
      } else {
        model.component_margins(x, margins);
        hits += event_holds(q.target, margins) ? 1U : 0U;
      }
    }
    EventEstimate r;
    r.event = binomial_estimate(hits, n, n, "mcs");
    if (joint) {
      r.system_given_event = binomial_estimate(sys_hits, hits, 0, "mcs-ratio");
    } else if (q.want_system_failure) {
      r.system_given_event =
          estimate_imposed_damage(model, rm, pattern_of(q.target), q.imposed_samples, derive_seed(seed, 2));
    }
    return r;
  }

 private:
  McsOptions opts_;
};

/// Per-pattern occurrence and system-failure counts from one MCS batch.
struct PatternCensus {
  std::size_t n_samples = 0;
  std::size_t n_components = 0;
  std::vector<std::size_t> occurrences;       // indexed by failed mask
  std::vector<std::size_t> system_failures;   // indexed by failed mask
};

/// Batch MCS over all 2^Nc patterns at once (brute-force reference).
inline PatternCensus mcs_pattern_census(const StructuralModel& model, const RandomModel& rm, std::size_t n,
                                        std::uint64_t seed) {
  const std::size_t nc = model.n_components();
  if (nc > kMaxEnumerableComponents) throw DomainError("pattern census: too many components to tabulate");
  PatternCensus c;
  c.n_samples = n;
  c.n_components = nc;
  c.occurrences.assign(std::size_t{1} << nc, 0);
  c.system_failures.assign(std::size_t{1} << nc, 0);
  Rng rng(seed);
  std::vector<double> u(rm.dim());
  std::vector<double> x(rm.dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : u) v = rng.normal();
    rm.to_physical(u, x);
    const auto out = model.evaluate(x);
    const auto m = static_cast<std::size_t>(out.initial_pattern.failed);
    ++c.occurrences[m];
    c.system_failures[m] += out.system_failed ? 1U : 0U;
  }
  return c;
}

/// Closed-form engine for models with separable component limit states and
/// independent inputs. Event probabilities use no model calls; redundancy is
/// estimated by Monte Carlo on exact conditional (truncated-normal) samples.
class AnalyticEngine final : public ReliabilityEngine {
 public:
  explicit AnalyticEngine(std::size_t pi_samples = 100000) : pi_samples_(pi_samples) {}
  std::string name() const override { return "analytic"; }

  EventEstimate estimate(const StructuralModel& model, const RandomModel& rm, const EventQuery& q,
                         std::uint64_t seed) const override {
    const auto t = model.separable_thresholds(rm);
    if (!t) throw ConfigError("analytic engine: model has no separable closed form for this input distribution");
    double log_p = 0.0;
    for (std::size_t k = 0; k < t->size(); ++k) {
      if ((q.target.required_failed >> k) & 1U) log_p += std_normal_log_cdf((*t)[k]);
      if ((q.target.required_survived >> k) & 1U) log_p += std_normal_log_cdf(-(*t)[k]);
    }
    EventEstimate r;
    r.event.probability = std::exp(log_p);
    r.event.cov = 0.0;
    r.event.n_evaluations = 0;
    r.event.method = "analytic";
    if (!q.want_system_failure) return r;
    if (q.pi_mode == PiMode::imposed_damage) {
      r.system_given_event = estimate_imposed_damage(model, rm, pattern_of(q.target), pi_samples_, seed);
      return r;
    }
    if (!q.target.is_full_pattern()) {
      throw DomainError("analytic engine: conditional redundancy needs a fully specified scenario");
    }
    if (r.event.probability == 0.0) {
      r.system_given_event = binomial_estimate(0, 0, 0, "analytic-conditional");
      return r;
    }
    Rng rng(seed);
    std::vector<double> u(rm.dim());
    std::vector<double> x(rm.dim());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pi_samples_; ++i) {
      for (std::size_t k = 0; k < u.size(); ++k) {
        const double tk = (*t)[k];
        if ((q.target.required_failed >> k) & 1U) {
          u[k] = truncated_below(rng, tk);
        } else if ((q.target.required_survived >> k) & 1U) {
          u[k] = -truncated_below(rng, -tk);
        } else {
          u[k] = rng.normal();
        }
      }
      rm.to_physical(u, x);
      hits += model.simulate_from(x, FailurePattern(model.n_components(), q.target.required_failed)).system_failed
                  ? 1U
                  : 0U;
    }
    r.system_given_event = binomial_estimate(hits, pi_samples_, pi_samples_, "analytic-conditional");
    return r;
  }

 private:
  /// Standard normal restricted to u < t.
  static double truncated_below(Rng& rng, double t) {
    const double pt = std_normal_cdf(t);
    double p = rng.uniform_open() * pt;
    if (p >= 1.0) p = std::nextafter(1.0, 0.0);
    if (p <= 0.0) p = std::numeric_limits<double>::min();
    return std::min(t, std_normal_inv_cdf(p));
  }

  std::size_t pi_samples_;
};

}  // namespace resil
