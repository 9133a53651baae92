#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "resil/errors.hpp"
#include "resil/normal.hpp"

namespace resil {

/// A probability estimate with its coefficient of variation. `probability`
/// of exactly 0 is the flagged-zero case (no hits); its cov is +inf.
struct ProbabilityEstimate {
  double probability = 0.0;
  double cov = 0.0;
};

/// Reliability (beta) and redundancy (pi) indices of one scenario.
struct ResilienceIndices {
  Index beta;
  std::optional<Index> pi;  // empty: not computed (trivial scenario)
  double combined = 0.0;
  double beta_cov = 0.0;
  double pi_cov = std::numeric_limits<double>::quiet_NaN();

  bool pi_computed() const noexcept { return pi.has_value(); }
};

/// -Phi^-1(Phi(-beta) Phi(-pi)) evaluated through log-probabilities.
inline double combined_index(double beta, double pi) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (beta == inf) return inf;
  if (pi == inf) return beta;  // flagged-zero redundancy: fall back to beta
  if (pi == -inf) return beta;
  if (beta == -inf) return pi;
  const double log_p = std_normal_log_cdf(-beta) + std_normal_log_cdf(-pi);
  const double p = std::exp(log_p);
  if (p <= 0.0) return std::max(beta, pi);
  if (p >= 1.0) return -inf;
  return std::max({-std_normal_inv_cdf(p), beta, pi});
}

/// Builds the index triple from the two estimated probabilities. A missing
/// conditional probability means pi was skipped.
inline ResilienceIndices resilience_indices(const ProbabilityEstimate& p_scenario,
                                            const std::optional<ProbabilityEstimate>& p_sys_given) {
  ResilienceIndices r;
  r.beta = beta_from_prob(p_scenario.probability);
  r.beta_cov = p_scenario.cov;
  if (p_sys_given) {
    r.pi = beta_from_prob(p_sys_given->probability);
    r.pi_cov = p_sys_given->cov;
    r.combined = combined_index(r.beta.value, r.pi->value);
  } else {
    r.combined = r.beta.value;
  }
  return r;
}

/// Resilience threshold p_dm / (lambda_H * N_F) and its radius in standard
/// normal space.
class ResilienceThreshold {
 public:
  /// Direct threshold probability.
  static ResilienceThreshold direct(double p_threshold) { return ResilienceThreshold(p_threshold); }

  static ResilienceThreshold from_de_minimis(double p_dm, double lambda_h, double n_scenarios) {
    if (!(p_dm > 0.0)) throw ConfigError("threshold: p_dm must be positive");
    if (!(lambda_h > 0.0)) throw ConfigError("threshold: lambda_H must be positive");
    if (!(n_scenarios >= 1.0)) throw ConfigError("threshold: n_scenarios must be at least 1");
    ResilienceThreshold t(p_dm / (lambda_h * n_scenarios));
    t.p_dm_ = p_dm;
    t.lambda_h_ = lambda_h;
    t.n_scenarios_ = n_scenarios;
    return t;
  }

  double p_threshold() const noexcept { return p_; }
  double radius() const noexcept { return radius_; }
  std::optional<double> p_dm() const noexcept { return p_dm_; }
  std::optional<double> lambda_h() const noexcept { return lambda_h_; }
  std::optional<double> n_scenarios() const noexcept { return n_scenarios_; }

 private:
  explicit ResilienceThreshold(double p) : p_(p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("threshold: p_threshold must lie in (0,1)");
    radius_ = -std_normal_inv_cdf(p);
    if (!(radius_ > 0.0)) throw ConfigError("threshold: p_threshold must be below 0.5 (radius > 0)");
  }

  double p_ = 0.0;
  double radius_ = 0.0;
  std::optional<double> p_dm_;
  std::optional<double> lambda_h_;
  std::optional<double> n_scenarios_;
};

struct HazardCase {
  std::string id;
  double lambda_h = 1.0;
  std::string load_ref;

  void validate() const {
    if (!(lambda_h > 0.0)) throw ConfigError("hazard case '" + id + "': lambda_H must be positive");
  }
};

/// Trivial scenario: Phi(-beta) < p_threshold, i.e. beta > radius (strict).
inline bool check_trivial(double beta, const ResilienceThreshold& t) noexcept {
  return beta > t.radius();
}

/// Resilient scenario: Phi(-beta) Phi(-pi) < p_threshold, i.e. combined > radius.
inline bool check_resilient(const ResilienceIndices& r, const ResilienceThreshold& t) noexcept {
  if (r.beta.value == std::numeric_limits<double>::infinity()) return true;
  return r.combined > t.radius();
}

struct BetaPi {
  double beta = 0.0;
  double pi = 0.0;
};

/// lambda_H * sum_i Phi(-pi_i) Phi(-beta_i) over MECE scenarios.
inline double system_failure_probability(std::span<const BetaPi> rows, double lambda_h) {
  double s = 0.0;
  for (const auto& r : rows) s += prob_from_beta(r.pi) * prob_from_beta(r.beta);
  return lambda_h * s;
}

}  // namespace resil
