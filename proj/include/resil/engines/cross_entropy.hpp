#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resil/engines/estimate.hpp"
#include "resil/engines/mixtures.hpp"

namespace resil {

enum class MixtureFamily { gaussian_mixture, vmf_mixture };

struct CeOptions {
  MixtureFamily family = MixtureFamily::gaussian_mixture;
  std::size_t n_per_level = 1000;
  int n_mixtures = 3;
  double elite_fraction = 0.1;
  double target_cov = 0.1;
  int max_levels = 50;
  /// Eigenvalue floor of Gaussian components; at 1 the likelihood ratio
  /// phi/h stays bounded on any event region.
  double gm_min_variance = 1.0;
  /// Radial cap m/omega of vMF-Nakagami components; 1/2 bounds phi/h.
  double vmfn_max_radial_rate = 0.5;
  EmOptions em;

  void validate() const {
    if (n_per_level < 10) throw ConfigError("ce-ais: n_per_level must be at least 10");
    if (n_mixtures < 1) throw ConfigError("ce-ais: n_mixtures must be at least 1");
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0)) throw ConfigError("ce-ais: elite_fraction must lie in (0,1)");
    if (!(target_cov > 0.0)) throw ConfigError("ce-ais: target_cov must be positive");
    if (max_levels < 1) throw ConfigError("ce-ais: max_levels must be at least 1");
  }
};

/// Ratio-of-means estimate A/B with its delta-method coefficient of variation.
inline EstimateResult ratio_estimate(const std::vector<double>& a, const std::vector<double>& b, std::string method) {
  const double n = static_cast<double>(a.size());
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  EstimateResult r;
  r.method = std::move(method);
  if (!(sb > 0.0) || !(sa > 0.0)) {
    r.probability = 0.0;
    r.cov = std::numeric_limits<double>::infinity();
    return r;
  }
  const double ratio = sa / sb;
  const double mb = sb / n;
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - ratio * b[i];
    v += e * e;
  }
  v /= n * n * mb * mb;
  r.probability = std::min(1.0, ratio);
  r.cov = std::sqrt(v) / ratio;
  return r;
}

/// Cross-entropy adaptive importance sampling in standard-normal space.
class CeAisEngine final : public ReliabilityEngine {
 public:
  explicit CeAisEngine(CeOptions opts = {}) : opts_(opts) { opts_.validate(); }
  std::string name() const override {
    return opts_.family == MixtureFamily::gaussian_mixture ? "ce-ais-gm" : "ce-ais-vmfm";
  }
  const CeOptions& options() const noexcept { return opts_; }

  EventEstimate estimate(const StructuralModel& model, const RandomModel& rm, const EventQuery& q,
                         std::uint64_t seed) const override {
    if (opts_.family == MixtureFamily::gaussian_mixture) {
      return run(GaussianMixture::standard_normal(rm.dim()), model, rm, q, seed);
    }
    return run(VmfNakagamiMixture::standard_normal(rm.dim()), model, rm, q, seed);
  }

 private:
  template <class Family>
  EventEstimate run(Family h, const StructuralModel& model, const RandomModel& rm, const EventQuery& q,
                    std::uint64_t seed) const {
    const std::size_t n = opts_.n_per_level;
    const std::size_t d = rm.dim();
    const bool joint = q.want_system_failure && q.pi_mode == PiMode::conditional;
    if (joint && !q.target.is_full_pattern()) {
      throw DomainError("ce-ais: conditional redundancy needs a fully specified scenario");
    }
    Rng rng(seed);
    Rng fit_rng(derive_seed(seed, 7));
    Eigen::MatrixXd U(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<double> x(d);
    std::vector<double> margins(model.n_components());
    std::vector<double> g(n);
    std::vector<double> logw(n);
    std::vector<char> sys(n, 0);
    std::size_t calls = 0;
    double last_gamma = -std::numeric_limits<double>::infinity();
    int stalled = 0;
    std::vector<double> pool_a;
    std::vector<double> pool_b;
    double pooled_sum = 0.0;
    double pooled_var = 0.0;
    double pooled_levels = 0.0;
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);

    for (int level = 0; level < opts_.max_levels; ++level) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> u(d);
        h.sample(rng, u);
        for (std::size_t j = 0; j < d; ++j) U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = u[j];
        double sq = 0.0;
        for (double v : u) sq += v * v;
        logw[i] = log_norm - 0.5 * sq - h.log_pdf(u);
        rm.to_physical(u, x);
        if (joint) {
          const auto out = model.evaluate(x);
          std::copy(out.margins.begin(), out.margins.end(), margins.begin());
          sys[i] = out.system_failed ? 1 : 0;
        } else {
          model.component_margins(x, margins);
        }
        ++calls;
        g[i] = event_driver(q.target, margins);
      }

      std::vector<double> sorted = g;
      const auto q_idx = static_cast<std::size_t>(std::floor((1.0 - opts_.elite_fraction) * static_cast<double>(n)));
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q_idx), sorted.end());
      double gamma = sorted[q_idx];
      if (gamma >= 0.0) gamma = 0.0;

      if (gamma == 0.0) {
        // Every level sampled after the event is reached gives an unbiased
        // estimate; they are pooled.
        std::vector<double> b(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (g[i] > 0.0) {
            b[i] = std::exp(logw[i]);
            pool_a.push_back(sys[i] ? b[i] : 0.0);
          } else {
            pool_a.push_back(0.0);
          }
          pool_b.push_back(b[i]);
        }
        const auto est = mean_estimate(b);
        ++pooled_levels;
        pooled_sum += est.probability;
        pooled_var += est.probability > 0.0 ? std::pow(est.cov * est.probability, 2) : 0.0;
        const double p = pooled_sum / pooled_levels;
        const double cov = p > 0.0 ? std::sqrt(pooled_var) / pooled_levels / p : std::numeric_limits<double>::infinity();
        if (cov <= opts_.target_cov || level + 1 == opts_.max_levels) {
          EventEstimate r;
          r.event.probability = std::min(1.0, p);
          r.event.cov = cov;
          r.event.n_evaluations = calls;
          r.event.method = name();
          if (joint) {
            r.system_given_event = ratio_estimate(pool_a, pool_b, name() + "-ratio");
          } else if (q.want_system_failure) {
            r.system_given_event =
                estimate_imposed_damage(model, rm, pattern_of(q.target), q.imposed_samples, derive_seed(seed, 3));
          }
          return r;
        }
      }

      if (!(gamma > last_gamma + 1e-12 * std::max(1.0, std::fabs(last_gamma))) && gamma < 0.0) {
        if (++stalled >= 5) {
          throw ConvergenceError(name() + ": intermediate level stagnated at driver " + std::to_string(gamma) +
                                 " after " + std::to_string(level + 1) + " levels");
        }
      } else {
        stalled = 0;
      }
      last_gamma = std::max(last_gamma, gamma);

      // Elite refit: weights phi/h on samples above the current level.
      Eigen::VectorXd W = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      double max_lw = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (g[i] > gamma || (gamma < 0.0 && g[i] >= gamma)) max_lw = std::max(max_lw, logw[i]);
      }
      std::size_t kept = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (g[i] > gamma || (gamma < 0.0 && g[i] >= gamma)) {
          W(static_cast<Eigen::Index>(i)) = std::exp(logw[i] - max_lw);
          ++kept;
        }
      }
      if (kept == 0 || !(W.sum() > 0.0)) {
        throw ConvergenceError(name() + ": no elite samples at level " + std::to_string(level + 1));
      }
      // Each component needs enough effective samples to pin its
      // parameters down, otherwise EM collapses onto single points.
      const double ess = W.sum() * W.sum() / W.squaredNorm();
      const int k_fit = std::clamp(static_cast<int>(ess / (2.0 * static_cast<double>(d + 1))), 1, opts_.n_mixtures);
      EmOptions em = opts_.em;
      em.min_variance = opts_.gm_min_variance;
      em.max_radial_rate = opts_.vmfn_max_radial_rate;
      h = Family::fit(U, W, k_fit, fit_rng, em);
    }
    throw ConvergenceError(name() + ": target event not reached within " + std::to_string(opts_.max_levels) +
                           " levels (last intermediate driver level " + std::to_string(last_gamma) + ")");
  }

  static EstimateResult mean_estimate(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / n;
    EstimateResult r;
    if (!(mean > 0.0)) {
      r.probability = 0.0;
      r.cov = std::numeric_limits<double>::infinity();
      return r;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = ss / (n - 1.0);
    r.probability = std::min(1.0, mean);
    r.cov = std::sqrt(var / n) / mean;
    return r;
  }

  CeOptions opts_;
};

}  // namespace resil
