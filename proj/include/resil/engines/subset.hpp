#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "resil/engines/estimate.hpp"

namespace resil {

struct SubsetOptions {
  std::size_t n_per_level = 1000;
  double p0 = 0.1;
  int max_levels = 30;
  double target_acceptance = 0.44;

  void validate() const {
    if (!(p0 > 0.0 && p0 < 1.0)) throw ConfigError("subset simulation: p0 must lie in (0,1)");
    if (static_cast<double>(n_per_level) * p0 < 10.0) throw ConfigError("subset simulation: n_per_level * p0 must be >= 10");
    if (max_levels < 1) throw ConfigError("subset simulation: max_levels must be at least 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
      throw ConfigError("subset simulation: target_acceptance must lie in (0,1)");
    }
  }
};

/// Subset simulation with adaptive conditional sampling (component-wise
/// correlated proposals whose spread is tuned toward a target acceptance).
class SubsetEngine final : public ReliabilityEngine {
 public:
  explicit SubsetEngine(SubsetOptions opts = {}) : opts_(opts) { opts_.validate(); }
  std::string name() const override { return "subset"; }
  const SubsetOptions& options() const noexcept { return opts_; }

  EventEstimate estimate(const StructuralModel& model, const RandomModel& rm, const EventQuery& q,
                         std::uint64_t seed) const override {
    const std::size_t n = opts_.n_per_level;
    const std::size_t d = rm.dim();
    const auto n_seeds = static_cast<std::size_t>(std::llround(opts_.p0 * static_cast<double>(n)));
    const bool joint = q.want_system_failure && q.pi_mode == PiMode::conditional;
    if (joint && !q.target.is_full_pattern()) {
      throw DomainError("subset simulation: conditional redundancy needs a fully specified scenario");
    }
    Rng rng(seed);
    std::size_t calls = 0;
    std::vector<double> x(d);
    std::vector<double> margins(model.n_components());
    double sign = 1.0;
    auto eval = [&](const std::vector<double>& u, char& sys) {
      rm.to_physical(u, x);
      ++calls;
      if (joint) {
        const auto out = model.evaluate(x);
        sys = out.system_failed ? 1 : 0;
        return sign * event_driver(q.target, out.margins);
      }
      model.component_margins(x, margins);
      return sign * event_driver(q.target, margins);
    };

    std::vector<std::vector<double>> U(n, std::vector<double>(d));
    std::vector<double> g(n);
    std::vector<char> sys(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : U[i]) v = rng.normal();
      g[i] = eval(U[i], sys[i]);
    }

    // A likely event is estimated through its complement, whose small
    // probability the levels resolve far better than a plain fraction does.
    const auto hits0 = static_cast<std::size_t>(std::count_if(g.begin(), g.end(), [](double v) { return v > 0.0; }));
    const bool complement = 2 * hits0 > n && hits0 < n;
    std::optional<EstimateResult> sys0;
    if (complement) {
      if (joint) {
        std::size_t s = 0;
        for (std::size_t i = 0; i < n; ++i) s += (g[i] > 0.0 && sys[i]) ? 1U : 0U;
        sys0 = binomial_estimate(s, hits0, 0, "subset-first-level");
      }
      sign = -1.0;
      for (double& v : g) v = -v;
    }

    double log_p = 0.0;
    double cov2 = 0.0;
    double last_b = -std::numeric_limits<double>::infinity();
    int stalled = 0;
    double lambda = 0.6;
    // Chain layout of the current population (empty for the first level).
    std::size_t chain_len = 0;

    for (int level = 0; level < opts_.max_levels; ++level) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
      const double b = g[order[n_seeds - 1]];
      const std::size_t hits = static_cast<std::size_t>(std::count_if(g.begin(), g.end(), [](double v) { return v > 0.0; }));

      if (b > 0.0 || hits >= n_seeds) {
        const double pf = static_cast<double>(hits) / static_cast<double>(n);
        cov2 += level_cov2(g, 0.0, pf, chain_len);
        EventEstimate r;
        r.event.probability = std::exp(log_p) * pf;
        r.event.cov = std::sqrt(cov2);
        if (complement) {
          const double pc = r.event.probability;
          r.event.probability = 1.0 - pc;
          r.event.cov = pc < 1.0 ? std::sqrt(cov2) * pc / (1.0 - pc) : std::numeric_limits<double>::infinity();
        }
        r.event.n_evaluations = calls;
        r.event.method = name();
        if (complement && joint) {
          r.system_given_event = sys0;
        } else if (joint) {
          std::size_t s = 0;
          for (std::size_t i = 0; i < n; ++i) s += (g[i] > 0.0 && sys[i]) ? 1U : 0U;
          r.system_given_event = binomial_estimate(s, hits, 0, "subset-final-level");
        } else if (q.want_system_failure) {
          r.system_given_event =
              estimate_imposed_damage(model, rm, pattern_of(q.target), q.imposed_samples, derive_seed(seed, 3));
        }
        return r;
      }

      if (!(b > last_b + 1e-12 * std::max(1.0, std::fabs(last_b)))) {
        if (++stalled >= 3) {
          throw ConvergenceError("subset simulation: driver quantile stagnated at " + std::to_string(b) + " on level " +
                                 std::to_string(level + 1));
        }
      } else {
        stalled = 0;
      }
      last_b = std::max(last_b, b);
      const double p_level = static_cast<double>(n_seeds) / static_cast<double>(n);
      cov2 += level_cov2(g, b, p_level, chain_len);
      log_p += std::log(p_level);

      // Seeds: samples with g >= b (exactly n_seeds of them by rank). Their
      // order is shuffled, because the proposal spread adapts from chain to
      // chain and must not correlate with seed depth.
      std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_seeds), rng.engine());
      std::vector<std::vector<double>> seeds_u;
      std::vector<double> seeds_g;
      std::vector<char> seeds_s;
      for (std::size_t k = 0; k < n_seeds; ++k) {
        seeds_u.push_back(U[order[k]]);
        seeds_g.push_back(g[order[k]]);
        seeds_s.push_back(sys[order[k]]);
      }
      // Per-dimension spread of the seeds.
      std::vector<double> sigma0(d, 1.0);
      for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (const auto& s : seeds_u) m += s[j];
        m /= static_cast<double>(n_seeds);
        double v = 0.0;
        for (const auto& s : seeds_u) v += (s[j] - m) * (s[j] - m);
        sigma0[j] = std::sqrt(v / std::max<std::size_t>(1, n_seeds - 1));
      }

      // Chains, laid out contiguously: chain k occupies [k*len, (k+1)*len).
      chain_len = n / n_seeds;
      std::vector<std::vector<double>> nu(n, std::vector<double>(d));
      std::vector<double> ng(n);
      std::vector<char> ns(n, 0);
      std::size_t pos = 0;
      std::size_t accepted = 0;
      std::size_t proposed = 0;
      std::vector<double> cand(d);
      for (std::size_t k = 0; k < n_seeds; ++k) {
        const std::size_t len = (k + 1 == n_seeds) ? n - pos : chain_len;
        std::vector<double> cur = seeds_u[k];
        double cur_g = seeds_g[k];
        char cur_s = seeds_s[k];
        for (std::size_t t = 0; t < len; ++t) {
          if (t > 0) {
            for (std::size_t j = 0; j < d; ++j) {
              const double sj = std::min(1.0, lambda * sigma0[j]);
              const double rho = std::sqrt(1.0 - sj * sj);
              cand[j] = rho * cur[j] + sj * rng.normal();
            }
            char cs = 0;
            const double cg = eval(cand, cs);
            ++proposed;
            if (cg >= b) {
              cur = cand;
              cur_g = cg;
              cur_s = cs;
              ++accepted;
            }
          }
          nu[pos] = cur;
          ng[pos] = cur_g;
          ns[pos] = cur_s;
          ++pos;
        }
        // Adapt the proposal spread every ten chains.
        if ((k + 1) % 10 == 0 && proposed > 0) {
          const double acc = static_cast<double>(accepted) / static_cast<double>(proposed);
          const double step = (acc - opts_.target_acceptance) / std::sqrt(static_cast<double>(k + 1) / 10.0);
          lambda = std::clamp(std::exp(std::log(lambda) + step), 1e-3, 1e3);
          accepted = 0;
          proposed = 0;
        }
      }
      U = std::move(nu);
      g = std::move(ng);
      sys = std::move(ns);
    }
    throw ConvergenceError("subset simulation: target event not reached within " + std::to_string(opts_.max_levels) +
                           " levels (last driver quantile " + std::to_string(last_b) + ")");
  }

 private:
  /// Squared cov contribution of one level with the chain-correlation factor.
  static double level_cov2(const std::vector<double>& g, double b, double p, std::size_t chain_len) {
    const double n = static_cast<double>(g.size());
    if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
    double base = (1.0 - p) / (n * p);
    if (chain_len < 2) return base;
    const std::size_t n_chains = g.size() / chain_len;
    const auto ind = [&](std::size_t i) { return g[i] > b ? 1.0 : 0.0; };
    const double r0 = p * (1.0 - p);
    if (!(r0 > 0.0)) return base;
    double gamma = 0.0;
    for (std::size_t tau = 1; tau < chain_len; ++tau) {
      double s = 0.0;
      std::size_t cnt = 0;
      for (std::size_t c = 0; c < n_chains; ++c) {
        for (std::size_t t = 0; t + tau < chain_len; ++t) {
          s += ind(c * chain_len + t) * ind(c * chain_len + t + tau);
          ++cnt;
        }
      }
      const double rt = s / static_cast<double>(cnt) - p * p;
      gamma += 2.0 * (1.0 - static_cast<double>(tau) / static_cast<double>(chain_len)) * rt / r0;
    }
    return base * (1.0 + std::max(0.0, gamma));
  }

  SubsetOptions opts_;
};

}  // namespace resil
