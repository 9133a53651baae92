#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resil/resilience.hpp"
#include "resil/sampling.hpp"
#include "resil/screening/screening.hpp"
#include "resil/screening/surrogate.hpp"

namespace resil {

struct AdaptiveConfig {
  double radius_factor = 1.1;
  std::size_t n_rings = 35;
  std::size_t epochs_initial = 300;
  std::size_t epochs_increment = 10;
  std::size_t epochs_max = 500;
  std::size_t batch_size = 20;
  double conv_ratio_tol = 0.001;
  std::size_t probe_count = 10000;
  /// Candidates drawn in the ring per iteration.
  std::size_t n_candidates = 5000;
  /// 0 means 10 * n_rings.
  std::size_t max_iterations = 0;
  std::vector<std::size_t> hidden = {64, 64};
  double learning_rate = 1e-3;
  /// Continue training the previous network (and optimizer state) after
  /// each refinement instead of retraining from the initial weights.
  bool warm_start = true;
  bool crossover = false;
  double crossover_probability = 0.2;
  std::uint64_t seed = 0;

  std::size_t iteration_cap() const { return max_iterations ? max_iterations : 10 * n_rings; }

  void validate() const {
    if (!(radius_factor >= 1.0)) throw ConfigError("adaptive: radius_factor must be >= 1");
    if (n_rings < 1) throw ConfigError("adaptive: n_rings must be >= 1");
    if (epochs_initial < 1 || epochs_max < epochs_initial) {
      throw ConfigError("adaptive: need 1 <= epochs_initial <= epochs_max");
    }
    if (batch_size < 2) throw ConfigError("adaptive: batch_size must be >= 2");
    if (!(conv_ratio_tol > 0.0)) throw ConfigError("adaptive: conv_ratio_tol must be positive");
    if (probe_count < 100) throw ConfigError("adaptive: probe_count must be >= 100");
    if (n_candidates < 1) throw ConfigError("adaptive: n_candidates must be >= 1");
    if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0)) {
      throw ConfigError("adaptive: crossover_probability must lie in [0,1]");
    }
  }
};

/// Raised when the refinement loop hits its iteration cap.
class AdaptiveConvergenceError : public ConvergenceError {
 public:
  AdaptiveConvergenceError(const std::string& what, std::vector<ScreeningIteration> h)
      : ConvergenceError(what), history(std::move(h)) {}
  std::vector<ScreeningIteration> history;
};

/// Uniform probe points in the ball, one per row.
inline Eigen::MatrixXd ball_probes(std::size_t dim, std::size_t count, double radius, std::uint64_t seed) {
  return sample_nball(NBallSpec{dim, radius, count}, seed);
}

/// Predicted pattern per row; an output below 0.5 reads as failed.
inline std::vector<ComponentMask> predicted_masks(const SurrogateNet& net, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd out = net.predict(X);
  std::vector<ComponentMask> masks(static_cast<std::size_t>(out.rows()), 0);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      if (out(i, c) < 0.5) masks[static_cast<std::size_t>(i)] |= component_bit(static_cast<std::size_t>(c));
    }
  }
  return masks;
}

/// Fraction of probe rows with at least one predicted component failure.
inline double convergence_ratio(const SurrogateNet& net, const Eigen::MatrixXd& probes) {
  if (probes.rows() == 0) throw DomainError("convergence ratio: no probe points");
  const auto masks = predicted_masks(net, probes);
  const auto failed = std::count_if(masks.begin(), masks.end(), [](ComponentMask m) { return m != 0; });
  return static_cast<double>(failed) / static_cast<double>(probes.rows());
}

inline double convergence_ratio(const SurrogateNet& net, const RandomModel& rm, std::size_t probe_count, double radius,
                                std::uint64_t seed) {
  if (probe_count < 100) throw DomainError("convergence ratio: probe_count must be >= 100");
  return convergence_ratio(net, ball_probes(rm.dim(), probe_count, radius, seed));
}

/// Ring searched at iteration t (1-based): inner radius min(t, N_R) R*/N_R,
/// thickness 3 R*/N_R; the whole ball once the inner radius reaches R*.
struct Ring {
  double inner = 0.0;
  double outer = 0.0;
  bool whole_ball = false;
};

inline Ring ring_at(std::size_t t, std::size_t n_rings, double r_star) {
  Ring r;
  const double step = r_star / static_cast<double>(n_rings);
  r.inner = static_cast<double>(std::min(t, n_rings)) * step;
  r.whole_ball = t >= n_rings;
  r.outer = r.whole_ball ? r_star : std::min(r_star, r.inner + 3.0 * step);
  return r;
}

/// Surrogate-assisted adaptive screening: axis points on the threshold
/// sphere seed a neural classifier, which is refined one true model call at
/// a time where its prediction is least certain.
inline ScreeningReport surrogate_adaptive_screen(const StructuralModel& model, const RandomModel& rm,
                                                 const ResilienceThreshold& threshold, const AdaptiveConfig& cfg,
                                                 SurrogateNet* trained = nullptr) {
  cfg.validate();
  const std::size_t d = rm.dim();
  const std::size_t nc = model.n_components();
  const double R = threshold.radius();
  const double r_star = cfg.radius_factor * R;
  CountingModel counted(model);
  ScreeningReport rep;
  rep.method = "adaptive";

  std::vector<std::vector<double>> points;
  std::vector<ComponentMask> labels;
  std::vector<double> x(d);
  std::vector<double> margins(nc);
  auto evaluate = [&](const std::vector<double>& u) {
    rm.to_physical(u, x);
    counted.component_margins(x, margins);
    points.push_back(u);
    labels.push_back(pattern_from_margins(margins).failed);
  };
  auto dataset = [&](Eigen::MatrixXd& X, Eigen::MatrixXd& T) {
    const auto n = static_cast<Eigen::Index>(points.size());
    X.resize(n, static_cast<Eigen::Index>(d));
    T.resize(n, static_cast<Eigen::Index>(nc));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) X(i, static_cast<Eigen::Index>(j)) = points[static_cast<std::size_t>(i)][j];
      for (std::size_t c = 0; c < nc; ++c) {
        // 1 = safe, 0 = failed
        T(i, static_cast<Eigen::Index>(c)) = (labels[static_cast<std::size_t>(i)] >> c) & 1U ? 0.0 : 1.0;
      }
    }
  };

  for (std::size_t j = 0; j < d; ++j) {
    for (double s : {1.0, -1.0}) {
      std::vector<double> u(d, 0.0);
      u[j] = s * R;
      evaluate(u);
    }
  }

  SurrogateNet net(d, cfg.hidden, nc, derive_seed(cfg.seed, 1));
  SurrogateTrainer trainer(AdamOptions{cfg.learning_rate}, cfg.batch_size);
  const Eigen::MatrixXd probes = ball_probes(d, cfg.probe_count, r_star, derive_seed(cfg.seed, 2));
  Rng rng(derive_seed(cfg.seed, 3));
  std::uint64_t train_stream = 100;

  Eigen::MatrixXd X;
  Eigen::MatrixXd T;
  dataset(X, T);
  auto loss = trainer.train(net, X, T, cfg.epochs_initial, derive_seed(cfg.seed, train_stream++));
  double ratio = convergence_ratio(net, probes);
  rep.n_surrogate_calls += static_cast<std::size_t>(probes.rows());

  bool converged = false;
  std::vector<double> cand(d);
  Eigen::MatrixXd C(static_cast<Eigen::Index>(cfg.n_candidates), static_cast<Eigen::Index>(d));
  for (std::size_t t = 1; t <= cfg.iteration_cap(); ++t) {
    const Ring ring = ring_at(t, cfg.n_rings, r_star);
    std::vector<double> next;
    if (cfg.crossover && rng.uniform() < cfg.crossover_probability) {
      std::vector<std::size_t> failed;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0) failed.push_back(i);
      }
      if (failed.size() >= 2) {
        // Parents with different patterns, when there are any, so the child
        // can land where both failure domains intersect.
        const std::size_t a = failed[rng.index(failed.size())];
        std::vector<std::size_t> mates;
        for (auto i : failed) {
          if (labels[i] != labels[a]) mates.push_back(i);
        }
        if (mates.empty()) {
          for (auto i : failed) {
            if (i != a) mates.push_back(i);
          }
        }
        const std::size_t b = mates[rng.index(mates.size())];
        next.resize(d);
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          next[j] = rng.uniform() < 0.5 ? points[a][j] : points[b][j];
          sq += next[j] * next[j];
        }
        const double norm = std::sqrt(sq);
        if (norm > r_star) {
          for (double& v : next) v *= r_star / norm;
        }
      }
    }
    if (next.empty()) {
      const double inner = ring.whole_ball ? 0.0 : ring.inner;
      for (std::size_t i = 0; i < cfg.n_candidates; ++i) {
        sample_shell_point(rng, inner, ring.outer, cand);
        for (std::size_t j = 0; j < d; ++j) C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cand[j];
      }
      const Eigen::MatrixXd out = net.predict(C);
      rep.n_surrogate_calls += cfg.n_candidates;
      const Eigen::VectorXd score = (out.array() - 0.5).abs().rowwise().minCoeff();
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < score.size(); ++i) {
        if (score(i) < score(best)) best = i;
      }
      next.resize(d);
      for (std::size_t j = 0; j < d; ++j) next[j] = C(best, static_cast<Eigen::Index>(j));
    }
    evaluate(next);

    const std::size_t epochs = std::min(cfg.epochs_max, cfg.epochs_initial + cfg.epochs_increment * t);
    dataset(X, T);
    if (!cfg.warm_start) {
      net = SurrogateNet(d, cfg.hidden, nc, derive_seed(cfg.seed, 1));
      trainer = SurrogateTrainer(AdamOptions{cfg.learning_rate}, cfg.batch_size);
    }
    loss = trainer.train(net, X, T, epochs, derive_seed(cfg.seed, train_stream++));
    const double prev = ratio;
    ratio = convergence_ratio(net, probes);
    rep.n_surrogate_calls += static_cast<std::size_t>(probes.rows());
    rep.history.push_back({t, ring.inner, ring.outer, ratio, counted.calls(), epochs, loss.back()});
    if (ring.whole_ball && std::fabs(ratio - prev) < cfg.conv_ratio_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw AdaptiveConvergenceError("adaptive screening: convergence ratio did not settle within " +
                                       std::to_string(cfg.iteration_cap()) + " iterations (last ratio " +
                                       std::to_string(ratio) + ")",
                                   rep.history);
  }

  std::map<ComponentMask, std::size_t> seen;
  for (auto m : labels) {
    if (m != 0) ++seen[m];
  }
  for (const auto& [m, c] : seen) rep.noteworthy.emplace_back(nc, m);
  sort_patterns(rep.noteworthy);
  for (const auto& p : rep.noteworthy) rep.occurrences.push_back(seen[p.failed]);

  std::map<ComponentMask, std::size_t> pred;
  for (auto m : predicted_masks(net, probes)) {
    if (m != 0) ++pred[m];
  }
  for (const auto& [m, c] : pred) rep.predicted.emplace_back(nc, m);
  sort_patterns(rep.predicted);
  if (rep.predicted.size() > 50) {
    rep.warnings.push_back("surrogate predicts " + std::to_string(rep.predicted.size()) +
                           " distinct failure patterns; beyond about 50 domains the classifier is unreliable");
  }
  rep.n_model_calls = counted.calls();
  if (trained) *trained = net;
  return rep;
}

}  // namespace resil
