#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "resil/errors.hpp"
#include "resil/sampling.hpp"

namespace resil {

struct EmOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;
  double regularization = 1e-6;
  /// Gaussian family: floor on covariance eigenvalues.
  double min_variance = 0.0;
  /// vMF-Nakagami family: cap on m / omega, the radial decay rate.
  double max_radial_rate = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// k-means++ seeding on the weighted rows of X under the given squared
/// distance; returns the chosen row indices.
template <class Dist>
std::vector<Eigen::Index> kmeanspp_seeds(const Eigen::MatrixXd& X, const Eigen::VectorXd& w, int k, Rng& rng,
                                         Dist dist2) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> seeds;
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  auto pick = [&](const std::vector<double>& mass) {
    double total = 0.0;
    for (double v : mass) total += v;
    if (!(total > 0.0)) return static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    double r = rng.uniform() * total;
    for (Eigen::Index i = 0; i < n; ++i) {
      r -= mass[static_cast<std::size_t>(i)];
      if (r <= 0.0) return i;
    }
    return n - 1;
  };
  std::vector<double> mass(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) mass[static_cast<std::size_t>(i)] = w(i);
  seeds.push_back(pick(mass));
  while (static_cast<int>(seeds.size()) < k) {
    const Eigen::Index last = seeds.back();
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, dist2(X.row(i), X.row(last)));
      mass[static_cast<std::size_t>(i)] = w(i) * d;
    }
    seeds.push_back(pick(mass));
  }
  return seeds;
}

/// Hard-assignment responsibilities to the nearest seed.
template <class Dist>
Eigen::MatrixXd nearest_seed_responsibilities(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& seeds,
                                              Dist dist2) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(X.rows(), static_cast<Eigen::Index>(seeds.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < seeds.size(); ++j) {
      const double d = dist2(X.row(i), X.row(seeds[j]));
      if (d < bd) {
        bd = d;
        best = static_cast<Eigen::Index>(j);
      }
    }
    r(i, best) = 1.0;
  }
  return r;
}

inline Eigen::VectorXd normalized_weights(const Eigen::VectorXd& w) {
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("mixture fit: weights must have a positive finite sum");
  return w / s;
}

}  // namespace detail

/// log I_nu(x) for nu >= 0, x >= 0.
inline double log_bessel_i(double nu, double x) {
  if (x < 0.0 || nu < 0.0) throw DomainError("log_bessel_i: nu and x must be non-negative");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x < 600.0) {
    const double v = std::cyl_bessel_i(nu, x);
    if (v > 0.0 && std::isfinite(v)) return std::log(v);
  }
  if (nu >= 0.5) {
    // Uniform (Debye) expansion in 1/nu.
    const double z = x / nu;
    const double s = std::sqrt(1.0 + z * z);
    const double t = 1.0 / s;
    const double eta = s + std::log(z / (1.0 + s));
    const double t2 = t * t;
    const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
    const double u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
    const double u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) / 414720.0;
    const double series = 1.0 + u1 / nu + u2 / (nu * nu) + u3 / (nu * nu * nu);
    return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) - 0.5 * std::log(s) + std::log(series);
  }
  // Large-argument expansion.
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 8; ++k) {
    term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * x);
    sum += term;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

/// Gaussian mixture in R^d.
class GaussianMixture {
 public:
  struct Component {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
  };

  static GaussianMixture standard_normal(std::size_t d) {
    GaussianMixture g;
    g.dim_ = d;
    g.add({1.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)),
           Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))});
    return g;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return comps_.size(); }
  const std::vector<Component>& components() const noexcept { return comps_; }

  void add(Component c) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
    if (llt.info() != Eigen::Success) throw DomainError("gaussian mixture: covariance not positive definite");
    dim_ = static_cast<std::size_t>(c.mean.size());
    const Eigen::MatrixXd L = llt.matrixL();
    log_norm_.push_back(-0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) -
                        L.diagonal().array().log().sum());
    chol_.push_back(L);
    comps_.push_back(std::move(c));
  }

  void sample(Rng& rng, std::span<double> u) const {
    const std::size_t k = pick(rng);
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const Eigen::VectorXd v = comps_[k].mean + chol_[k] * z;
    for (std::size_t i = 0; i < dim_; ++i) u[i] = v(static_cast<Eigen::Index>(i));
  }

  double component_log_pdf(std::size_t k, const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const Eigen::VectorXd y = chol_[k].triangularView<Eigen::Lower>().solve(u - comps_[k].mean);
    return log_norm_[k] - 0.5 * y.squaredNorm();
  }

  double log_pdf(std::span<const double> u) const {
    const Eigen::Map<const Eigen::VectorXd> v(u.data(), static_cast<Eigen::Index>(u.size()));
    std::vector<double> t(comps_.size());
    for (std::size_t k = 0; k < comps_.size(); ++k) t[k] = std::log(comps_[k].weight) + component_log_pdf(k, v);
    return detail::log_sum_exp(t);
  }

  /// Weighted EM fit on rows of X.
  static GaussianMixture fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights, int n_components, Rng& rng,
                             const EmOptions& opt = {}) {
    if (X.rows() == 0) throw DomainError("gaussian mixture fit: no samples");
    const Eigen::VectorXd w = detail::normalized_weights(weights);
    const Eigen::Index d = X.cols();
    const int k = std::max(1, std::min<int>(n_components, static_cast<int>((w.array() > 0.0).count())));
    auto euclid = [](const auto& a, const auto& b) { return (a - b).squaredNorm(); };
    Eigen::MatrixXd resp = detail::nearest_seed_responsibilities(X, detail::kmeanspp_seeds(X, w, k, rng, euclid), euclid);
    GaussianMixture g;
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_iterations; ++it) {
      // M-step.
      GaussianMixture next;
      for (Eigen::Index j = 0; j < resp.cols(); ++j) {
        const Eigen::VectorXd rw = resp.col(j).cwiseProduct(w);
        const double nk = rw.sum();
        if (!(nk > 1e-300)) continue;
        const Eigen::VectorXd mean = (X.transpose() * rw) / nk;
        const Eigen::MatrixXd C = X.rowwise() - mean.transpose();
        Eigen::MatrixXd cov = (C.transpose() * rw.asDiagonal() * C) / nk;
        cov += opt.regularization * Eigen::MatrixXd::Identity(d, d);
        if (opt.min_variance > 0.0) {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
          cov = es.eigenvectors() * es.eigenvalues().cwiseMax(opt.min_variance).asDiagonal() *
                es.eigenvectors().transpose();
        }
        next.add({nk, mean, cov});
      }
      if (next.size() == 0) throw DomainError("gaussian mixture fit: all components collapsed");
      next.normalize_weights();
      g = std::move(next);
      // E-step.
      resp.resize(X.rows(), static_cast<Eigen::Index>(g.size()));
      double ll = 0.0;
      std::vector<double> t(g.size());
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Eigen::VectorXd xi = X.row(i).transpose();
        for (std::size_t j = 0; j < g.size(); ++j) t[j] = std::log(g.comps_[j].weight) + g.component_log_pdf(j, xi);
        const double lse = detail::log_sum_exp(t);
        for (std::size_t j = 0; j < g.size(); ++j) resp(i, static_cast<Eigen::Index>(j)) = std::exp(t[j] - lse);
        ll += w(i) * lse;
      }
      if (std::fabs(ll - prev) <= opt.tolerance * std::max(1.0, std::fabs(ll))) break;
      prev = ll;
    }
    return g;
  }

 private:
  void normalize_weights() {
    double s = 0.0;
    for (const auto& c : comps_) s += c.weight;
    for (auto& c : comps_) c.weight /= s;
  }
  std::size_t pick(Rng& rng) const {
    double r = rng.uniform();
    for (std::size_t k = 0; k + 1 < comps_.size(); ++k) {
      r -= comps_[k].weight;
      if (r <= 0.0) return k;
    }
    return comps_.size() - 1;
  }

  std::size_t dim_ = 0;
  std::vector<Component> comps_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> log_norm_;
};

/// Mixture of von Mises-Fisher directions times Nakagami radii, u = r a.
/// With kappa = 0, m = d/2 and omega = d a component is the standard normal.
class VmfNakagamiMixture {
 public:
  struct Component {
    double weight = 1.0;
    Eigen::VectorXd mu;  // unit mean direction
    double kappa = 0.0;
    double m = 0.5;
    double omega = 1.0;
  };

  static inline constexpr double kMaxKappa = 1e7;

  static VmfNakagamiMixture standard_normal(std::size_t d) {
    VmfNakagamiMixture v;
    v.dim_ = d;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    mu(0) = 1.0;
    v.add({1.0, mu, 0.0, 0.5 * static_cast<double>(d), static_cast<double>(d)});
    return v;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return comps_.size(); }
  const std::vector<Component>& components() const noexcept { return comps_; }

  void add(Component c) {
    dim_ = static_cast<std::size_t>(c.mu.size());
    if (dim_ < 2) throw DomainError("vMF-Nakagami mixture: dimension must be at least 2");
    if (!(c.m >= 0.5) || !(c.omega > 0.0) || !(c.kappa >= 0.0)) {
      throw DomainError("vMF-Nakagami mixture: invalid component parameters");
    }
    const double d = static_cast<double>(dim_);
    const double nu = 0.5 * d - 1.0;
    double lc;
    if (c.kappa < 1e-12) {
      lc = std::lgamma(0.5 * d) - std::log(2.0) - 0.5 * d * std::log(std::numbers::pi);
    } else {
      lc = nu * std::log(c.kappa) - 0.5 * d * std::log(2.0 * std::numbers::pi) - log_bessel_i(nu, c.kappa);
    }
    log_vmf_norm_.push_back(lc);
    log_nak_norm_.push_back(std::log(2.0) + c.m * std::log(c.m) - std::lgamma(c.m) - c.m * std::log(c.omega));
    comps_.push_back(std::move(c));
  }

  void sample(Rng& rng, std::span<double> u) const {
    const std::size_t k = pick(rng);
    const auto& c = comps_[k];
    Eigen::VectorXd a = sample_vmf(rng, c.mu, c.kappa);
    std::gamma_distribution<double> gam(c.m, c.omega / c.m);
    const double r = std::sqrt(gam(rng.engine()));
    for (std::size_t i = 0; i < dim_; ++i) u[i] = r * a(static_cast<Eigen::Index>(i));
  }

  double component_log_pdf_polar(std::size_t k, const Eigen::Ref<const Eigen::VectorXd>& a, double r) const {
    const auto& c = comps_[k];
    const double lv = log_vmf_norm_[k] + c.kappa * c.mu.dot(a);
    const double ln = log_nak_norm_[k] + (2.0 * c.m - 1.0) * std::log(r) - c.m * r * r / c.omega;
    return lv + ln;
  }

  /// Density with respect to Lebesgue measure in R^d.
  double log_pdf(std::span<const double> u) const {
    const Eigen::Map<const Eigen::VectorXd> v(u.data(), static_cast<Eigen::Index>(u.size()));
    const double r = v.norm();
    if (r == 0.0) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd a = v / r;
    std::vector<double> t(comps_.size());
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      t[k] = std::log(comps_[k].weight) + component_log_pdf_polar(k, a, r);
    }
    return detail::log_sum_exp(t) - (static_cast<double>(dim_) - 1.0) * std::log(r);
  }

  static VmfNakagamiMixture fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights, int n_components, Rng& rng,
                                const EmOptions& opt = {}) {
    if (X.rows() == 0) throw DomainError("vMF-Nakagami fit: no samples");
    const Eigen::VectorXd w = detail::normalized_weights(weights);
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    Eigen::VectorXd r = X.rowwise().norm();
    Eigen::MatrixXd A(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(r(i) > 0.0)) throw DomainError("vMF-Nakagami fit: sample at the origin");
      A.row(i) = X.row(i) / r(i);
    }
    const int k = std::max(1, std::min<int>(n_components, static_cast<int>((w.array() > 0.0).count())));
    auto cosdist = [](const auto& a, const auto& b) { return std::max(0.0, 1.0 - a.dot(b)); };
    Eigen::MatrixXd resp =
        detail::nearest_seed_responsibilities(A, detail::kmeanspp_seeds(A, w, k, rng, cosdist), cosdist);
    VmfNakagamiMixture g;
    double prev = -std::numeric_limits<double>::infinity();
    const double dd = static_cast<double>(d);
    for (int it = 0; it < opt.max_iterations; ++it) {
      VmfNakagamiMixture next;
      for (Eigen::Index j = 0; j < resp.cols(); ++j) {
        const Eigen::VectorXd rw = resp.col(j).cwiseProduct(w);
        const double nk = rw.sum();
        if (!(nk > 1e-300)) continue;
        const Eigen::VectorXd s = A.transpose() * rw;
        const double sn = s.norm();
        Component c;
        c.weight = nk;
        if (sn > 0.0) {
          c.mu = s / sn;
        } else {
          c.mu = Eigen::VectorXd::Zero(d);
          c.mu(0) = 1.0;
        }
        const double rbar = std::min(sn / nk, 1.0 - 1e-12);
        c.kappa = std::min(kMaxKappa, std::max(0.0, rbar * (dd - rbar * rbar) / (1.0 - rbar * rbar)));
        const Eigen::ArrayXd r2 = r.array().square();
        const double omega = (rw.array() * r2).sum() / nk;
        const double var = (rw.array() * (r2 - omega).square()).sum() / nk;
        c.omega = std::max(omega, opt.regularization);
        c.m = var > 0.0 ? std::max(0.5, omega * omega / var) : 1e6;
        c.m = std::max(0.5, std::min({c.m, 1e6, opt.max_radial_rate * c.omega}));
        next.add(std::move(c));
      }
      if (next.size() == 0) throw DomainError("vMF-Nakagami fit: all components collapsed");
      next.normalize_weights();
      g = std::move(next);
      resp.resize(n, static_cast<Eigen::Index>(g.size()));
      double ll = 0.0;
      std::vector<double> t(g.size());
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd ai = A.row(i).transpose();
        for (std::size_t j = 0; j < g.size(); ++j) {
          t[j] = std::log(g.comps_[j].weight) + g.component_log_pdf_polar(j, ai, r(i));
        }
        const double lse = detail::log_sum_exp(t);
        for (std::size_t j = 0; j < g.size(); ++j) resp(i, static_cast<Eigen::Index>(j)) = std::exp(t[j] - lse);
        ll += w(i) * lse;
      }
      if (std::fabs(ll - prev) <= opt.tolerance * std::max(1.0, std::fabs(ll))) break;
      prev = ll;
    }
    return g;
  }

  /// Wood's rejection sampler on S^{d-1}.
  static Eigen::VectorXd sample_vmf(Rng& rng, const Eigen::VectorXd& mu, double kappa) {
    const Eigen::Index d = mu.size();
    Eigen::VectorXd v(d);
    if (kappa < 1e-12) {
      for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
      return v / v.norm();
    }
    const double dm1 = static_cast<double>(d) - 1.0;
    const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
    const double x0 = (1.0 - b) / (1.0 + b);
    const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
    std::gamma_distribution<double> ga(0.5 * dm1, 1.0);
    std::gamma_distribution<double> gb(0.5 * dm1, 1.0);
    double w;
    while (true) {
      const double ya = ga(rng.engine());
      const double yb = gb(rng.engine());
      const double z = ya / (ya + yb);
      w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      const double uu = rng.uniform_open();
      if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(uu)) break;
    }
    // Uniform direction orthogonal to mu.
    Eigen::VectorXd t(d);
    for (Eigen::Index i = 0; i < d; ++i) t(i) = rng.normal();
    t -= t.dot(mu) * mu;
    const double tn = t.norm();
    if (tn > 0.0) t /= tn;
    v = w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * t;
    return v / v.norm();
  }

 private:
  void normalize_weights() {
    double s = 0.0;
    for (const auto& c : comps_) s += c.weight;
    for (auto& c : comps_) c.weight /= s;
  }
  std::size_t pick(Rng& rng) const {
    double r = rng.uniform();
    for (std::size_t k = 0; k + 1 < comps_.size(); ++k) {
      r -= comps_[k].weight;
      if (r <= 0.0) return k;
    }
    return comps_.size() - 1;
  }

  std::size_t dim_ = 0;
  std::vector<Component> comps_;
  std::vector<double> log_vmf_norm_;
  std::vector<double> log_nak_norm_;
};

}  // namespace resil
