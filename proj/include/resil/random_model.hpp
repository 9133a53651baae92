#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resil/errors.hpp"
#include "resil/normal.hpp"

namespace resil {

enum class MarginalKind { normal, lognormal };

/// A marginal distribution described by mean and coefficient of variation.
/// Normal marginals may instead give an explicit standard deviation, which
/// allows a zero mean.
struct Marginal {
  MarginalKind kind = MarginalKind::normal;
  double mean = 0.0;
  double cov = 0.0;
  double sd = 0.0;

  static Marginal normal(double mean, double cov) { return {MarginalKind::normal, mean, cov}; }
  static Marginal normal_sd(double mean, double sd) { return {MarginalKind::normal, mean, 0.0, sd}; }
  static Marginal lognormal(double mean, double cov) { return {MarginalKind::lognormal, mean, cov}; }

  void validate() const {
    if (sd != 0.0) {
      if (kind != MarginalKind::normal) throw ConfigError("marginal: explicit sd is only supported for normal");
      if (!(sd > 0.0) || !std::isfinite(sd)) throw ConfigError("marginal: sd must be positive");
      if (!std::isfinite(mean)) throw ConfigError("marginal: mean must be finite");
      return;
    }
    if (!(cov > 0.0) || !std::isfinite(cov)) throw ConfigError("marginal: cov must be positive");
    if (!std::isfinite(mean)) throw ConfigError("marginal: mean must be finite");
    if (kind == MarginalKind::lognormal && !(mean > 0.0)) {
      throw ConfigError("marginal: lognormal mean must be positive");
    }
  }

  double stddev() const noexcept { return sd > 0.0 ? sd : std::fabs(mean) * cov; }
  /// Parameters of ln X for the lognormal kind.
  double sigma_ln() const noexcept { return std::sqrt(std::log1p(cov * cov)); }
  double mu_ln() const noexcept {
    const double s = sigma_ln();
    return std::log(mean) - 0.5 * s * s;
  }

  /// x = F^-1(Phi(z)).
  double from_standard(double z) const noexcept {
    if (kind == MarginalKind::normal) return mean + stddev() * z;
    return std::exp(mu_ln() + sigma_ln() * z);
  }
  /// z = Phi^-1(F(x)).
  double to_standard(double x) const {
    if (kind == MarginalKind::normal) return (x - mean) / stddev();
    if (!(x > 0.0)) throw DomainError("lognormal marginal: x must be positive");
    return (std::log(x) - mu_ln()) / sigma_ln();
  }
  double cdf(double x) const {
    if (kind == MarginalKind::lognormal && x <= 0.0) return 0.0;
    return std_normal_cdf(to_standard(x));
  }
};

/// Correlation of the underlying standard normals that reproduces a physical
/// correlation rho between marginals a and b.
inline double nataf_warped_correlation(const Marginal& a, const Marginal& b, double rho) {
  using K = MarginalKind;
  if (rho == 0.0) return 0.0;
  if (a.kind == K::normal && b.kind == K::normal) return rho;
  if (a.kind == K::lognormal && b.kind == K::lognormal) {
    return std::log1p(rho * a.cov * b.cov) / (a.sigma_ln() * b.sigma_ln());
  }
  const Marginal& ln = a.kind == K::lognormal ? a : b;
  return rho * ln.cov / ln.sigma_ln();
}

/// Joint input distribution: marginals plus a physical-space correlation
/// matrix, mapped to independent standard normals by the Nataf model.
class RandomModel {
 public:
  RandomModel() = default;

  explicit RandomModel(std::vector<Marginal> marginals)
      : RandomModel(marginals, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(marginals.size()),
                                                         static_cast<Eigen::Index>(marginals.size()))) {}

  RandomModel(std::vector<Marginal> marginals, Eigen::MatrixXd correlation)
      : marginals_(std::move(marginals)), correlation_(std::move(correlation)) {
    const auto d = static_cast<Eigen::Index>(marginals_.size());
    if (d == 0) throw ConfigError("random model: no variables");
    for (const auto& m : marginals_) m.validate();
    if (correlation_.rows() != d || correlation_.cols() != d) {
      throw ConfigError("random model: correlation matrix must be " + std::to_string(d) + "x" +
                        std::to_string(d));
    }
    independent_ = true;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::fabs(correlation_(i, i) - 1.0) > 1e-12) {
        throw ConfigError("random model: correlation diagonal must be 1");
      }
      for (Eigen::Index j = 0; j < i; ++j) {
        const double r = correlation_(i, j);
        if (std::fabs(r - correlation_(j, i)) > 1e-12) {
          throw ConfigError("random model: correlation matrix must be symmetric");
        }
        if (!(std::fabs(r) < 1.0)) {
          throw ConfigError("random model: correlation coefficients must satisfy |rho| < 1");
        }
        if (r != 0.0) independent_ = false;
      }
    }
    warped_ = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const double rz = nataf_warped_correlation(marginals_[static_cast<std::size_t>(i)],
                                                   marginals_[static_cast<std::size_t>(j)],
                                                   correlation_(i, j));
        warped_(i, j) = warped_(j, i) = rz;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(warped_);
    if (llt.info() != Eigen::Success) {
      throw ConfigError("random model: warped correlation matrix is not positive definite");
    }
    chol_ = llt.matrixL();
  }

  std::size_t dim() const noexcept { return marginals_.size(); }
  const std::vector<Marginal>& marginals() const noexcept { return marginals_; }
  const Eigen::MatrixXd& correlation() const noexcept { return correlation_; }
  const Eigen::MatrixXd& warped_correlation() const noexcept { return warped_; }
  bool independent() const noexcept { return independent_; }

  /// u (independent standard normal) -> x (physical).
  void to_physical(std::span<const double> u, std::span<double> x) const {
    check_len(u.size());
    check_len(x.size());
    const std::size_t d = dim();
    if (independent_) {
      for (std::size_t i = 0; i < d; ++i) x[i] = marginals_[i].from_standard(u[i]);
      return;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        z += chol_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * u[j];
      }
      x[i] = marginals_[i].from_standard(z);
    }
  }
  std::vector<double> to_physical(std::span<const double> u) const {
    std::vector<double> x(dim());
    to_physical(u, x);
    return x;
  }

  /// x (physical) -> u (independent standard normal).
  std::vector<double> to_standard(std::span<const double> x) const {
    check_len(x.size());
    const std::size_t d = dim();
    std::vector<double> u(d);
    for (std::size_t i = 0; i < d; ++i) u[i] = marginals_[i].to_standard(x[i]);
    if (independent_) return u;
    // forward substitution with the lower Cholesky factor
    for (std::size_t i = 0; i < d; ++i) {
      double s = u[i];
      for (std::size_t j = 0; j < i; ++j) {
        s -= chol_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * u[j];
      }
      u[i] = s / chol_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    }
    return u;
  }

 private:
  void check_len(std::size_t n) const {
    if (n != dim()) throw DomainError("random model: vector length does not match dimension");
  }

  std::vector<Marginal> marginals_;
  Eigen::MatrixXd correlation_;
  Eigen::MatrixXd warped_;
  Eigen::MatrixXd chol_;
  bool independent_ = true;
};

}  // namespace resil
