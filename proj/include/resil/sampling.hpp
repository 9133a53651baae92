#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "resil/errors.hpp"
#include "resil/normal.hpp"

namespace resil {

/// Seeded random stream. Every sampler in the library takes one of these or
/// an explicit seed; there is no global generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Uniform on the open interval (0,1).
  double uniform_open() {
    double v;
    do {
      v = uniform();
    } while (v <= 0.0);
    return v;
  }
  double normal() { return normal_(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Stream splitting: a distinct, reproducible seed per (base, stream) pair.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Latin hypercube sample of independent standard normals: count x dim,
/// exactly one point per equiprobable stratum in every dimension; strata are
/// paired across dimensions by independent random permutations.
inline Eigen::MatrixXd sample_lhs(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim == 0) throw DomainError("sample_lhs: dim must be positive");
  if (count < 2) throw DomainError("sample_lhs: count must be at least 2");
  Rng rng(seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  std::vector<std::size_t> perm(count);
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    for (std::size_t i = 0; i < count; ++i) {
      const double p = (static_cast<double>(perm[i]) + rng.uniform_open()) / static_cast<double>(count);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std_normal_inv_cdf(std::clamp(p, 1e-300, std::nextafter(1.0, 0.0)));
    }
  }
  return out;
}

struct NBallSpec {
  std::size_t dim = 1;
  double radius = 1.0;
  std::size_t count = 1;

  void validate() const {
    if (dim == 0) throw DomainError("n-ball: dim must be positive");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("n-ball: radius must be positive");
    if (count == 0) throw DomainError("n-ball: count must be at least 1");
  }
};

/// Uniform direction on the unit sphere S^{d-1} (normalised Gaussian).
inline void sample_direction(Rng& rng, std::span<double> out) {
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : out) {
      v = rng.normal();
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : out) v *= inv;
}

/// Uniform point in the spherical shell inner <= |u| <= outer.
inline void sample_shell_point(Rng& rng, double inner, double outer, std::span<double> out) {
  sample_direction(rng, out);
  const double d = static_cast<double>(out.size());
  const double a = std::pow(inner, d);
  const double b = std::pow(outer, d);
  const double r = std::pow(a + rng.uniform() * (b - a), 1.0 / d);
  for (double& v : out) v *= r;
}

/// count x dim points uniform in the closed ball |u| <= radius. Points are
/// generated one at a time from a single stream, so a larger count extends a
/// smaller one with the same seed.
inline Eigen::MatrixXd sample_nball(const NBallSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(spec.count), static_cast<Eigen::Index>(spec.dim));
  std::vector<double> u(spec.dim);
  for (std::size_t i = 0; i < spec.count; ++i) {
    sample_shell_point(rng, 0.0, spec.radius, u);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = u[j];
    }
  }
  return out;
}

}  // namespace resil
