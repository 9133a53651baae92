#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "resil/errors.hpp"

namespace resil {

/// Standard normal density.
inline double std_normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal CDF. erfc keeps full relative accuracy in the lower tail.
inline double std_normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// log of the standard normal CDF, usable far into the lower tail.
inline double std_normal_log_cdf(double x) noexcept {
  if (x > -20.0) return std::log(std_normal_cdf(x));
  // Asymptotic series of the Mills ratio.
  const double z2 = 1.0 / (x * x);
  const double series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2;
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(series);
}

namespace detail {

// Wichura (1988) AS 241, PPND16. Relative accuracy about 1e-16.
inline double ppnd16(double p) noexcept {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

}  // namespace detail

/// Inverse standard normal CDF on the open interval (0, 1).
inline double std_normal_inv_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_normal_inv_cdf: probability must lie in (0,1)");
  }
  return detail::ppnd16(p);
}

/// An index -Phi^-1(p) that may be unbounded when p is exactly 0 or 1.
struct Index {
  double value = 0.0;
  bool unbounded = false;  // p == 0 gives +inf, p == 1 gives -inf

  bool finite() const noexcept { return !unbounded; }
  friend bool operator==(const Index&, const Index&) = default;
};

/// beta = -Phi^-1(p). p == 0 and p == 1 return flagged +/- infinity sentinels.
inline Index beta_from_prob(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("beta_from_prob: probability must lie in [0,1]");
  }
  if (p == 0.0) return {std::numeric_limits<double>::infinity(), true};
  if (p == 1.0) return {-std::numeric_limits<double>::infinity(), true};
  return {-detail::ppnd16(p), false};
}

/// Phi(-beta), honouring infinite sentinels.
inline double prob_from_beta(double beta) noexcept {
  if (std::isinf(beta)) return beta > 0 ? 0.0 : 1.0;
  return std_normal_cdf(-beta);
}

}  // namespace resil
