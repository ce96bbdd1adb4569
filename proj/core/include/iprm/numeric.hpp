#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace iprm {

// log(sum_i exp(z_i)) with max shift; safe for exponents far outside the
// representable range of exp.
inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +-inf input)
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// -log(sigmoid(x)), the stable form of the sigmoid cross-entropy pieces.
inline double neg_log_sigmoid(double x) { return softplus(-x); }

}  // namespace iprm
