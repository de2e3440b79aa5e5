#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "icc/common.hpp"

namespace icc::stats {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  return m + std::log((v.array() - m).exp().sum());
}

inline double normal_logpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * kLog2Pi;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// One-dimensional truncated normal on [lb, ub].
struct TruncatedNormal {
  double mu = 0, sigma = 1, lb = -1, ub = 1;

  double mass() const {
    return normal_cdf((ub - mu) / sigma) - normal_cdf((lb - mu) / sigma);
  }

  double logpdf(double x) const {
    if (x < lb || x > ub) return -std::numeric_limits<double>::infinity();
    return normal_logpdf(x, mu, sigma) - std::log(mass());
  }

  double mean() const {
    const double a = (lb - mu) / sigma, b = (ub - mu) / sigma;
    return mu + sigma * (normal_pdf(a) - normal_pdf(b)) / mass();
  }

  double variance() const {
    const double a = (lb - mu) / sigma, b = (ub - mu) / sigma;
    const double z = mass();
    const double d = (normal_pdf(a) - normal_pdf(b)) / z;
    const double e = (a * normal_pdf(a) - b * normal_pdf(b)) / z;
    return sigma * sigma * (1.0 - e - d * d);
  }

  template <class Rng>
  double sample(Rng& rng) const {
    std::normal_distribution<double> n(mu, sigma);
    for (;;) {
      const double x = n(rng);
      if (x >= lb && x <= ub) return x;
    }
  }
};

struct RunningMoments {
  long n = 0;
  double mean = 0, m2 = 0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_mean() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

}  // namespace icc::stats
