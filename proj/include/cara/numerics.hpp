#pragma once

// Summation and moment helpers shared by the expectation and Monte Carlo
// reductions. Everything here is deterministic for a fixed input order.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cara {

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double pairwise_sum(const double* p, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t mid = n / 2;
  return pairwise_sum(p, mid) + pairwise_sum(p + mid, n - mid);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

inline double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("pairwise_mean: empty input");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance, n-1 denominator
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;  // MC standard error of the sample variance
};

// Two-pass central moments with pairwise sums; deterministic in input order.
inline Moments compute_moments(const std::vector<double>& xs) {
  Moments m;
  m.count = xs.size();
  if (xs.size() < 2) throw std::invalid_argument("compute_moments: need >= 2 values");
  m.mean = pairwise_mean(xs);
  const std::size_t n = xs.size();
  std::vector<double> d2(n), d3(n), d4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - m.mean;
    d2[i] = d * d;
    d3[i] = d2[i] * d;
    d4[i] = d2[i] * d2[i];
  }
  const double s2 = pairwise_sum(d2);
  const double m2 = s2 / static_cast<double>(n);
  const double m3 = pairwise_sum(d3) / static_cast<double>(n);
  const double m4 = pairwise_sum(d4) / static_cast<double>(n);
  m.variance = s2 / static_cast<double>(n - 1);
  m.skewness = m3 / std::pow(m2, 1.5);
  m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  m.se_mean = std::sqrt(m.variance / static_cast<double>(n));
  // SE of the sample variance: sd of the squared deviations / sqrt(n).
  std::vector<double> dd(n);
  for (std::size_t i = 0; i < n; ++i) dd[i] = (d2[i] - m2) * (d2[i] - m2);
  const double var_d2 = pairwise_sum(dd) / static_cast<double>(n - 1);
  m.se_variance = std::sqrt(var_d2 / static_cast<double>(n));
  return m;
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace cara
