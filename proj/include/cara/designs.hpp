#pragma once

// Allocation policies. The core of the covariate-adjusted doubly adaptive
// biased coin design is the g-function
//   g(pi, a, b) = pi (b/a)^gamma / [pi (b/a)^gamma + (1-pi) ((1-b)/(1-a))^gamma],
// applied with pi = pi_1(theta_hat, xi_new), a = N_{m,1}/m, b = rho_hat.
// gamma = 0 reproduces the plain estimated-target rule (ZHCC); gamma = inf
// is the deterministic limit. Burn-in assigns a uniformly permuted block of
// m0 subjects per arm before the adaptive phase starts.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cara/numerics.hpp"
#include "cara/rng.hpp"

namespace cara {

inline constexpr double kAllocClamp = 1e-6;  // epsilon_a

// exponent_bias perturbs the exponent actually applied to the ratio terms;
// it exists solely as a negative-control hook for the validation suite.
inline double g_allocation(double pi, double a, double b, double gamma,
                           double exponent_bias = 0.0) {
  a = clamp(a, kAllocClamp, 1.0 - kAllocClamp);
  b = clamp(b, kAllocClamp, 1.0 - kAllocClamp);
  const double exponent = gamma + exponent_bias;
  if (exponent == 0.0 || a == b) return pi;
  if (std::isinf(exponent)) return b > a ? 1.0 : 0.0;
  // Log space keeps large gamma finite: (b/a)^gamma overflows well before
  // gamma = 1000, which the deterministic-limit checks exercise.
  const double t1 = std::log(pi) + exponent * (std::log(b) - std::log(a));
  const double t2 = std::log1p(-pi) + exponent * (std::log1p(-b) - std::log1p(-a));
  const double m = std::fmax(t1, t2);
  const double e1 = std::exp(t1 - m);
  const double e2 = std::exp(t2 - m);
  return e1 / (e1 + e2);
}

// Residual of the first-order expansion of g around (a, b) = (v, v):
// g(pi, v+da, v+db) ~ pi - gamma pi(1-pi)/(v(1-v)) (da - db), with a
// second-order remainder. Used by the validation suite only.
inline double g_expansion_check(double pi, double v, double da, double db, double gamma,
                                double exponent_bias = 0.0) {
  if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("g_expansion_check: v must be in (0,1)");
  const double actual = g_allocation(pi, v + da, v + db, gamma, exponent_bias);
  const double linear = pi - gamma * pi * (1.0 - pi) / (v * (1.0 - v)) * (da - db);
  return std::fabs(actual - linear);
}

struct Policy {
  enum class Kind { CompleteRandomization, ZHCC, CADBCD };

  Kind kind = Kind::CADBCD;
  double p = 0.5;       // CompleteRandomization only
  double gamma = 0.0;   // CADBCD; may be +inf
  int burn_in = 5;      // m0

  static Policy complete_randomization(double p, int m0 = 5) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("complete randomization: p must be in (0,1)");
    Policy pol;
    pol.kind = Kind::CompleteRandomization;
    pol.p = p;
    pol.burn_in = m0;
    pol.check();
    return pol;
  }
  static Policy zhcc(int m0 = 5) {
    Policy pol;
    pol.kind = Kind::ZHCC;
    pol.burn_in = m0;
    pol.check();
    return pol;
  }
  static Policy cadbcd(double gamma, int m0 = 5) {
    Policy pol;
    pol.kind = Kind::CADBCD;
    pol.gamma = gamma;
    pol.burn_in = m0;
    pol.check();
    return pol;
  }

  void check() const {
    if (burn_in < 1) throw std::invalid_argument("policy: burn-in m0 must be >= 1");
    if (kind == Kind::CADBCD && !(gamma >= 0.0)) {
      throw std::invalid_argument("policy: gamma must be >= 0");
    }
  }

  // gamma under which the CLT variance formula applies (ZHCC == gamma 0).
  double effective_gamma() const { return kind == Kind::CADBCD ? gamma : 0.0; }

  // Probability of assigning arm 1 given the post-burn-in summary statistics.
  double allocation_probability(double pi_hat, double arm1_fraction, double rho_hat,
                                int n_arms = 2) const {
    switch (kind) {
      case Kind::CompleteRandomization:
        return p;
      case Kind::ZHCC:
        if (n_arms != 2) throw std::invalid_argument("ZHCC rule is defined for exactly 2 arms");
        return pi_hat;
      case Kind::CADBCD:
        if (n_arms != 2) throw std::invalid_argument("CADBCD rule is defined for exactly 2 arms");
        return g_allocation(pi_hat, arm1_fraction, rho_hat, gamma);
    }
    return p;
  }
};

// Burn-in assignments: a uniformly random permutation of the multiset
// {m0 copies of arm 0, m0 copies of arm 1}, drawn once per trial, so that
// N_{2 m0, k} = m0 exactly.
class BurninSchedule {
 public:
  BurninSchedule() = default;
  BurninSchedule(int m0, Rng& rng) {
    if (m0 < 1) throw std::invalid_argument("burn-in schedule: m0 must be >= 1");
    arms_.assign(static_cast<std::size_t>(2 * m0), 0);
    for (int i = m0; i < 2 * m0; ++i) arms_[static_cast<std::size_t>(i)] = 1;
    rng.shuffle(arms_);
  }

  int size() const { return static_cast<int>(arms_.size()); }

  // subject index m is 1-based; valid for 1 <= m <= 2 m0
  int arm_at(int m) const {
    if (m < 1 || m > size()) {
      throw std::out_of_range("burn-in schedule: subject index " + std::to_string(m) +
                              " outside [1, " + std::to_string(size()) + "]");
    }
    return arms_[static_cast<std::size_t>(m - 1)];
  }

 private:
  std::vector<int> arms_;
};

}  // namespace cara
