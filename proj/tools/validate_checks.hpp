#pragma once

// Named invariant suites behind `cara validate`. Each check reports the
// measured residual against its bound. The g-expansion check accepts an
// exponent bias (the --perturb-g hook) as a negative control: any nonzero
// bias breaks the first-order expansion and must turn that check red.

#include <cmath>
#include <string>
#include <vector>

#include "cara/asymptotics.hpp"
#include "cara/covariates.hpp"
#include "cara/designs.hpp"
#include "cara/family.hpp"
#include "cara/rng.hpp"
#include "cara/targets.hpp"

namespace cara::validate {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double bound = 0.0;
  bool pass = false;
};

namespace detail {

struct Instance {
  std::vector<ArmModel> arms;
  CovariateDistribution covariates;
  TargetFunction target;
};

inline Instance reference_instance() {
  Instance inst;
  Eigen::VectorXd t1(2), t2(2);
  t1 << 0.5, 0.5;
  t2 << -0.5, 0.5;
  inst.arms = {ArmModel(Family::bernoulli_logit(), t1), ArmModel(Family::bernoulli_logit(), t2)};
  inst.covariates.components = {CovariateComponent::intercept(), CovariateComponent::bernoulli(0.5)};
  inst.target = TargetFunction::rsihr();
  return inst;
}

inline CheckResult bounded(std::string name, double residual, double bound) {
  CheckResult r;
  r.name = std::move(name);
  r.residual = residual;
  r.bound = bound;
  r.pass = residual <= bound;
  return r;
}

}  // namespace detail

inline CheckResult check_sigma_identity() {
  const auto inst = detail::reference_instance();
  const auto s = summarize(inst.arms, inst.covariates, inst.target, 1.0);
  const double residual = std::fabs(s.sigma1_sq + s.sigma2_sq - s.v * (1.0 - s.v));
  return detail::bounded("sigma1+sigma2 == v(1-v)", residual, 1e-10);
}

inline CheckResult check_sigma_zero_matches_zhcc() {
  const auto inst = detail::reference_instance();
  const auto s = summarize(inst.arms, inst.covariates, inst.target, 0.0);
  const double residual = std::fabs(s.sigma_sq - s.zhcc_scalar);
  return detail::bounded("sigma^2(0) == 2 sigma3^2 + v(1-v)", residual, 1e-10);
}

// Halving (da, db) must shrink the first-order residual quadratically.
inline CheckResult check_g_expansion_order(double exponent_bias) {
  const double v = 0.5;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (double pi : {0.2, 0.5, 0.8}) {
    for (double gamma : {0.5, 1.0, 4.0}) {
      double da = 0.02, db = -0.015;
      double prev = g_expansion_check(pi, v, da, db, gamma, exponent_bias);
      for (int halving = 0; halving < 3; ++halving) {
        da *= 0.5;
        db *= 0.5;
        const double cur = g_expansion_check(pi, v, da, db, gamma, exponent_bias);
        min_ratio = std::fmin(min_ratio, prev / cur);
        prev = cur;
      }
    }
  }
  const double zero_gamma = g_expansion_check(0.4, v, 0.02, -0.015, 0.0);
  CheckResult r;
  r.name = "g first-order expansion is quadratic";
  r.residual = min_ratio;  // here: the worst halving ratio, larger is better
  r.bound = 3.5;
  r.pass = min_ratio >= 3.5 && zero_gamma == 0.0;
  return r;
}

inline CheckResult check_g_symmetry() {
  double worst = 0.0;
  for (double pi : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (double a : {0.2, 0.4, 0.55, 0.8}) {
      for (double b : {0.15, 0.5, 0.62, 0.9}) {
        for (double gamma : {0.5, 1.0, 2.0, 8.0}) {
          const double s = g_allocation(pi, a, b, gamma) +
                           g_allocation(1.0 - pi, 1.0 - a, 1.0 - b, gamma);
          worst = std::fmax(worst, std::fabs(s - 1.0));
        }
      }
    }
  }
  return detail::bounded("g(pi,a,b) + g(1-pi,1-a,1-b) == 1", worst, 1e-12);
}

inline CheckResult check_g_monotonicity() {
  double worst = 0.0;  // positive when monotonicity is violated
  const std::vector<double> grid = {0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
  for (double pi : {0.2, 0.5, 0.8}) {
    for (double gamma : {0.5, 1.0, 4.0}) {
      for (double a : grid) {
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
          // non-decreasing in b
          worst = std::fmax(worst, g_allocation(pi, a, grid[i], gamma) -
                                       g_allocation(pi, a, grid[i + 1], gamma));
          // non-increasing in a
          worst = std::fmax(worst, g_allocation(pi, grid[i + 1], a, gamma) -
                                       g_allocation(pi, grid[i], a, gamma));
        }
      }
    }
  }
  return detail::bounded("g monotone (up in b, down in a)", worst, 1e-14);
}

inline CheckResult check_score_finite_difference() {
  Rng rng(2024);
  double worst = 0.0;
  const std::vector<Family> families = {Family::bernoulli_logit(), Family::poisson_log(),
                                        Family::normal_identity(2.0)};
  for (const auto& family : families) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd theta(2), x(2);
      theta << 2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0;
      x << 1.0, 2.0 * rng.uniform01() - 1.0;
      ArmModel arm(family, theta);
      const double y = sample_response(arm, x, rng);
      const Eigen::VectorXd analytic = score(arm, x, y);
      for (int j = 0; j < 2; ++j) {
        const double h = 1e-6 * (1.0 + std::fabs(theta[j]));
        ArmModel up = arm, down = arm;
        up.theta[j] += h;
        down.theta[j] -= h;
        const double fd = (log_density(up, x, y) - log_density(down, x, y)) / (2.0 * h);
        worst = std::fmax(worst, std::fabs(fd - analytic[j]));
      }
    }
  }
  return detail::bounded("score == d/dtheta log density (central FD)", worst, 1e-6);
}

inline CheckResult check_target_gradient() {
  Rng rng(77);
  double worst = 0.0;
  for (const auto& target : {TargetFunction::rsihr(), TargetFunction::neyman_binary()}) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd t1(2), t2(2), x(2);
      t1 << 2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0;
      t2 << 2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0;
      x << 1.0, rng.uniform01();
      ArmModel a1(Family::bernoulli_logit(), t1), a2(Family::bernoulli_logit(), t2);
      TargetFunction fd = target;
      fd.gradient_mode = TargetFunction::GradientMode::FiniteDifference;
      const Eigen::VectorXd ga = gradient(target, a1, a2, x);
      const Eigen::VectorXd gf = gradient(fd, a1, a2, x);
      worst = std::fmax(worst, (ga - gf).cwiseAbs().maxCoeff());
    }
  }
  return detail::bounded("target gradient analytic == finite difference", worst, 1e-5);
}

inline CheckResult check_grad_rho_consistency() {
  const auto inst = detail::reference_instance();
  const auto s = summarize(inst.arms, inst.covariates, inst.target, 1.0);
  const auto rho_of = [&](const std::vector<ArmModel>& arms) {
    return expect(inst.covariates, [&](const Eigen::VectorXd& x) {
             return evaluate(inst.target, arms[0], arms[1], x);
           })
        .value;
  };
  double worst = 0.0;
  const int d = inst.arms[0].dim();
  for (int i = 0; i < 2 * d; ++i) {
    auto arms = inst.arms;
    ArmModel& m = i < d ? arms[0] : arms[1];
    const int j = i < d ? i : i - d;
    const double h = 1e-5 * (1.0 + std::fabs(m.theta[j]));
    m.theta[j] += h;
    const double up = rho_of(arms);
    m.theta[j] -= 2.0 * h;
    const double down = rho_of(arms);
    worst = std::fmax(worst, std::fabs((up - down) / (2.0 * h) - s.grad_rho[i]));
  }
  return detail::bounded("E[d pi/d theta] == FD of rho(theta)", worst, 1e-4);
}

inline CheckResult check_burnin_exactness() {
  Rng rng(99);
  const int m0 = 5;
  long worst_count_error = 0;
  for (int t = 0; t < 500; ++t) {
    BurninSchedule sched(m0, rng);
    int n1 = 0;
    for (int m = 1; m <= 2 * m0; ++m) n1 += sched.arm_at(m) == 0 ? 1 : 0;
    worst_count_error = std::max(worst_count_error, static_cast<long>(std::labs(n1 - m0)));
  }
  // exchangeability: every position is arm 1 with frequency ~ 1/2
  const int trials = 4000;
  std::vector<int> hits(2 * m0, 0);
  for (int t = 0; t < trials; ++t) {
    BurninSchedule sched(m0, rng);
    for (int m = 1; m <= 2 * m0; ++m) {
      if (sched.arm_at(m) == 0) ++hits[static_cast<std::size_t>(m - 1)];
    }
  }
  double worst_freq = 0.0;
  for (int h : hits) {
    worst_freq = std::fmax(worst_freq, std::fabs(static_cast<double>(h) / trials - 0.5));
  }
  CheckResult r;
  r.name = "burn-in block exact counts + exchangeable positions";
  r.residual = worst_freq;
  r.bound = 0.05;
  r.pass = worst_count_error == 0 && worst_freq <= 0.05;
  return r;
}

inline std::vector<CheckResult> run_all(double g_exponent_bias = 0.0) {
  return {
      check_sigma_identity(),
      check_sigma_zero_matches_zhcc(),
      check_g_expansion_order(g_exponent_bias),
      check_g_symmetry(),
      check_g_monotonicity(),
      check_score_finite_difference(),
      check_target_gradient(),
      check_grad_rho_consistency(),
      check_burnin_exactness(),
  };
}

}  // namespace cara::validate
