#pragma once

// The two-arm logistic reference instance used across the suites:
// BernoulliLogit arms with theta1 = (0.5, 0.5), theta2 = (-0.5, 0.5),
// covariates (intercept, Bernoulli(0.5)), RSIHR target, m0 = 5.

#include <Eigen/Dense>

#include "cara/covariates.hpp"
#include "cara/designs.hpp"
#include "cara/family.hpp"
#include "cara/targets.hpp"
#include "cara/trial.hpp"

namespace cara_test {

inline std::vector<cara::ArmModel> reference_arms() {
  Eigen::VectorXd t1(2), t2(2);
  t1 << 0.5, 0.5;
  t2 << -0.5, 0.5;
  return {cara::ArmModel(cara::Family::bernoulli_logit(), t1),
          cara::ArmModel(cara::Family::bernoulli_logit(), t2)};
}

inline cara::CovariateDistribution reference_covariates() {
  cara::CovariateDistribution dist;
  dist.components = {cara::CovariateComponent::intercept(),
                     cara::CovariateComponent::bernoulli(0.5)};
  return dist;
}

inline cara::TrialConfig reference_trial(double gamma, int n = 2000) {
  cara::TrialConfig cfg;
  cfg.arms = reference_arms();
  cfg.covariates = reference_covariates();
  cfg.target = cara::TargetFunction::rsihr();
  cfg.policy = cara::Policy::cadbcd(gamma, 5);
  cfg.horizon = n;
  return cfg;
}

}  // namespace cara_test
