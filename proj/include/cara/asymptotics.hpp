#pragma once

// Closed-form (or MC-integrated) theoretical quantities for the two-arm
// design: the limit proportion v, the per-arm Fisher information
// I_k = E[pi_k(theta, xi) I_k(theta_k | xi)] with V = diag(I1^-1, I2^-1),
// the variance components
//   sigma1^2 = E[pi(1-pi)], sigma2^2 = Var(pi), sigma3^2 = g_rho V g_rho^T,
// lambda = gamma sigma1^2 / (v(1-v)), and the CLT variance
//   sigma^2(gamma) = (sigma1^2+sigma3^2)/(1+2 lambda) + sigma2^2 + sigma3^2,
// which decreases from 2 sigma3^2 + v(1-v) at gamma = 0 to the best
// asymptotic variability B = sigma2^2 + sigma3^2 as gamma -> inf. All
// expectations for one summary share a single ExpectationContext, so the
// algebraic identities between them hold to rounding.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cara/covariates.hpp"
#include "cara/family.hpp"
#include "cara/targets.hpp"

namespace cara {

class singular_information_error : public std::runtime_error {
 public:
  singular_information_error(int arm, double min_eig)
      : std::runtime_error("information matrix for arm " + std::to_string(arm + 1) +
                           " is singular (min eigenvalue " + std::to_string(min_eig) + ")"),
        arm_(arm) {}
  int arm() const { return arm_; }

 private:
  int arm_;
};

struct AsymptoticsOptions {
  ExpectOptions expect;
};

struct AsymptoticSummary {
  double v = 0.0;
  Eigen::Vector2d rho;            // (v, 1-v)
  Eigen::VectorXd grad_rho;       // E[d pi_1 / d theta], length d1+d2
  Eigen::MatrixXd I1, I2;         // per-arm information
  Eigen::MatrixXd V;              // blockdiag(I1^-1, I2^-1)
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double sigma3_sq = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double sigma_sq = 0.0;
  double B_scalar = 0.0;          // sigma2^2 + sigma3^2
  Eigen::Matrix2d B_matrix;
  double zhcc_scalar = 0.0;       // 2 sigma3^2 + v(1-v)
  Eigen::Matrix2d Sigma_zhcc;
  // MC standard errors of the integrated scalars; zero when atoms are exact.
  double se_v = 0.0;
  double se_sigma1_sq = 0.0;
  double se_pi_sq = 0.0;          // SE of E[pi^2] feeding sigma2^2
};

namespace detail {

inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& info, int arm) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const double emax = eig.eigenvalues().maxCoeff();
  const double emin = eig.eigenvalues().minCoeff();
  if (!(emin > 1e-10 * std::fmax(1.0, emax))) {
    throw singular_information_error(arm, emin);
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

inline Eigen::MatrixXd information_in_context(int arm_index, const std::vector<ArmModel>& arms,
                                              const TargetFunction& target,
                                              const ExpectationContext& ctx) {
  const ArmModel& arm = arms.at(static_cast<std::size_t>(arm_index));
  return ctx.mean_matrix([&](const Eigen::VectorXd& x) {
    const double pi1 = evaluate(target, arms[0], arms[1], x);
    const double pik = arm_index == 0 ? pi1 : 1.0 - pi1;
    return Eigen::MatrixXd(pik * conditional_fisher_info(arm, x));
  });
}

}  // namespace detail

// I_k = E[pi_k(theta, xi) I_k(theta_k | xi)]; throws if singular.
inline Eigen::MatrixXd information(int arm_index, const std::vector<ArmModel>& arms,
                                   const TargetFunction& target, const CovariateDistribution& dist,
                                   const AsymptoticsOptions& opts = {}) {
  if (arms.size() != 2) throw std::invalid_argument("information: exactly 2 arms required");
  if (arm_index < 0 || arm_index > 1) throw std::invalid_argument("information: arm index must be 0 or 1");
  const auto ctx = ExpectationContext::make(dist, opts.expect);
  Eigen::MatrixXd info = detail::information_in_context(arm_index, arms, target, ctx);
  detail::checked_inverse(info, arm_index);  // singularity gate
  return info;
}

inline AsymptoticSummary summarize(const std::vector<ArmModel>& arms,
                                   const CovariateDistribution& dist, const TargetFunction& target,
                                   double gamma, const AsymptoticsOptions& opts = {}) {
  if (arms.size() != 2) throw std::invalid_argument("summarize: exactly 2 arms required");
  if (!(gamma >= 0.0)) throw std::invalid_argument("summarize: gamma must be >= 0");
  const auto ctx = ExpectationContext::make(dist, opts.expect);

  AsymptoticSummary s;
  s.gamma = gamma;
  const auto pi1 = [&](const Eigen::VectorXd& x) { return evaluate(target, arms[0], arms[1], x); };

  const Expectation ev = ctx.mean(pi1);
  s.v = ev.value;
  s.se_v = ev.std_error;
  if (!(s.v > 0.0 && s.v < 1.0)) {
    throw std::runtime_error("summarize: limit proportion v outside (0,1)");
  }
  s.rho = Eigen::Vector2d(s.v, 1.0 - s.v);

  const Expectation es1 = ctx.mean([&](const Eigen::VectorXd& x) {
    const double p = pi1(x);
    return p * (1.0 - p);
  });
  s.sigma1_sq = es1.value;
  s.se_sigma1_sq = es1.std_error;

  const Expectation epi2 = ctx.mean([&](const Eigen::VectorXd& x) {
    const double p = pi1(x);
    return p * p;
  });
  s.sigma2_sq = epi2.value - s.v * s.v;
  s.se_pi_sq = epi2.std_error;

  s.grad_rho = ctx.mean_vector([&](const Eigen::VectorXd& x) {
    return gradient(target, arms[0], arms[1], x);
  });

  s.I1 = detail::information_in_context(0, arms, target, ctx);
  s.I2 = detail::information_in_context(1, arms, target, ctx);
  const Eigen::MatrixXd V1 = detail::checked_inverse(s.I1, 0);
  const Eigen::MatrixXd V2 = detail::checked_inverse(s.I2, 1);
  const int d1 = arms[0].dim(), d2 = arms[1].dim();
  s.V = Eigen::MatrixXd::Zero(d1 + d2, d1 + d2);
  s.V.topLeftCorner(d1, d1) = V1;
  s.V.bottomRightCorner(d2, d2) = V2;

  const Eigen::VectorXd g1 = s.grad_rho.head(d1);
  const Eigen::VectorXd g2 = s.grad_rho.tail(d2);
  s.sigma3_sq = g1.dot(V1 * g1) + g2.dot(V2 * g2);

  const double vv = s.v * (1.0 - s.v);
  s.lambda = std::isinf(gamma) ? std::numeric_limits<double>::infinity()
                               : gamma * s.sigma1_sq / vv;
  s.B_scalar = s.sigma2_sq + s.sigma3_sq;
  const double gap = std::isinf(s.lambda) ? 0.0
                                          : (s.sigma1_sq + s.sigma3_sq) / (1.0 + 2.0 * s.lambda);
  s.sigma_sq = gap + s.B_scalar;
  s.zhcc_scalar = 2.0 * s.sigma3_sq + vv;

  Eigen::Matrix2d contrast;
  contrast << 1.0, -1.0, -1.0, 1.0;
  s.B_matrix = s.B_scalar * contrast;
  s.Sigma_zhcc = s.zhcc_scalar * contrast;
  return s;
}

// sigma^2(gamma) - B = (sigma1^2 + sigma3^2) / (1 + 2 lambda(gamma)) >= 0.
inline double efficiency_gap(const AsymptoticSummary& s, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("efficiency_gap: gamma must be >= 0");
  if (std::isinf(gamma)) return 0.0;
  const double lambda = gamma * s.sigma1_sq / (s.v * (1.0 - s.v));
  return (s.sigma1_sq + s.sigma3_sq) / (1.0 + 2.0 * lambda);
}

// Convenience for gamma grids: the gamma-dependent scalars recomputed from
// one summary's integrated quantities.
inline AsymptoticSummary with_gamma(AsymptoticSummary s, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("with_gamma: gamma must be >= 0");
  s.gamma = gamma;
  s.lambda = std::isinf(gamma) ? std::numeric_limits<double>::infinity()
                               : gamma * s.sigma1_sq / (s.v * (1.0 - s.v));
  s.sigma_sq = efficiency_gap(s, gamma) + s.B_scalar;
  return s;
}

}  // namespace cara
