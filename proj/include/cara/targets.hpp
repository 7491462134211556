#pragma once

// Two-arm target allocation functions pi_1(theta, x) and their gradients in
// theta = (theta_1, theta_2). Built-ins: RSIHR, binary Neyman, and a fixed
// constant; arbitrary smooth functions of (p1, p2) plug in through Custom.
// Success probabilities are clamped away from {0, 1} so the target stays in
// (0, 1) over the whole closed parameter box.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

#include "cara/family.hpp"
#include "cara/numerics.hpp"

namespace cara {

inline constexpr double kProbClamp = 1e-6;  // epsilon_p

struct TargetFunction {
  enum class Kind { RSIHR, NeymanBinary, Fixed, Custom };
  enum class GradientMode { Analytic, FiniteDifference };

  Kind kind = Kind::RSIHR;
  GradientMode gradient_mode = GradientMode::Analytic;
  double fixed_c = 0.5;
  std::function<double(double, double)> custom;  // pi_1 = f(p1, p2)
  double fd_step_scale = 1e-5;                   // h = scale * (1 + |theta_i|)

  static TargetFunction rsihr(GradientMode gm = GradientMode::Analytic) {
    TargetFunction t;
    t.kind = Kind::RSIHR;
    t.gradient_mode = gm;
    return t;
  }
  static TargetFunction neyman_binary(GradientMode gm = GradientMode::Analytic) {
    TargetFunction t;
    t.kind = Kind::NeymanBinary;
    t.gradient_mode = gm;
    return t;
  }
  static TargetFunction fixed(double c) {
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("fixed target: c must be in (0,1)");
    TargetFunction t;
    t.kind = Kind::Fixed;
    t.fixed_c = c;
    return t;
  }
  // Composition hook: any smooth f(p1, p2); gradients via finite differences.
  static TargetFunction make_custom(std::function<double(double, double)> f) {
    TargetFunction t;
    t.kind = Kind::Custom;
    t.custom = std::move(f);
    t.gradient_mode = GradientMode::FiniteDifference;
    return t;
  }
};

namespace detail {

inline void require_binary(const ArmModel& a1, const ArmModel& a2, const char* what) {
  if (a1.family.kind != FamilyKind::BernoulliLogit || a2.family.kind != FamilyKind::BernoulliLogit) {
    throw std::invalid_argument(std::string(what) + " requires BernoulliLogit response families");
  }
}

inline double clamped_p(const ArmModel& arm, const Eigen::VectorXd& x) {
  return clamp(mean_response(arm, x), kProbClamp, 1.0 - kProbClamp);
}

}  // namespace detail

inline double evaluate(const TargetFunction& target, const ArmModel& a1, const ArmModel& a2,
                       const Eigen::VectorXd& x) {
  switch (target.kind) {
    case TargetFunction::Kind::Fixed:
      return target.fixed_c;
    case TargetFunction::Kind::RSIHR: {
      detail::require_binary(a1, a2, "RSIHR target");
      const double s1 = std::sqrt(detail::clamped_p(a1, x));
      const double s2 = std::sqrt(detail::clamped_p(a2, x));
      return s1 / (s1 + s2);
    }
    case TargetFunction::Kind::NeymanBinary: {
      detail::require_binary(a1, a2, "Neyman target");
      const double p1 = detail::clamped_p(a1, x);
      const double p2 = detail::clamped_p(a2, x);
      const double q1 = std::sqrt(p1 * (1.0 - p1));
      const double q2 = std::sqrt(p2 * (1.0 - p2));
      return q1 / (q1 + q2);
    }
    case TargetFunction::Kind::Custom: {
      const double p1 = detail::clamped_p(a1, x);
      const double p2 = detail::clamped_p(a2, x);
      return clamp(target.custom(p1, p2), kProbClamp, 1.0 - kProbClamp);
    }
  }
  return 0.5;
}

namespace detail {

// d pi / d p_k for the built-in targets.
inline std::pair<double, double> target_dp(const TargetFunction& target, double p1, double p2) {
  switch (target.kind) {
    case TargetFunction::Kind::RSIHR: {
      const double s1 = std::sqrt(p1), s2 = std::sqrt(p2);
      const double d2 = (s1 + s2) * (s1 + s2);
      return {s2 / (2.0 * s1 * d2), -s1 / (2.0 * s2 * d2)};
    }
    case TargetFunction::Kind::NeymanBinary: {
      const double q1 = std::sqrt(p1 * (1.0 - p1)), q2 = std::sqrt(p2 * (1.0 - p2));
      const double d2 = (q1 + q2) * (q1 + q2);
      return {q2 * (1.0 - 2.0 * p1) / (2.0 * q1 * d2), -q1 * (1.0 - 2.0 * p2) / (2.0 * q2 * d2)};
    }
    default:
      return {0.0, 0.0};
  }
}

inline Eigen::VectorXd gradient_fd(const TargetFunction& target, const ArmModel& a1,
                                   const ArmModel& a2, const Eigen::VectorXd& x) {
  const int d1 = a1.dim(), d2 = a2.dim();
  Eigen::VectorXd g(d1 + d2);
  ArmModel m1 = a1, m2 = a2;
  for (int i = 0; i < d1 + d2; ++i) {
    ArmModel& m = i < d1 ? m1 : m2;
    const int j = i < d1 ? i : i - d1;
    const double orig = m.theta[j];
    const double h = target.fd_step_scale * (1.0 + std::fabs(orig));
    m.theta[j] = orig + h;
    const double up = evaluate(target, m1, m2, x);
    m.theta[j] = orig - h;
    const double down = evaluate(target, m1, m2, x);
    m.theta[j] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

// Gradient of pi_1 in (theta_1, theta_2); length d1 + d2.
inline Eigen::VectorXd gradient(const TargetFunction& target, const ArmModel& a1,
                                const ArmModel& a2, const Eigen::VectorXd& x) {
  const int d1 = a1.dim(), d2 = a2.dim();
  if (target.kind == TargetFunction::Kind::Fixed) {
    return Eigen::VectorXd::Zero(d1 + d2);
  }
  if (target.kind == TargetFunction::Kind::Custom ||
      target.gradient_mode == TargetFunction::GradientMode::FiniteDifference) {
    return detail::gradient_fd(target, a1, a2, x);
  }
  detail::require_binary(a1, a2, "target gradient");
  const double raw1 = mean_response(a1, x);
  const double raw2 = mean_response(a2, x);
  const double p1 = clamp(raw1, kProbClamp, 1.0 - kProbClamp);
  const double p2 = clamp(raw2, kProbClamp, 1.0 - kProbClamp);
  const auto [dp1, dp2] = detail::target_dp(target, p1, p2);
  // d p_k / d theta_k = a''(mu_k) x under the canonical link; zero where the
  // clamp is active.
  const double w1 = (raw1 > kProbClamp && raw1 < 1.0 - kProbClamp)
                        ? a1.family.curvature(x.dot(a1.theta))
                        : 0.0;
  const double w2 = (raw2 > kProbClamp && raw2 < 1.0 - kProbClamp)
                        ? a2.family.curvature(x.dot(a2.theta))
                        : 0.0;
  Eigen::VectorXd g(d1 + d2);
  g.head(d1) = (dp1 * w1) * x;
  g.tail(d2) = (dp2 * w2) * x;
  return g;
}

}  // namespace cara
