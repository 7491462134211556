#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cara/targets.hpp"

using namespace cara;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

ArmModel logit_arm(const Eigen::VectorXd& theta) {
  return ArmModel(Family::bernoulli_logit(), theta);
}

}  // namespace

TEST_CASE("evaluate") {
  const ArmModel a = logit_arm(vec2(0.3, -0.7));

  SECTION("equal arms give one half for every x") {
    const TargetFunction t = TargetFunction::rsihr();
    for (double x2 : {0.0, 0.5, 1.0, -2.0}) {
      CHECK_THAT(evaluate(t, a, a, vec2(1.0, x2)), WithinAbs(0.5, 1e-15));
    }
  }

  SECTION("fixed is constant") {
    const TargetFunction t = TargetFunction::fixed(0.7);
    CHECK(evaluate(t, a, logit_arm(vec2(2.0, 1.0)), vec2(1.0, 3.0)) == 0.7);
    CHECK_THROWS_AS(TargetFunction::fixed(0.0), std::invalid_argument);
  }

  SECTION("RSIHR at p1 = 0.8, p2 = 0.2 is 2/3") {
    // sqrt(0.8) = 2 sqrt(0.2)
    Eigen::VectorXd t1(1), t2(1), x(1);
    t1 << logit(0.8);
    t2 << logit(0.2);
    x << 1.0;
    const ArmModel m1(Family::bernoulli_logit(), t1), m2(Family::bernoulli_logit(), t2);
    CHECK_THAT(evaluate(TargetFunction::rsihr(), m1, m2, x), WithinAbs(2.0 / 3.0, 1e-12));
  }

  SECTION("binary families required") {
    const ArmModel pois(Family::poisson_log(), vec2(0.0, 0.0));
    CHECK_THROWS_AS(evaluate(TargetFunction::rsihr(), pois, a, vec2(1.0, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate(TargetFunction::neyman_binary(), a, pois, vec2(1.0, 0.0)),
                    std::invalid_argument);
  }

  SECTION("dimension mismatch") {
    Eigen::VectorXd x1(1);
    x1 << 1.0;
    CHECK_THROWS_AS(evaluate(TargetFunction::rsihr(), a, a, x1), std::invalid_argument);
  }
}

TEST_CASE("gradient") {
  const ArmModel a1 = logit_arm(vec2(0.5, 0.5));
  const ArmModel a2 = logit_arm(vec2(-0.5, 0.5));

  SECTION("fixed has zero gradient") {
    const Eigen::VectorXd g = gradient(TargetFunction::fixed(0.3), a1, a2, vec2(1.0, 1.0));
    CHECK(g.size() == 4);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("analytic matches finite differences at random points") {
    Rng rng(17);
    for (const auto& make :
         {&TargetFunction::rsihr, &TargetFunction::neyman_binary}) {
      for (int t = 0; t < 20; ++t) {
        const ArmModel m1 = logit_arm(vec2(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0));
        const ArmModel m2 = logit_arm(vec2(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0));
        const Eigen::VectorXd x = vec2(1.0, rng.uniform01());
        const TargetFunction analytic = make(TargetFunction::GradientMode::Analytic);
        const TargetFunction fd = make(TargetFunction::GradientMode::FiniteDifference);
        const Eigen::VectorXd ga = gradient(analytic, m1, m2, x);
        const Eigen::VectorXd gf = gradient(fd, m1, m2, x);
        CHECK((ga - gf).cwiseAbs().maxCoeff() < 1e-5);
      }
    }
  }

  SECTION("antisymmetric blocks at theta1 == theta2") {
    const ArmModel same = logit_arm(vec2(0.4, -0.3));
    const Eigen::VectorXd g = gradient(TargetFunction::rsihr(), same, same, vec2(1.0, 2.0));
    CHECK_THAT(g[0], WithinAbs(-g[2], 1e-12));
    CHECK_THAT(g[1], WithinAbs(-g[3], 1e-12));
  }
}

TEST_CASE("swapping the arms maps pi to 1 - pi") {
  Rng rng(29);
  for (const auto& target : {TargetFunction::rsihr(), TargetFunction::neyman_binary()}) {
    for (int t = 0; t < 50; ++t) {
      const ArmModel m1 = logit_arm(vec2(4.0 * rng.uniform01() - 2.0, 2.0 * rng.uniform01() - 1.0));
      const ArmModel m2 = logit_arm(vec2(4.0 * rng.uniform01() - 2.0, 2.0 * rng.uniform01() - 1.0));
      const Eigen::VectorXd x = vec2(1.0, rng.uniform01());
      const double pi = evaluate(target, m1, m2, x);
      const double swapped = evaluate(target, m2, m1, x);
      CHECK_THAT(swapped, WithinAbs(1.0 - pi, 1e-15));
    }
  }
}

TEST_CASE("evaluate stays inside (0,1) over the box") {
  // grid over the closed default box corners and edges, extreme covariates
  const TargetFunction t = TargetFunction::rsihr();
  double lo = 1.0, hi = 0.0;
  for (double t11 : {-10.0, 0.0, 10.0}) {
    for (double t12 : {-10.0, 10.0}) {
      for (double t21 : {-10.0, 0.0, 10.0}) {
        for (double t22 : {-10.0, 10.0}) {
          for (double x2 : {0.0, 1.0}) {
            const double pi = evaluate(t, logit_arm(vec2(t11, t12)), logit_arm(vec2(t21, t22)),
                                       vec2(1.0, x2));
            lo = std::fmin(lo, pi);
            hi = std::fmax(hi, pi);
          }
        }
      }
    }
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("custom hook") {
  // a custom f(p1, p2) reproducing RSIHR agrees with the built-in
  const TargetFunction builtin = TargetFunction::rsihr();
  const TargetFunction hook = TargetFunction::make_custom([](double p1, double p2) {
    return std::sqrt(p1) / (std::sqrt(p1) + std::sqrt(p2));
  });
  const ArmModel a1 = logit_arm(vec2(0.5, 0.5));
  const ArmModel a2 = logit_arm(vec2(-0.5, 0.5));
  for (double x2 : {0.0, 1.0}) {
    const Eigen::VectorXd x = vec2(1.0, x2);
    CHECK_THAT(evaluate(hook, a1, a2, x), WithinAbs(evaluate(builtin, a1, a2, x), 1e-12));
    const Eigen::VectorXd gh = gradient(hook, a1, a2, x);
    const Eigen::VectorXd gb = gradient(builtin, a1, a2, x);
    CHECK((gh - gb).cwiseAbs().maxCoeff() < 1e-5);
  }
}
