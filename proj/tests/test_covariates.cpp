#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cara/covariates.hpp"

using namespace cara;
using Catch::Matchers::WithinAbs;

namespace {

CovariateDistribution dist_of(std::vector<CovariateComponent> cs) {
  return CovariateDistribution(std::move(cs));
}

}  // namespace

TEST_CASE("component validation") {
  CHECK_THROWS_AS(CovariateComponent::bernoulli(0.0), std::invalid_argument);
  CHECK_THROWS_AS(CovariateComponent::bernoulli(1.0), std::invalid_argument);
  CHECK_THROWS_AS(CovariateComponent::uniform(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CovariateComponent::gaussian(0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(CovariateComponent::categorical({0.5, 0.6}), std::invalid_argument);
  CHECK(CovariateComponent::categorical({0.2, 0.3, 0.5}).dimension() == 2);
}

TEST_CASE("sampling") {
  Rng rng(3);

  const auto intercept_only = dist_of({CovariateComponent::intercept()});
  CHECK(intercept_only.sample(rng) == Eigen::VectorXd::Ones(1));

  const auto with_bern = dist_of({CovariateComponent::intercept(), CovariateComponent::bernoulli(0.5)});
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += with_bern.sample(rng)[1];
  CHECK_THAT(sum / n, WithinAbs(0.5, 0.005));

  const auto with_unif = dist_of({CovariateComponent::intercept(), CovariateComponent::uniform(0.0, 1.0)});
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = with_unif.sample(rng)[1];
  double mean = 0.0;
  for (double d : draws) mean += d;
  mean /= n;
  double var = 0.0;
  for (double d : draws) var += (d - mean) * (d - mean);
  var /= n - 1;
  CHECK_THAT(var, WithinAbs(1.0 / 12.0, 0.003));
}

TEST_CASE("atoms") {
  const auto d1 = dist_of({CovariateComponent::intercept(), CovariateComponent::bernoulli(0.3)});
  REQUIRE(d1.is_discrete());
  const auto atoms = d1.enumerate_atoms();
  REQUIRE(atoms.size() == 2);
  CHECK(atoms[0].x[0] == 1.0);
  CHECK(atoms[0].x[1] == 0.0);
  CHECK_THAT(atoms[0].prob, WithinAbs(0.7, 1e-15));
  CHECK(atoms[1].x[1] == 1.0);
  CHECK_THAT(atoms[1].prob, WithinAbs(0.3, 1e-15));

  const auto d2 = dist_of({CovariateComponent::intercept(), CovariateComponent::categorical({0.2, 0.3, 0.5})});
  const auto atoms2 = d2.enumerate_atoms();
  REQUIRE(atoms2.size() == 3);
  CHECK(d2.dimension() == 3);
  CHECK_THAT(atoms2[0].prob, WithinAbs(0.2, 1e-15));
  CHECK_THAT(atoms2[1].prob, WithinAbs(0.3, 1e-15));
  CHECK_THAT(atoms2[2].prob, WithinAbs(0.5, 1e-15));
  // dummy coding: reference level has all zeros past the intercept
  CHECK(atoms2[0].x.tail(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(atoms2[1].x[1] == 1.0);
  CHECK(atoms2[2].x[2] == 1.0);

  const auto cont = dist_of({CovariateComponent::intercept(), CovariateComponent::gaussian(0.0, 1.0)});
  CHECK_FALSE(cont.is_discrete());
  CHECK_THROWS_AS(cont.enumerate_atoms(), std::invalid_argument);
}

TEST_CASE("atom probabilities sum to one") {
  const auto d = dist_of({CovariateComponent::intercept(), CovariateComponent::bernoulli(0.3),
                          CovariateComponent::categorical({0.1, 0.2, 0.3, 0.4})});
  double total = 0.0;
  for (const auto& a : d.enumerate_atoms()) total += a.prob;
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
}

TEST_CASE("expect") {
  const auto disc = dist_of({CovariateComponent::intercept(), CovariateComponent::bernoulli(0.3)});

  const auto one = expect(disc, [](const Eigen::VectorXd&) { return 1.0; });
  CHECK(one.value == 1.0);
  CHECK(one.std_error == 0.0);

  const auto second = expect(disc, [](const Eigen::VectorXd& x) { return x[1]; });
  CHECK_THAT(second.value, WithinAbs(0.3, 1e-15));

  // continuous: E[x^2] over Uniform(0,1) = 1/3, within 3 SE of the fixed MC sample
  const auto cont = dist_of({CovariateComponent::intercept(), CovariateComponent::uniform(0.0, 1.0)});
  const auto sq = expect(cont, [](const Eigen::VectorXd& x) { return x[1] * x[1]; });
  CHECK(sq.std_error > 0.0);
  CHECK_THAT(sq.value, WithinAbs(1.0 / 3.0, 3.0 * sq.std_error));

  // MC expectation of a constant has zero spread
  const auto c = expect(cont, [](const Eigen::VectorXd&) { return 2.5; });
  CHECK_THAT(c.value, WithinAbs(2.5, 1e-12));
  CHECK_THAT(c.std_error, WithinAbs(0.0, 1e-12));
}

TEST_CASE("expect is linear") {
  auto f = [](const Eigen::VectorXd& x) { return x[1]; };
  auto g = [](const Eigen::VectorXd& x) { return x[1] * x[1] - 0.5; };
  const double alpha = 1.75, beta = -0.4;
  auto combo = [&](const Eigen::VectorXd& x) { return alpha * f(x) + beta * g(x); };

  const auto disc = dist_of({CovariateComponent::intercept(), CovariateComponent::bernoulli(0.42)});
  CHECK_THAT(expect(disc, combo).value,
             WithinAbs(alpha * expect(disc, f).value + beta * expect(disc, g).value, 1e-12));

  // continuous case reuses the identical fixed-seed sample through a context
  const auto cont = dist_of({CovariateComponent::intercept(), CovariateComponent::gaussian(0.2, 1.3)});
  const auto ctx = ExpectationContext::make(cont);
  CHECK_THAT(ctx.mean(combo).value,
             WithinAbs(alpha * ctx.mean(f).value + beta * ctx.mean(g).value, 1e-12));
}

TEST_CASE("discrete expectation is seed-independent") {
  const auto disc = dist_of({CovariateComponent::intercept(), CovariateComponent::bernoulli(0.3)});
  ExpectOptions a, b;
  a.mc_seed = 1;
  b.mc_seed = 999;
  auto f = [](const Eigen::VectorXd& x) { return 3.0 * x[1] - 1.0; };
  CHECK(expect(disc, f, a).value == expect(disc, f, b).value);
}
