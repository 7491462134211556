#pragma once

// Replicated-trial harness. Replication r runs with seed split_seed(base, r)
// on its own RNG stream; workers pull replication indices from a shared
// counter and write into preallocated slots, so the reduction (compensated
// and pairwise sums over the slot order) is identical for any worker count
// or execution order. Each theory comparison row carries its empirical
// value, the theoretical one, an MC standard error and a pass flag at
// tolerance max(20% relative, 3 * SE).

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cara/asymptotics.hpp"
#include "cara/numerics.hpp"
#include "cara/rng.hpp"
#include "cara/trial.hpp"

namespace cara {

struct MCConfig {
  TrialConfig trial;  // template; its seed field is ignored
  int replications = 0;
  std::uint64_t base_seed = 0;
  int workers = 0;  // 0 means hardware concurrency

  void validate() const {
    trial.validate();
    if (replications < 2) throw std::invalid_argument("mc config: replications must be >= 2");
    if (workers < 0) throw std::invalid_argument("mc config: workers must be >= 0");
  }
};

struct ComparisonRow {
  std::string name;
  double empirical = 0.0;
  double theoretical = 0.0;
  double std_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct StratumRow {
  Eigen::VectorXd x;
  double prob = 0.0;
  double mean_proportion = 0.0;  // mean over replications of N_{n,1|x}/N_n(x)
  double target_pi = 0.0;        // pi_1(theta, x) (or p for complete randomization)
  double std_error = 0.0;
  double deviation = 0.0;
};

struct MonteCarloReport {
  int replications = 0;
  int horizon = 0;
  double gamma = 0.0;
  bool covariates_discrete = false;

  double mean_allocation = 0.0;
  double se_mean_allocation = 0.0;
  double var_allocation = 0.0;   // Var(N_{n,1}/n)
  double var_scaled = 0.0;       // Var(sqrt(n) (N_{n,1}/n - v)) = n * var
  double se_var_scaled = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;

  Eigen::MatrixXd theta_cov_scaled;  // cov of sqrt(n) (theta_hat - theta)
  Eigen::MatrixXd theta_cov_se;

  std::vector<StratumRow> strata;

  long fit_failures_total = 0;
  long replications_with_fit_failure = 0;

  AsymptoticSummary theory;
  std::vector<ComparisonRow> comparisons;
  bool all_pass = false;
};

namespace detail {

struct RepOutcome {
  double allocation = 0.0;
  Eigen::VectorXd theta;  // flattened (theta_hat_1, theta_hat_2)
  std::vector<std::array<long, 2>> strata;  // (arm1 count, total) per atom
  long fit_failures = 0;
};

inline ComparisonRow make_row(std::string name, double empirical, double theoretical, double se) {
  ComparisonRow row;
  row.name = std::move(name);
  row.empirical = empirical;
  row.theoretical = theoretical;
  row.std_error = se;
  row.tolerance = std::fmax(0.2 * std::fabs(theoretical), 3.0 * se);
  row.pass = std::fabs(empirical - theoretical) <= row.tolerance;
  return row;
}

}  // namespace detail

inline MonteCarloReport run_monte_carlo(const MCConfig& mc) {
  mc.validate();
  const int R = mc.replications;
  const int n = mc.trial.horizon;
  const int d1 = mc.trial.arms[0].dim();
  const int d2 = mc.trial.arms[1].dim();

  std::vector<detail::RepOutcome> reps(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= R) break;
      TrialConfig cfg = mc.trial;
      cfg.seed = split_seed(mc.base_seed, static_cast<std::uint64_t>(r));
      const TrialResult res = run_trial(cfg);
      detail::RepOutcome& out = reps[static_cast<std::size_t>(r)];
      out.allocation = res.final_allocation[0];
      out.theta.resize(d1 + d2);
      out.theta.head(d1) = res.theta_hat[0];
      out.theta.tail(d2) = res.theta_hat[1];
      for (const auto& st : res.strata) {
        out.strata.push_back({st.per_arm[0], st.total});
      }
      out.fit_failures = res.fit_failures[0] + res.fit_failures[1];
    }
  };
  int workers = mc.workers > 0 ? mc.workers
                               : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers > R) workers = R;
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MonteCarloReport rep;
  rep.replications = R;
  rep.horizon = n;
  rep.gamma = mc.trial.policy.effective_gamma();
  rep.covariates_discrete = mc.trial.covariates.is_discrete();
  rep.theory = summarize(mc.trial.arms, mc.trial.covariates, mc.trial.target, rep.gamma);

  const bool complete_rand = mc.trial.policy.kind == Policy::Kind::CompleteRandomization;
  const double mean_theory = complete_rand ? mc.trial.policy.p : rep.theory.v;
  const double var_theory =
      complete_rand ? mc.trial.policy.p * (1.0 - mc.trial.policy.p) : rep.theory.sigma_sq;

  // ---- reduction (deterministic: slot order, compensated/pairwise sums) ----
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::vector<double> alloc(reps.size()), scaled(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) {
    alloc[r] = reps[r].allocation;
    scaled[r] = sqrt_n * (reps[r].allocation - mean_theory);
  }
  const Moments alloc_m = compute_moments(alloc);
  const Moments scaled_m = compute_moments(scaled);
  rep.mean_allocation = alloc_m.mean;
  rep.se_mean_allocation = alloc_m.se_mean;
  rep.var_allocation = alloc_m.variance;
  rep.var_scaled = scaled_m.variance;
  rep.se_var_scaled = scaled_m.se_variance;
  rep.skewness = scaled_m.skewness;
  rep.excess_kurtosis = scaled_m.excess_kurtosis;

  // theta covariance of sqrt(n)(theta_hat - theta), entrywise with MC SEs
  const int dt = d1 + d2;
  Eigen::VectorXd theta_true(dt);
  theta_true.head(d1) = mc.trial.arms[0].theta;
  theta_true.tail(d2) = mc.trial.arms[1].theta;
  std::vector<Eigen::VectorXd> z(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) {
    z[r] = sqrt_n * (reps[r].theta - theta_true);
  }
  Eigen::VectorXd z_mean(dt);
  {
    std::vector<double> coord(reps.size());
    for (int j = 0; j < dt; ++j) {
      for (std::size_t r = 0; r < reps.size(); ++r) coord[r] = z[r][j];
      z_mean[j] = pairwise_mean(coord);
    }
  }
  rep.theta_cov_scaled.resize(dt, dt);
  rep.theta_cov_se.resize(dt, dt);
  {
    std::vector<double> prod(reps.size()), dev(reps.size());
    for (int i = 0; i < dt; ++i) {
      for (int j = 0; j < dt; ++j) {
        for (std::size_t r = 0; r < reps.size(); ++r) {
          prod[r] = (z[r][i] - z_mean[i]) * (z[r][j] - z_mean[j]);
        }
        const double cij = pairwise_sum(prod) / static_cast<double>(R - 1);
        rep.theta_cov_scaled(i, j) = cij;
        for (std::size_t r = 0; r < reps.size(); ++r) {
          dev[r] = (prod[r] - cij) * (prod[r] - cij);
        }
        rep.theta_cov_se(i, j) =
            std::sqrt(pairwise_sum(dev) / static_cast<double>(R - 1) / static_cast<double>(R));
      }
    }
  }

  // per-stratum mean proportions
  if (rep.covariates_discrete) {
    const auto atoms = mc.trial.covariates.enumerate_atoms();
    std::vector<double> prop;
    prop.reserve(reps.size());
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      prop.clear();
      for (const auto& r : reps) {
        if (r.strata[a][1] > 0) {
          prop.push_back(static_cast<double>(r.strata[a][0]) / static_cast<double>(r.strata[a][1]));
        }
      }
      StratumRow row;
      row.x = atoms[a].x;
      row.prob = atoms[a].prob;
      row.target_pi = complete_rand
                          ? mc.trial.policy.p
                          : evaluate(mc.trial.target, mc.trial.arms[0], mc.trial.arms[1], atoms[a].x);
      if (prop.size() >= 2) {
        const Moments m = compute_moments(prop);
        row.mean_proportion = m.mean;
        row.std_error = m.se_mean;
      } else if (prop.size() == 1) {
        row.mean_proportion = prop[0];
      }
      row.deviation = row.mean_proportion - row.target_pi;
      rep.strata.push_back(std::move(row));
    }
  }

  {
    CompensatedSum failures;
    long reps_with = 0;
    for (const auto& r : reps) {
      failures.add(static_cast<double>(r.fit_failures));
      if (r.fit_failures > 0) ++reps_with;
    }
    rep.fit_failures_total = static_cast<long>(failures.value());
    rep.replications_with_fit_failure = reps_with;
  }

  // ---- comparison rows, pass flags after the full reduction ----
  rep.comparisons.push_back(detail::make_row("mean_allocation", rep.mean_allocation, mean_theory,
                                             rep.se_mean_allocation));
  rep.comparisons.push_back(
      detail::make_row("var_scaled_allocation", rep.var_scaled, var_theory, rep.se_var_scaled));
  if (!complete_rand) {
    for (int i = 0; i < dt; ++i) {
      for (int j = i; j < dt; ++j) {
        rep.comparisons.push_back(detail::make_row(
            "theta_cov[" + std::to_string(i) + "][" + std::to_string(j) + "]",
            rep.theta_cov_scaled(i, j), rep.theory.V(i, j), rep.theta_cov_se(i, j)));
      }
    }
  }
  for (std::size_t a = 0; a < rep.strata.size(); ++a) {
    const auto& row = rep.strata[a];
    rep.comparisons.push_back(detail::make_row("stratum[" + std::to_string(a) + "]_proportion",
                                               row.mean_proportion, row.target_pi, row.std_error));
  }
  if (R >= 1000) {
    // CLT smoke check by moments; absolute thresholds, not SE-scaled
    ComparisonRow skew{"skewness", rep.skewness, 0.0, 0.0, 0.15,
                       std::fabs(rep.skewness) < 0.15};
    ComparisonRow kurt{"excess_kurtosis", rep.excess_kurtosis, 0.0, 0.0, 0.3,
                       std::fabs(rep.excess_kurtosis) < 0.3};
    rep.comparisons.push_back(std::move(skew));
    rep.comparisons.push_back(std::move(kurt));
  }
  rep.all_pass = true;
  for (const auto& row : rep.comparisons) rep.all_pass = rep.all_pass && row.pass;
  return rep;
}

// Per-stratum comparison table; defined for discrete covariates only.
inline const std::vector<StratumRow>& stratum_report(const MonteCarloReport& report) {
  if (!report.covariates_discrete) {
    throw std::invalid_argument(
        "stratum_report: covariate distribution is continuous; use ball_proportion on retained "
        "trial histories instead");
  }
  return report.strata;
}

}  // namespace cara
