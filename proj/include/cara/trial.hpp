#pragma once

// Sequential simulation of one trial. Each step: a covariate arrives, the
// policy assigns an arm (burn-in block first, adaptive rule after), only the
// assigned arm's response is drawn, then that arm's MLE is refit and
// rho_hat_m = (1/m) sum_i pi_1(theta_hat_m, xi_i) is recomputed under the
// new estimate. For discrete covariate distributions the rho_hat sum is
// grouped by atom — the same estimator, evaluated in O(#atoms) per step.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cara/covariates.hpp"
#include "cara/designs.hpp"
#include "cara/family.hpp"
#include "cara/rng.hpp"
#include "cara/targets.hpp"

namespace cara {

struct TrialConfig {
  std::vector<ArmModel> arms;  // exactly 2; true parameters
  CovariateDistribution covariates;
  TargetFunction target;
  Policy policy;
  int horizon = 0;  // n
  int refit_stride = 1;
  std::uint64_t seed = 0;
  bool retain_history = false;
  // Initial estimate theta_0 per arm; empty means the box centers.
  std::vector<Eigen::VectorXd> initial_theta;

  void validate() const {
    if (arms.size() != 2) throw std::invalid_argument("trial config: exactly 2 arms required");
    const int d = covariates.dimension();
    for (const auto& arm : arms) {
      arm.check();
      if (arm.dim() != d) {
        throw std::invalid_argument("trial config: arm dimension != covariate dimension");
      }
    }
    policy.check();
    if (horizon <= 2 * policy.burn_in) {
      throw std::invalid_argument("trial config: horizon n must exceed 2*m0");
    }
    if (refit_stride < 1) throw std::invalid_argument("trial config: refit_stride must be >= 1");
    if (!initial_theta.empty()) {
      if (initial_theta.size() != 2) throw std::invalid_argument("trial config: need 2 initial theta vectors");
      for (std::size_t k = 0; k < 2; ++k) {
        if (initial_theta[k].size() != d || !arms[k].box.contains(initial_theta[k])) {
          throw std::invalid_argument("trial config: initial theta outside box or wrong dimension");
        }
      }
    }
  }
};

struct TrialSnapshot {
  int m = 0;
  double arm1_fraction = 0.0;
  double rho_hat = 0.0;
};

struct StratumCount {
  Eigen::VectorXd x;
  double prob = 0.0;
  long total = 0;
  std::vector<long> per_arm;
};

struct TrialState {
  int m = 0;
  std::vector<ArmData> arm_data;
  std::vector<long> counts;  // N_{m,k}
  std::vector<ArmModel> estimates;  // family/box from config, theta = theta_hat
  double rho_hat = std::numeric_limits<double>::quiet_NaN();
  BurninSchedule burnin;

  std::vector<Eigen::VectorXd> covariate_history;
  std::vector<int> assignments;
  std::vector<double> psi_history;  // realized assignment probabilities

  // per-stratum counters, discrete distributions only
  std::vector<CovariateDistribution::Atom> atoms;
  std::vector<long> stratum_totals;
  std::vector<std::vector<long>> stratum_counts;  // [atom][arm]

  std::vector<long> fit_attempts;
  std::vector<long> fit_failures;

  std::vector<int> snapshot_grid;
  std::size_t next_snapshot = 0;
  std::vector<TrialSnapshot> snapshots;
};

struct TrialResult {
  int horizon = 0;
  std::uint64_t seed = 0;
  std::vector<long> final_counts;
  std::vector<double> final_allocation;  // N_{n,k}/n
  std::vector<Eigen::VectorXd> theta_hat;
  double rho_hat = 0.0;
  std::vector<StratumCount> strata;
  std::vector<TrialSnapshot> snapshots;
  std::vector<long> fit_attempts;
  std::vector<long> fit_failures;
  // populated only when retain_history is set
  std::vector<Eigen::VectorXd> covariate_history;
  std::vector<int> assignments;
  std::vector<double> psi_history;
  std::vector<int> intercept_coordinates;
};

namespace detail {

inline std::vector<int> snapshot_grid(int start, int n) {
  std::vector<int> grid;
  double m = start;
  while (static_cast<int>(m) < n) {
    if (grid.empty() || static_cast<int>(m) > grid.back()) grid.push_back(static_cast<int>(m));
    m = std::ceil(m * 1.5);
  }
  if (grid.empty() || grid.back() != n) grid.push_back(n);
  return grid;
}

inline int atom_index(const std::vector<CovariateDistribution::Atom>& atoms,
                      const Eigen::VectorXd& x) {
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (atoms[a].x == x) return static_cast<int>(a);
  }
  throw std::logic_error("covariate draw does not match any atom");
}

}  // namespace detail

inline TrialState init_trial_state(const TrialConfig& config, Rng& rng) {
  config.validate();
  TrialState st;
  st.arm_data.resize(2);
  st.counts.assign(2, 0);
  st.estimates = config.arms;
  for (std::size_t k = 0; k < 2; ++k) {
    st.estimates[k].theta = config.initial_theta.empty() ? config.arms[k].box.center()
                                                         : config.initial_theta[k];
  }
  st.burnin = BurninSchedule(config.policy.burn_in, rng);
  if (config.covariates.is_discrete()) {
    st.atoms = config.covariates.enumerate_atoms();
    st.stratum_totals.assign(st.atoms.size(), 0);
    st.stratum_counts.assign(st.atoms.size(), std::vector<long>(2, 0));
  }
  st.fit_attempts.assign(2, 0);
  st.fit_failures.assign(2, 0);
  st.snapshot_grid = detail::snapshot_grid(2 * config.policy.burn_in, config.horizon);
  return st;
}

// Allocation probability for the next subject given the current state; only
// valid once burn-in is complete.
inline double allocation_probability(const Policy& policy, const TrialState& state,
                                     const Eigen::VectorXd& xi_new, const TargetFunction& target) {
  if (state.m < 2 * policy.burn_in) {
    throw std::logic_error("allocation_probability called during burn-in");
  }
  const double pi_hat = evaluate(target, state.estimates[0], state.estimates[1], xi_new);
  const double arm1_fraction =
      static_cast<double>(state.counts[0]) / static_cast<double>(state.m);
  return policy.allocation_probability(pi_hat, arm1_fraction, state.rho_hat,
                                       static_cast<int>(state.estimates.size()));
}

namespace detail {

inline void recompute_rho(TrialState& st, const TrialConfig& config) {
  const auto& t = config.target;
  if (!st.atoms.empty()) {
    CompensatedSum s;
    for (std::size_t a = 0; a < st.atoms.size(); ++a) {
      if (st.stratum_totals[a] == 0) continue;
      s.add(static_cast<double>(st.stratum_totals[a]) *
            evaluate(t, st.estimates[0], st.estimates[1], st.atoms[a].x));
    }
    st.rho_hat = s.value() / static_cast<double>(st.m);
  } else {
    CompensatedSum s;
    for (const auto& xi : st.covariate_history) {
      s.add(evaluate(t, st.estimates[0], st.estimates[1], xi));
    }
    st.rho_hat = s.value() / static_cast<double>(st.m);
  }
}

inline void refit_arm(TrialState& st, const TrialConfig& config, int arm) {
  ++st.fit_attempts[static_cast<std::size_t>(arm)];
  const auto& model = config.arms[static_cast<std::size_t>(arm)];
  FitResult fit = fit_mle(model.family, model.box, st.arm_data[static_cast<std::size_t>(arm)],
                          st.estimates[static_cast<std::size_t>(arm)].theta);
  if (!fit.converged) ++st.fit_failures[static_cast<std::size_t>(arm)];
  st.estimates[static_cast<std::size_t>(arm)].theta = std::move(fit.theta);
}

}  // namespace detail

inline void step(TrialState& st, const TrialConfig& config, Rng& rng) {
  if (st.m >= config.horizon) throw std::logic_error("step: trial horizon already reached");
  const int m_new = st.m + 1;
  const int burnin_end = 2 * config.policy.burn_in;

  Eigen::VectorXd xi = config.covariates.sample(rng);

  int arm;
  double psi;
  if (m_new <= burnin_end) {
    arm = st.burnin.arm_at(m_new);
    psi = arm == 0 ? 1.0 : 0.0;  // realized conditional probability is degenerate
  } else {
    psi = allocation_probability(config.policy, st, xi, config.target);
    arm = rng.bernoulli(psi) ? 0 : 1;
  }

  // Only the assigned arm's response exists; the other is never drawn.
  const double y = sample_response(config.arms[static_cast<std::size_t>(arm)], xi, rng);

  st.arm_data[static_cast<std::size_t>(arm)].add(xi, y);
  ++st.counts[static_cast<std::size_t>(arm)];
  st.assignments.push_back(arm);
  st.covariate_history.push_back(std::move(xi));
  if (config.retain_history) st.psi_history.push_back(psi);
  if (!st.atoms.empty()) {
    const int a = detail::atom_index(st.atoms, st.covariate_history.back());
    ++st.stratum_totals[static_cast<std::size_t>(a)];
    ++st.stratum_counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(arm)];
  }
  st.m = m_new;

  if (m_new == burnin_end) {
    // Burn-in just completed: initialize both arms' estimates from their
    // burn-in samples, then rho_hat becomes well-defined.
    detail::refit_arm(st, config, 0);
    detail::refit_arm(st, config, 1);
    detail::recompute_rho(st, config);
  } else if (m_new > burnin_end && m_new % config.refit_stride == 0) {
    detail::refit_arm(st, config, arm);
    detail::recompute_rho(st, config);
  }

  if (st.next_snapshot < st.snapshot_grid.size() && m_new == st.snapshot_grid[st.next_snapshot]) {
    st.snapshots.push_back({m_new,
                            static_cast<double>(st.counts[0]) / static_cast<double>(m_new),
                            st.rho_hat});
    ++st.next_snapshot;
  }
}

inline TrialResult run_trial(const TrialConfig& config) {
  Rng rng(config.seed);
  TrialState st = init_trial_state(config, rng);
  for (int i = 0; i < config.horizon; ++i) step(st, config, rng);

  TrialResult r;
  r.horizon = config.horizon;
  r.seed = config.seed;
  r.final_counts = st.counts;
  r.final_allocation = {static_cast<double>(st.counts[0]) / config.horizon,
                        static_cast<double>(st.counts[1]) / config.horizon};
  r.theta_hat = {st.estimates[0].theta, st.estimates[1].theta};
  r.rho_hat = st.rho_hat;
  for (std::size_t a = 0; a < st.atoms.size(); ++a) {
    r.strata.push_back({st.atoms[a].x, st.atoms[a].prob, st.stratum_totals[a], st.stratum_counts[a]});
  }
  r.snapshots = st.snapshots;
  r.fit_attempts = st.fit_attempts;
  r.fit_failures = st.fit_failures;
  if (config.retain_history) {
    r.covariate_history = std::move(st.covariate_history);
    r.assignments = std::move(st.assignments);
    r.psi_history = std::move(st.psi_history);
    r.intercept_coordinates = config.covariates.intercept_coordinates();
  }
  return r;
}

struct BallProportion {
  long arm1 = 0;
  long total = 0;
  std::optional<double> ratio;  // absent when the ball is empty
};

// Counts over the subjects whose covariate lies in the Euclidean ball
// B(center, radius), distances taken over non-intercept coordinates.
inline BallProportion ball_proportion(const TrialResult& result, const Eigen::VectorXd& center,
                                      double radius) {
  if (result.covariate_history.empty() && result.horizon > 0) {
    throw std::invalid_argument("ball_proportion: trial was run without retain_history");
  }
  if (!(radius > 0.0)) throw std::invalid_argument("ball_proportion: radius must be > 0");
  std::vector<bool> skip(static_cast<std::size_t>(center.size()), false);
  for (int idx : result.intercept_coordinates) skip[static_cast<std::size_t>(idx)] = true;

  BallProportion out;
  for (std::size_t i = 0; i < result.covariate_history.size(); ++i) {
    const auto& xi = result.covariate_history[i];
    if (xi.size() != center.size()) {
      throw std::invalid_argument("ball_proportion: center dimension mismatch");
    }
    double d2 = 0.0;
    for (int j = 0; j < xi.size(); ++j) {
      if (skip[static_cast<std::size_t>(j)]) continue;
      const double diff = xi[j] - center[j];
      d2 += diff * diff;
    }
    if (std::isinf(radius) || d2 <= radius * radius) {
      ++out.total;
      if (result.assignments[i] == 0) ++out.arm1;
    }
  }
  if (out.total > 0) {
    out.ratio = static_cast<double>(out.arm1) / static_cast<double>(out.total);
  }
  return out;
}

}  // namespace cara
