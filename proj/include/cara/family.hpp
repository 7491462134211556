#pragma once

// Exponential-family response models with canonical links:
// f(y | x, theta) = exp{(y*mu - a(mu))/phi + b(y, phi)}, mu = x . theta.
// Covers Bernoulli/logit, Poisson/log and Normal/identity. The canonical
// link makes h' == 1, h'' == 0, so the score is (y - a'(mu))/phi * x and the
// conditional Fisher information is a''(mu)/phi * x x^T.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cara/numerics.hpp"
#include "cara/rng.hpp"

namespace cara {

enum class FamilyKind { BernoulliLogit, PoissonLog, NormalIdentity };

inline const char* family_name(FamilyKind k) {
  switch (k) {
    case FamilyKind::BernoulliLogit: return "bernoulli_logit";
    case FamilyKind::PoissonLog: return "poisson_log";
    case FamilyKind::NormalIdentity: return "normal_identity";
  }
  return "?";
}

struct Family {
  FamilyKind kind = FamilyKind::BernoulliLogit;
  double phi = 1.0;  // fixed scale; 1 except NormalIdentity

  static Family bernoulli_logit() { return {FamilyKind::BernoulliLogit, 1.0}; }
  static Family poisson_log() { return {FamilyKind::PoissonLog, 1.0}; }
  static Family normal_identity(double phi) {
    if (!(phi > 0.0)) throw std::invalid_argument("normal_identity: phi must be > 0");
    return {FamilyKind::NormalIdentity, phi};
  }

  // a(mu)
  double cumulant(double mu) const {
    switch (kind) {
      case FamilyKind::BernoulliLogit:
        // log(1 + e^mu), overflow-safe
        return std::fmax(mu, 0.0) + std::log1p(std::exp(-std::fabs(mu)));
      case FamilyKind::PoissonLog: return std::exp(mu);
      case FamilyKind::NormalIdentity: return 0.5 * mu * mu;
    }
    return 0.0;
  }

  // a'(mu) = E[Y | mu]
  double mean(double mu) const {
    switch (kind) {
      case FamilyKind::BernoulliLogit: return 1.0 / (1.0 + std::exp(-mu));
      case FamilyKind::PoissonLog: return std::exp(mu);
      case FamilyKind::NormalIdentity: return mu;
    }
    return 0.0;
  }

  // a''(mu); > 0 everywhere on the natural-parameter domain
  double curvature(double mu) const {
    switch (kind) {
      case FamilyKind::BernoulliLogit: {
        const double p = mean(mu);
        return p * (1.0 - p);
      }
      case FamilyKind::PoissonLog: return std::exp(mu);
      case FamilyKind::NormalIdentity: return 1.0;
    }
    return 0.0;
  }

  // b(y, phi)
  double log_normalizer(double y) const {
    switch (kind) {
      case FamilyKind::BernoulliLogit: return 0.0;
      case FamilyKind::PoissonLog: return -std::lgamma(y + 1.0);
      case FamilyKind::NormalIdentity:
        return -y * y / (2.0 * phi) - 0.5 * std::log(2.0 * 3.14159265358979323846 * phi);
    }
    return 0.0;
  }

  bool in_support(double y) const {
    switch (kind) {
      case FamilyKind::BernoulliLogit: return y == 0.0 || y == 1.0;
      case FamilyKind::PoissonLog:
        return std::isfinite(y) && y >= 0.0 && y == std::floor(y);
      case FamilyKind::NormalIdentity: return std::isfinite(y);
    }
    return false;
  }
};

// Bounded parameter box Theta_k. The true theta and every estimate live here.
struct ParameterBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static ParameterBox centered(int dim, double half_width = 10.0) {
    ParameterBox b;
    b.lower = Eigen::VectorXd::Constant(dim, -half_width);
    b.upper = Eigen::VectorXd::Constant(dim, half_width);
    return b;
  }

  int dim() const { return static_cast<int>(lower.size()); }

  bool contains(const Eigen::VectorXd& theta) const {
    for (int i = 0; i < theta.size(); ++i) {
      if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
    }
    return true;
  }

  Eigen::VectorXd clip(Eigen::VectorXd theta) const {
    for (int i = 0; i < theta.size(); ++i) {
      theta[i] = cara::clamp(theta[i], lower[i], upper[i]);
    }
    return theta;
  }

  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }

  void validate() const {
    if (lower.size() != upper.size()) {
      throw std::invalid_argument("parameter box: lower/upper dimension mismatch");
    }
    for (int i = 0; i < lower.size(); ++i) {
      if (!(lower[i] < upper[i])) {
        throw std::invalid_argument("parameter box: lower must be < upper");
      }
    }
  }
};

struct ArmModel {
  Family family;
  Eigen::VectorXd theta;
  ParameterBox box;

  ArmModel() = default;
  ArmModel(Family f, Eigen::VectorXd t)
      : family(f), theta(std::move(t)), box(ParameterBox::centered(static_cast<int>(theta.size()))) {
    check();
  }
  ArmModel(Family f, Eigen::VectorXd t, ParameterBox b)
      : family(f), theta(std::move(t)), box(std::move(b)) {
    check();
  }

  int dim() const { return static_cast<int>(theta.size()); }

  void check() const {
    box.validate();
    if (box.dim() != dim()) throw std::invalid_argument("arm model: box dimension mismatch");
    if (!box.contains(theta)) throw std::invalid_argument("arm model: theta outside its box");
  }
};

// Observed sample of one arm: rows (covariate vector, response). Stored as a
// dense design matrix so the fitting passes vectorize.
class ArmData {
 public:
  void add(const Eigen::VectorXd& xi, double yi) {
    if (rows_ == 0) {
      dim_ = static_cast<int>(xi.size());
    } else if (xi.size() != dim_) {
      throw std::invalid_argument("arm data: covariate row dimension mismatch");
    }
    if (rows_ == xs_.rows()) {
      const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * xs_.rows());
      xs_.conservativeResize(cap, dim_);
      ys_.conservativeResize(cap);
    }
    xs_.row(rows_) = xi.transpose();
    ys_[rows_] = yi;
    ++rows_;
  }

  std::size_t size() const { return static_cast<std::size_t>(rows_); }
  int dim() const { return dim_; }
  auto design() const { return xs_.topRows(rows_); }
  auto responses() const { return ys_.head(rows_); }
  Eigen::VectorXd row(Eigen::Index i) const { return xs_.row(i).transpose(); }
  double response(Eigen::Index i) const { return ys_[i]; }

 private:
  Eigen::MatrixXd xs_;
  Eigen::VectorXd ys_;
  Eigen::Index rows_ = 0;
  int dim_ = 0;
};

namespace detail {
inline void check_dim(const ArmModel& arm, const Eigen::VectorXd& x) {
  if (x.size() != arm.theta.size()) {
    throw std::invalid_argument("covariate vector has length " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(arm.theta.size()));
  }
}
}  // namespace detail

// E[Y | x] = a'(x . theta)
inline double mean_response(const ArmModel& arm, const Eigen::VectorXd& x) {
  detail::check_dim(arm, x);
  return arm.family.mean(x.dot(arm.theta));
}

inline double sample_response(const ArmModel& arm, const Eigen::VectorXd& x, Rng& rng) {
  detail::check_dim(arm, x);
  const double mu = x.dot(arm.theta);
  switch (arm.family.kind) {
    case FamilyKind::BernoulliLogit:
      return rng.bernoulli(arm.family.mean(mu)) ? 1.0 : 0.0;
    case FamilyKind::PoissonLog:
      return static_cast<double>(rng.poisson(std::exp(mu)));
    case FamilyKind::NormalIdentity:
      return mu + std::sqrt(arm.family.phi) * rng.normal();
  }
  return 0.0;
}

inline double log_density(const ArmModel& arm, const Eigen::VectorXd& x, double y) {
  detail::check_dim(arm, x);
  if (!arm.family.in_support(y)) {
    throw std::invalid_argument(std::string("response outside the support of ") +
                                family_name(arm.family.kind));
  }
  const double mu = x.dot(arm.theta);
  return (y * mu - arm.family.cumulant(mu)) / arm.family.phi + arm.family.log_normalizer(y);
}

// (1/phi) a''(x.theta) x x^T — symmetric PSD of rank <= 1.
inline Eigen::MatrixXd conditional_fisher_info(const ArmModel& arm, const Eigen::VectorXd& x) {
  detail::check_dim(arm, x);
  const double w = arm.family.curvature(x.dot(arm.theta)) / arm.family.phi;
  return w * (x * x.transpose());
}

// d log f / d theta = (y - a'(x.theta))/phi * x
inline Eigen::VectorXd score(const ArmModel& arm, const Eigen::VectorXd& x, double y) {
  detail::check_dim(arm, x);
  const double mu = x.dot(arm.theta);
  return ((y - arm.family.mean(mu)) / arm.family.phi) * x;
}

struct FitResult {
  Eigen::VectorXd theta;
  bool converged = false;
};

inline constexpr double kFitTolerance = 1e-10;
inline constexpr int kFitMaxIterations = 50;

namespace detail {

struct FitPass {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// One sweep over the data: log-likelihood (up to the theta-free b terms),
// score and observed information at theta. One exp per row for the
// Bernoulli/Poisson kernels.
inline FitPass fit_pass(const Family& fam, const ArmData& data, const Eigen::VectorXd& theta) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int d = static_cast<int>(theta.size());
  FitPass out;
  out.grad = Eigen::VectorXd::Zero(d);
  out.hess = Eigen::MatrixXd::Zero(d, d);
  const Eigen::VectorXd mu = data.design() * theta;
  Eigen::VectorXd resid(n), weight(n);
  CompensatedSum ll;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = mu[i];
    const double y = data.response(i);
    double a, aprime, acurv;
    switch (fam.kind) {
      case FamilyKind::BernoulliLogit: {
        const double e = std::exp(-std::fabs(m));
        aprime = m >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        a = std::fmax(m, 0.0) + std::log1p(e);
        acurv = aprime * (1.0 - aprime);
        break;
      }
      case FamilyKind::PoissonLog:
        a = aprime = acurv = std::exp(m);
        break;
      case FamilyKind::NormalIdentity:
      default:
        a = 0.5 * m * m;
        aprime = m;
        acurv = 1.0;
        break;
    }
    ll.add((y * m - a) / fam.phi);
    resid[i] = (y - aprime) / fam.phi;
    weight[i] = acurv / fam.phi;
  }
  out.loglik = ll.value();
  const auto design = data.design();
  out.grad.noalias() = design.transpose() * resid;
  out.hess.noalias() = design.transpose() * weight.asDiagonal() * design;
  return out;
}

}  // namespace detail

// Maximum likelihood by Newton iteration with step halving (identical to
// IRLS for canonical links). Degenerate data — fewer rows than parameters, a
// singular weighted design, or iterates leaving the box (complete
// separation) — falls back to the warm start with converged = false.
inline FitResult fit_mle(const Family& family, const ParameterBox& box, const ArmData& data,
                         const Eigen::VectorXd& warm_start) {
  const int d = static_cast<int>(warm_start.size());
  if (box.dim() != d) throw std::invalid_argument("fit_mle: box/warm_start dimension mismatch");
  if (static_cast<int>(data.size()) < d) return {warm_start, false};
  if (data.dim() != d) throw std::invalid_argument("fit_mle: covariate row dimension mismatch");

  Eigen::VectorXd theta = box.clip(warm_start);
  detail::FitPass cur = detail::fit_pass(family, data, theta);

  for (int iter = 0; iter < kFitMaxIterations; ++iter) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cur.hess);
    const double emax = eig.eigenvalues().maxCoeff();
    const double emin = eig.eigenvalues().minCoeff();
    if (!(emin > 1e-12 * std::fmax(1.0, emax))) return {warm_start, false};

    const Eigen::VectorXd direction = eig.eigenvectors() *
        (eig.eigenvalues().cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * cur.grad));

    double step = 1.0;
    Eigen::VectorXd candidate;
    detail::FitPass cand;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      candidate = theta + step * direction;
      if (!candidate.allFinite()) return {warm_start, false};
      cand = detail::fit_pass(family, data, candidate);
      if (cand.loglik >= cur.loglik - 1e-12) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return {warm_start, false};
    if (!box.contains(candidate)) return {warm_start, false};

    const double change = (candidate - theta).cwiseAbs().maxCoeff();
    theta = candidate;
    cur = std::move(cand);
    if (change < kFitTolerance) break;
  }
  return {box.clip(theta), true};
}

}  // namespace cara
