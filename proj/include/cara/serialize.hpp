#pragma once

// JSON config parsing (strict: unknown keys are rejected, errors carry the
// field path) and JSON/CSV report serialization. Every report embeds the
// fully resolved config and the artifact version, so output files are
// self-describing. Doubles round-trip bit-exactly: nlohmann/json emits
// shortest-round-trip decimals, and the CSV writers use std::to_chars.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cara/asymptotics.hpp"
#include "cara/montecarlo.hpp"
#include "cara/trial.hpp"
#include "cara/version.hpp"

namespace cara {

using nlohmann::json;

class config_error : public std::runtime_error {
 public:
  config_error(const std::string& path, const std::string& message)
      : std::runtime_error("config error at '" + path + "': " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace detail {

// Tracks the field path and which keys were consumed; finish() rejects
// anything left over.
class JsonReader {
 public:
  JsonReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw config_error(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  JsonReader child(const std::string& key) {
    mark(key);
    return JsonReader(require(key), path_ + "." + key);
  }

  const json& require(const std::string& key) {
    mark(key);
    if (!j_.contains(key)) throw config_error(path_ + "." + key, "missing required field");
    return j_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    mark(key);
    return &j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = require(key);
    if (!v.is_number()) throw config_error(path_ + "." + key, "expected a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_number()) throw config_error(path_ + "." + key, "expected a number");
    return v->get<double>();
  }

  int integer(const std::string& key) {
    const json& v = require(key);
    if (!v.is_number_integer()) throw config_error(path_ + "." + key, "expected an integer");
    return v.get<int>();
  }

  int integer_or(const std::string& key, int fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw config_error(path_ + "." + key, "expected an integer");
    return v->get<int>();
  }

  std::uint64_t uinteger_or(const std::string& key, std::uint64_t fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
      throw config_error(path_ + "." + key, "expected an integer");
    }
    return v->get<std::uint64_t>();
  }

  bool boolean_or(const std::string& key, bool fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw config_error(path_ + "." + key, "expected a boolean");
    return v->get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = require(key);
    if (!v.is_string()) throw config_error(path_ + "." + key, "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const std::string& key, const std::string& fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_string()) throw config_error(path_ + "." + key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> number_array(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array()) throw config_error(path_ + "." + key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw config_error(path_ + "." + key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (consumed_.find(it.key()) == consumed_.end()) {
        throw config_error(path_ + "." + it.key(), "unknown key");
      }
    }
  }

 private:
  void mark(const std::string& key) { consumed_.insert(key); }

  const json& j_;
  std::string path_;
  std::set<std::string> consumed_;
};

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

inline json from_vector(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline json from_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace detail

struct OutputConfig {
  std::string format = "json";  // json | csv
  std::string path;
};

struct AppConfig {
  std::vector<ArmModel> arms;
  CovariateDistribution covariates;
  TargetFunction target;
  Policy policy;
  int horizon = 0;
  int refit_stride = 1;
  bool retain_history = false;
  std::vector<Eigen::VectorXd> initial_theta;
  int mc_replications = 0;
  std::uint64_t mc_base_seed = 0;
  ExpectOptions expect;
  OutputConfig output;

  TrialConfig trial_config(std::uint64_t seed) const {
    TrialConfig tc;
    tc.arms = arms;
    tc.covariates = covariates;
    tc.target = target;
    tc.policy = policy;
    tc.horizon = horizon;
    tc.refit_stride = refit_stride;
    tc.seed = seed;
    tc.retain_history = retain_history;
    tc.initial_theta = initial_theta;
    return tc;
  }

  MCConfig mc_config(int replications_override = 0, int workers = 0) const {
    MCConfig mc;
    mc.trial = trial_config(0);
    mc.replications = replications_override > 0 ? replications_override : mc_replications;
    mc.base_seed = mc_base_seed;
    mc.workers = workers;
    return mc;
  }
};

namespace detail {

inline CovariateComponent parse_component(const json& j, const std::string& path) {
  JsonReader r(j, path);
  const std::string type = r.string("type");
  CovariateComponent out;
  if (type == "intercept") {
    out = CovariateComponent::intercept();
  } else if (type == "bernoulli") {
    out = CovariateComponent::bernoulli(r.number("p"));
  } else if (type == "categorical") {
    out = CovariateComponent::categorical(r.number_array("probs"));
  } else if (type == "uniform") {
    out = CovariateComponent::uniform(r.number("a"), r.number("b"));
  } else if (type == "gaussian") {
    out = CovariateComponent::gaussian(r.number("mean"), r.number("sd"));
  } else {
    throw config_error(path + ".type", "unknown covariate type '" + type + "'");
  }
  r.finish();
  return out;
}

inline ArmModel parse_arm(const json& j, const std::string& path, int dim) {
  JsonReader r(j, path);
  const std::string fam = r.string("family");
  Family family;
  if (fam == "bernoulli_logit") {
    family = Family::bernoulli_logit();
  } else if (fam == "poisson_log") {
    family = Family::poisson_log();
  } else if (fam == "normal_identity") {
    family = Family::normal_identity(r.number_or("phi", 1.0));
  } else {
    throw config_error(path + ".family", "unknown family '" + fam + "'");
  }
  if (fam != "normal_identity" && r.has("phi")) {
    throw config_error(path + ".phi", "phi is only configurable for normal_identity");
  }
  const Eigen::VectorXd theta = to_vector(r.number_array("theta"));
  if (theta.size() != dim) {
    throw config_error(path + ".theta",
                       "length " + std::to_string(theta.size()) + " does not match covariate dimension " +
                           std::to_string(dim));
  }
  ParameterBox box = ParameterBox::centered(dim);
  if (r.has("box")) {
    JsonReader rb = r.child("box");
    box.lower = to_vector(rb.number_array("lower"));
    box.upper = to_vector(rb.number_array("upper"));
    rb.finish();
    if (box.dim() != dim) throw config_error(path + ".box", "box dimension mismatch");
  }
  r.finish();
  try {
    return ArmModel(family, theta, box);
  } catch (const std::invalid_argument& e) {
    throw config_error(path, e.what());
  }
}

inline TargetFunction parse_target(const json& j, const std::string& path) {
  JsonReader r(j, path);
  const std::string variant = r.string("variant");
  const std::string grad = r.string_or("gradient", "analytic");
  TargetFunction::GradientMode gm;
  if (grad == "analytic") {
    gm = TargetFunction::GradientMode::Analytic;
  } else if (grad == "finite_difference") {
    gm = TargetFunction::GradientMode::FiniteDifference;
  } else {
    throw config_error(path + ".gradient", "expected 'analytic' or 'finite_difference'");
  }
  TargetFunction out;
  if (variant == "rsihr") {
    out = TargetFunction::rsihr(gm);
  } else if (variant == "neyman_binary") {
    out = TargetFunction::neyman_binary(gm);
  } else if (variant == "fixed") {
    out = TargetFunction::fixed(r.number("c"));
  } else {
    throw config_error(path + ".variant", "unknown target variant '" + variant + "'");
  }
  out.fd_step_scale = r.number_or("fd_step_scale", 1e-5);
  r.finish();
  return out;
}

inline Policy parse_policy(const json& j, const std::string& path, int dim) {
  JsonReader r(j, path);
  const std::string variant = r.string("variant");
  const int default_m0 = std::max(2 * dim, 5);
  Policy out;
  try {
    if (variant == "complete_randomization") {
      out = Policy::complete_randomization(r.number("p"), r.integer_or("m0", default_m0));
    } else if (variant == "zhcc") {
      out = Policy::zhcc(r.integer_or("m0", default_m0));
    } else if (variant == "cadbcd") {
      double gamma;
      const json& g = r.require("gamma");
      if (g.is_string() && (g.get<std::string>() == "inf" || g.get<std::string>() == "infinity")) {
        gamma = std::numeric_limits<double>::infinity();
      } else if (g.is_number()) {
        gamma = g.get<double>();
      } else {
        throw config_error(path + ".gamma", "expected a number or \"inf\"");
      }
      out = Policy::cadbcd(gamma, r.integer_or("m0", default_m0));
    } else {
      throw config_error(path + ".variant", "unknown policy variant '" + variant + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw config_error(path, e.what());
  }
  r.finish();
  return out;
}

}  // namespace detail

inline AppConfig parse_config(const json& j) {
  detail::JsonReader root(j, "$");

  const json& cov = root.require("covariates");
  if (!cov.is_array() || cov.empty()) {
    throw config_error("$.covariates", "expected a non-empty array of components");
  }
  AppConfig cfg;
  for (std::size_t i = 0; i < cov.size(); ++i) {
    cfg.covariates.components.push_back(
        detail::parse_component(cov[i], "$.covariates[" + std::to_string(i) + "]"));
  }
  const int dim = cfg.covariates.dimension();

  const json& arms = root.require("arms");
  if (!arms.is_array() || arms.size() != 2) {
    throw config_error("$.arms", "expected an array of exactly 2 arms");
  }
  for (std::size_t k = 0; k < 2; ++k) {
    cfg.arms.push_back(detail::parse_arm(arms[k], "$.arms[" + std::to_string(k) + "]", dim));
  }

  cfg.target = detail::parse_target(root.require("target"), "$.target");
  cfg.policy = detail::parse_policy(root.require("policy"), "$.policy", dim);

  {
    detail::JsonReader rt(root.require("trial"), "$.trial");
    cfg.horizon = rt.integer("n");
    cfg.refit_stride = rt.integer_or("refit_stride", 1);
    cfg.retain_history = rt.boolean_or("retain_history", false);
    if (const json* t0 = rt.optional("theta0")) {
      if (!t0->is_array() || t0->size() != 2) {
        throw config_error("$.trial.theta0", "expected an array of 2 vectors");
      }
      for (const auto& v : *t0) {
        std::vector<double> coords;
        for (const auto& e : v) {
          if (!e.is_number()) throw config_error("$.trial.theta0", "expected numeric vectors");
          coords.push_back(e.get<double>());
        }
        cfg.initial_theta.push_back(detail::to_vector(coords));
      }
    }
    rt.finish();
  }

  if (root.has("mc")) {
    detail::JsonReader rm = root.child("mc");
    cfg.mc_replications = rm.integer("replications");
    cfg.mc_base_seed = rm.uinteger_or("base_seed", 0);
    if (cfg.mc_replications < 2) {
      throw config_error("$.mc.replications", "replications must be >= 2");
    }
    rm.finish();
  }

  if (root.has("expect")) {
    detail::JsonReader re = root.child("expect");
    cfg.expect.mc_samples = re.integer_or("mc_samples", kExpectDefaultSamples);
    cfg.expect.mc_seed = re.uinteger_or("mc_seed", kExpectSeed);
    if (cfg.expect.mc_samples < 2) throw config_error("$.expect.mc_samples", "must be >= 2");
    re.finish();
  }

  if (root.has("output")) {
    detail::JsonReader ro = root.child("output");
    cfg.output.format = ro.string_or("format", "json");
    cfg.output.path = ro.string_or("path", "");
    if (cfg.output.format != "json" && cfg.output.format != "csv") {
      throw config_error("$.output.format", "expected 'json' or 'csv'");
    }
    ro.finish();
  }

  root.finish();

  try {
    cfg.trial_config(0).validate();
  } catch (const std::invalid_argument& e) {
    throw config_error("$", e.what());
  }
  return cfg;
}

inline AppConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw config_error("$", "cannot open config file '" + file + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

// Fully resolved config (defaults applied), echoed into every output file.
inline json resolved_config_json(const AppConfig& cfg) {
  json j;
  j["covariates"] = json::array();
  for (const auto& c : cfg.covariates.components) {
    json jc;
    switch (c.kind) {
      case CovariateComponent::Kind::Intercept: jc["type"] = "intercept"; break;
      case CovariateComponent::Kind::Bernoulli:
        jc["type"] = "bernoulli";
        jc["p"] = c.p;
        break;
      case CovariateComponent::Kind::Categorical:
        jc["type"] = "categorical";
        jc["probs"] = c.probs;
        break;
      case CovariateComponent::Kind::Uniform:
        jc["type"] = "uniform";
        jc["a"] = c.a;
        jc["b"] = c.b;
        break;
      case CovariateComponent::Kind::Gaussian:
        jc["type"] = "gaussian";
        jc["mean"] = c.mean;
        jc["sd"] = c.sd;
        break;
    }
    j["covariates"].push_back(std::move(jc));
  }
  j["arms"] = json::array();
  for (const auto& arm : cfg.arms) {
    json ja;
    ja["family"] = family_name(arm.family.kind);
    if (arm.family.kind == FamilyKind::NormalIdentity) ja["phi"] = arm.family.phi;
    ja["theta"] = detail::from_vector(arm.theta);
    ja["box"] = {{"lower", detail::from_vector(arm.box.lower)},
                 {"upper", detail::from_vector(arm.box.upper)}};
    j["arms"].push_back(std::move(ja));
  }
  {
    json jt;
    switch (cfg.target.kind) {
      case TargetFunction::Kind::RSIHR: jt["variant"] = "rsihr"; break;
      case TargetFunction::Kind::NeymanBinary: jt["variant"] = "neyman_binary"; break;
      case TargetFunction::Kind::Fixed:
        jt["variant"] = "fixed";
        jt["c"] = cfg.target.fixed_c;
        break;
      case TargetFunction::Kind::Custom: jt["variant"] = "custom"; break;
    }
    jt["gradient"] = cfg.target.gradient_mode == TargetFunction::GradientMode::Analytic
                         ? "analytic"
                         : "finite_difference";
    jt["fd_step_scale"] = cfg.target.fd_step_scale;
    j["target"] = std::move(jt);
  }
  {
    json jp;
    switch (cfg.policy.kind) {
      case Policy::Kind::CompleteRandomization:
        jp["variant"] = "complete_randomization";
        jp["p"] = cfg.policy.p;
        break;
      case Policy::Kind::ZHCC: jp["variant"] = "zhcc"; break;
      case Policy::Kind::CADBCD:
        jp["variant"] = "cadbcd";
        if (std::isinf(cfg.policy.gamma)) {
          jp["gamma"] = "inf";
        } else {
          jp["gamma"] = cfg.policy.gamma;
        }
        break;
    }
    jp["m0"] = cfg.policy.burn_in;
    j["policy"] = std::move(jp);
  }
  j["trial"] = {{"n", cfg.horizon},
                {"refit_stride", cfg.refit_stride},
                {"retain_history", cfg.retain_history}};
  if (!cfg.initial_theta.empty()) {
    json t0 = json::array();
    for (const auto& v : cfg.initial_theta) t0.push_back(detail::from_vector(v));
    j["trial"]["theta0"] = std::move(t0);
  }
  if (cfg.mc_replications > 0) {
    j["mc"] = {{"replications", cfg.mc_replications}, {"base_seed", cfg.mc_base_seed}};
  }
  j["expect"] = {{"mc_samples", cfg.expect.mc_samples}, {"mc_seed", cfg.expect.mc_seed}};
  return j;
}

inline json to_json(const TrialResult& r) {
  json j;
  j["horizon"] = r.horizon;
  j["seed"] = r.seed;
  j["final_counts"] = r.final_counts;
  j["final_allocation"] = r.final_allocation;
  j["theta_hat"] = json::array();
  for (const auto& t : r.theta_hat) j["theta_hat"].push_back(detail::from_vector(t));
  j["rho_hat"] = r.rho_hat;
  j["fit_attempts"] = r.fit_attempts;
  j["fit_failures"] = r.fit_failures;
  j["snapshots"] = json::array();
  for (const auto& s : r.snapshots) {
    j["snapshots"].push_back({{"m", s.m}, {"arm1_fraction", s.arm1_fraction}, {"rho_hat", s.rho_hat}});
  }
  j["strata"] = json::array();
  for (const auto& s : r.strata) {
    j["strata"].push_back({{"x", detail::from_vector(s.x)},
                           {"prob", s.prob},
                           {"total", s.total},
                           {"per_arm", s.per_arm}});
  }
  return j;
}

inline json to_json(const AsymptoticSummary& s) {
  json j;
  j["v"] = s.v;
  j["rho"] = {s.rho[0], s.rho[1]};
  j["grad_rho"] = detail::from_vector(s.grad_rho);
  j["I1"] = detail::from_matrix(s.I1);
  j["I2"] = detail::from_matrix(s.I2);
  j["V"] = detail::from_matrix(s.V);
  j["sigma1_sq"] = s.sigma1_sq;
  j["sigma2_sq"] = s.sigma2_sq;
  j["sigma3_sq"] = s.sigma3_sq;
  j["gamma"] = std::isinf(s.gamma) ? json("inf") : json(s.gamma);
  j["lambda"] = std::isinf(s.lambda) ? json("inf") : json(s.lambda);
  j["sigma_sq"] = s.sigma_sq;
  j["B"] = s.B_scalar;
  j["B_matrix"] = detail::from_matrix(s.B_matrix);
  j["zhcc_scalar"] = s.zhcc_scalar;
  j["Sigma_zhcc"] = detail::from_matrix(s.Sigma_zhcc);
  j["mc_standard_errors"] = {{"v", s.se_v}, {"sigma1_sq", s.se_sigma1_sq}, {"pi_sq", s.se_pi_sq}};
  return j;
}

inline json to_json(const MonteCarloReport& r) {
  json j;
  j["replications"] = r.replications;
  j["horizon"] = r.horizon;
  j["gamma"] = r.gamma;
  j["covariates_discrete"] = r.covariates_discrete;
  j["mean_allocation"] = r.mean_allocation;
  j["se_mean_allocation"] = r.se_mean_allocation;
  j["var_allocation"] = r.var_allocation;
  j["var_scaled"] = r.var_scaled;
  j["se_var_scaled"] = r.se_var_scaled;
  j["skewness"] = r.skewness;
  j["excess_kurtosis"] = r.excess_kurtosis;
  j["theta_cov_scaled"] = detail::from_matrix(r.theta_cov_scaled);
  j["theta_cov_se"] = detail::from_matrix(r.theta_cov_se);
  j["fit_failures_total"] = r.fit_failures_total;
  j["replications_with_fit_failure"] = r.replications_with_fit_failure;
  j["strata"] = json::array();
  for (const auto& s : r.strata) {
    j["strata"].push_back({{"x", detail::from_vector(s.x)},
                           {"prob", s.prob},
                           {"mean_proportion", s.mean_proportion},
                           {"target_pi", s.target_pi},
                           {"std_error", s.std_error},
                           {"deviation", s.deviation}});
  }
  j["theory"] = to_json(r.theory);
  j["comparisons"] = json::array();
  for (const auto& c : r.comparisons) {
    j["comparisons"].push_back({{"name", c.name},
                                {"empirical", c.empirical},
                                {"theoretical", c.theoretical},
                                {"std_error", c.std_error},
                                {"tolerance", c.tolerance},
                                {"pass", c.pass}});
  }
  j["all_pass"] = r.all_pass;
  return j;
}

// Output envelope: version + resolved config + payload.
inline json report_envelope(const AppConfig& cfg, const std::string& kind, json payload) {
  json j;
  j["version"] = kVersion;
  j["kind"] = kind;
  j["config"] = resolved_config_json(cfg);
  j[kind] = std::move(payload);
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << text;
}

inline std::string trial_result_csv(const AppConfig& cfg, const TrialResult& r) {
  std::ostringstream os;
  os << "# version=" << kVersion << "\n";
  os << "# config=" << resolved_config_json(cfg).dump() << "\n";
  os << "# seed=" << r.seed << "\n";
  os << "m,arm1_fraction,rho_hat\n";
  for (const auto& s : r.snapshots) {
    os << s.m << ',' << detail::format_double(s.arm1_fraction) << ','
       << detail::format_double(s.rho_hat) << "\n";
  }
  return os.str();
}

struct GammaRow {
  double gamma = 0.0;
  double lambda = 0.0;
  double sigma_sq = 0.0;
  double gap_to_B = 0.0;
};

inline json gamma_table_json(const AsymptoticSummary& base, const std::vector<double>& gammas) {
  json rows = json::array();
  for (double g : gammas) {
    const AsymptoticSummary s = with_gamma(base, g);
    rows.push_back({{"gamma", std::isinf(g) ? json("inf") : json(g)},
                    {"lambda", std::isinf(s.lambda) ? json("inf") : json(s.lambda)},
                    {"sigma_sq", s.sigma_sq},
                    {"gap_to_B", s.sigma_sq - s.B_scalar}});
  }
  return rows;
}

inline std::string gamma_table_csv(const AppConfig& cfg, const AsymptoticSummary& base,
                                   const std::vector<double>& gammas) {
  std::ostringstream os;
  os << "# version=" << kVersion << "\n";
  os << "# config=" << resolved_config_json(cfg).dump() << "\n";
  os << "# v=" << detail::format_double(base.v) << " sigma1_sq=" << detail::format_double(base.sigma1_sq)
     << " sigma2_sq=" << detail::format_double(base.sigma2_sq)
     << " sigma3_sq=" << detail::format_double(base.sigma3_sq)
     << " B=" << detail::format_double(base.B_scalar)
     << " zhcc=" << detail::format_double(base.zhcc_scalar) << "\n";
  os << "gamma,lambda,sigma_sq,gap_to_B\n";
  for (double g : gammas) {
    const AsymptoticSummary s = with_gamma(base, g);
    os << detail::format_double(g) << ',' << detail::format_double(s.lambda) << ','
       << detail::format_double(s.sigma_sq) << ','
       << detail::format_double(s.sigma_sq - s.B_scalar) << "\n";
  }
  return os.str();
}

}  // namespace cara
