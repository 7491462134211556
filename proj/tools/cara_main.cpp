// Command-line front end: simulate | asymptotics | mc | validate.
// Exit codes: 0 ok, 2 config error, 3 numeric/model error.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cara/montecarlo.hpp"
#include "cara/serialize.hpp"
#include "cara/trial.hpp"
#include "cara/version.hpp"
#include "validate_checks.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int default_workers() {
  if (const char* env = std::getenv("CARA_LAB_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return 0;  // hardware concurrency
}

std::vector<double> parse_gamma_grid(const std::string& grid) {
  std::vector<double> out;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "inf" || item == "infinity") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::size_t used = 0;
    const double g = std::stod(item, &used);
    if (used != item.size() || !(g >= 0.0)) {
      throw cara::config_error("--gamma-grid", "invalid gamma value '" + item + "'");
    }
    out.push_back(g);
  }
  if (out.empty()) throw cara::config_error("--gamma-grid", "no gamma values given");
  return out;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    cara::write_text(out_path, text);
  }
}

int run_simulate(const std::string& config_path, std::uint64_t seed, std::string out_path,
                 std::string format) {
  const cara::AppConfig cfg = cara::load_config(config_path);
  if (format.empty()) format = cfg.output.format;
  if (out_path.empty()) out_path = cfg.output.path;
  if (format != "json" && format != "csv") {
    throw cara::config_error("--format", "expected 'json' or 'csv'");
  }
  const cara::TrialResult result = cara::run_trial(cfg.trial_config(seed));
  if (format == "csv") {
    emit(out_path, cara::trial_result_csv(cfg, result));
  } else {
    emit(out_path, cara::report_envelope(cfg, "trial", cara::to_json(result)).dump(2) + "\n");
  }
  return kExitOk;
}

int run_asymptotics(const std::string& config_path, const std::string& gamma_grid,
                    std::string out_path, std::string format) {
  const cara::AppConfig cfg = cara::load_config(config_path);
  if (format.empty()) format = cfg.output.format;
  if (out_path.empty()) out_path = cfg.output.path;
  const std::vector<double> gammas = parse_gamma_grid(gamma_grid);
  cara::AsymptoticsOptions opts;
  opts.expect = cfg.expect;
  const cara::AsymptoticSummary base =
      cara::summarize(cfg.arms, cfg.covariates, cfg.target, gammas.front(), opts);
  if (format == "csv") {
    emit(out_path, cara::gamma_table_csv(cfg, base, gammas));
  } else {
    nlohmann::json payload;
    payload["summary"] = cara::to_json(base);
    payload["rows"] = cara::gamma_table_json(base, gammas);
    emit(out_path, cara::report_envelope(cfg, "asymptotics", std::move(payload)).dump(2) + "\n");
  }
  return kExitOk;
}

int run_mc(const std::string& config_path, int reps, int workers, std::string out_path) {
  const cara::AppConfig cfg = cara::load_config(config_path);
  if (out_path.empty()) out_path = cfg.output.path;
  if (cfg.mc_replications == 0 && reps == 0) {
    throw cara::config_error("$.mc", "missing required field (or pass --reps)");
  }
  if (reps != 0 && reps < 2) throw cara::config_error("--reps", "replications must be >= 2");
  cara::MCConfig mc = cfg.mc_config(reps, workers);
  const cara::MonteCarloReport report = cara::run_monte_carlo(mc);
  emit(out_path, cara::report_envelope(cfg, "mc", cara::to_json(report)).dump(2) + "\n");
  return kExitOk;
}

int run_validate(double perturb_g) {
  const auto results = cara::validate::run_all(perturb_g);
  bool all_pass = true;
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (measured "
              << r.residual << ", bound " << r.bound << ")\n";
  }
  std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << "\n";
  return all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CARA design lab: covariate-adjusted response-adaptive trial simulation"};
  app.set_version_flag("--version", cara::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_path, format, gamma_grid = "0,1,4";
  std::uint64_t seed = 0;
  int reps = 0;
  int workers = default_workers();
  double perturb_g = 0.0;

  auto* sim = app.add_subcommand("simulate", "run one trial");
  sim->add_option("--config", config_path, "config JSON file")->required();
  sim->add_option("--seed", seed, "trial seed")->required();
  sim->add_option("--out", out_path, "output path ('-' for stdout)");
  sim->add_option("--format", format, "json|csv (default from config)");

  auto* asy = app.add_subcommand("asymptotics", "theoretical quantities over a gamma grid");
  asy->add_option("--config", config_path, "config JSON file")->required();
  asy->add_option("--gamma-grid", gamma_grid, "comma-separated gammas (inf allowed)");
  asy->add_option("--out", out_path, "output path ('-' for stdout)");
  asy->add_option("--format", format, "json|csv (default from config)");

  auto* mc = app.add_subcommand("mc", "replicated Monte Carlo report");
  mc->add_option("--config", config_path, "config JSON file")->required();
  mc->add_option("--reps", reps, "replications (default from config)");
  mc->add_option("--workers", workers, "worker threads (wall time only; default CARA_LAB_WORKERS)");
  mc->add_option("--out", out_path, "output path ('-' for stdout)");

  auto* val = app.add_subcommand("validate", "run the invariant suites");
  val->add_option("--perturb-g", perturb_g, "test-harness hook: bias the g exponent")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (sim->parsed()) return run_simulate(config_path, seed, out_path, format);
    if (asy->parsed()) return run_asymptotics(config_path, gamma_grid, out_path, format);
    if (mc->parsed()) return run_mc(config_path, reps, workers, out_path);
    if (val->parsed()) return run_validate(perturb_g);
  } catch (const cara::config_error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const cara::singular_information_error& e) {
    std::cerr << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}
