#include "caplab/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace {

using namespace caplab;

enum ExitCode {
  kOk = 0,
  kFailedVerdict = 1,
  kVacuousOnly = 2,
  kUsage = 64,
  kSolver = 65,
  kInternal = 70
};

int g_log_level = 0;  // 0 error, 1 info, 2 debug

void init_log_level() {
  const char* env = std::getenv("LAB_LOG");
  if (!env) return;
  const std::string v = env;
  if (v == "info") g_log_level = 1;
  if (v == "debug") g_log_level = 2;
}

void log_info(const std::string& msg) {
  if (g_log_level >= 1) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (g_log_level >= 2) std::cerr << "[debug] " << msg << "\n";
}

struct Overrides {
  int grid = 0;
  Real tol = 0.0;
  bool bracket = false;
  std::string output;
  std::string format;
};

void apply(const Overrides& ov, ExperimentConfig& cfg) {
  if (ov.grid > 0) {
    cfg.domain.grid_n = ov.grid;
    if (cfg.has_image_domain) cfg.image_domain.grid_n = ov.grid;
  }
  if (ov.tol > 0.0) cfg.tol = ov.tol;
  if (ov.bracket) cfg.solver.bracket = true;
  if (!ov.output.empty()) cfg.output.path = ov.output;
  if (!ov.format.empty()) cfg.output.format = ov.format;
}

Real need(Real v, const char* field, const ExperimentConfig& cfg) {
  if (std::isnan(v))
    throw ValidationError("config: " + cfg.name + ": missing " + field);
  return v;
}

const Domain& need_image(const ExperimentConfig& cfg) {
  if (!cfg.has_image_domain)
    throw ValidationError("config: " + cfg.name + ": missing image_domain");
  return cfg.image_domain;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

std::vector<VerificationVerdict> run_checks(const ExperimentConfig& cfg) {
  if (cfg.checks.empty())
    throw ValidationError("config: " + cfg.name +
                          ": verify requires a nonempty 'checks' list");
  std::vector<VerificationVerdict> out;
  for (const CheckRequest& check : cfg.checks) {
    log_info(cfg.name + ": running " + check.kind);
    if (check.kind == "transfer_identity") {
      out.push_back(transfer_identity_residual(
          cfg.map, cfg.domain, need_image(cfg),
          need(cfg.q, "exponents.q", cfg), need(cfg.s, "exponents.s", cfg),
          cfg.scheme, cfg.tol));
    } else if (check.kind == "change_of_variables") {
      out.push_back(change_of_variables_residual(
          cfg.map, cfg.domain, scalar_field(check.integrand), check.integrand,
          check.set, cfg.scheme, cfg.tol));
    } else if (check.kind == "capacity_distortion") {
      out.push_back(capacity_distortion_check(
          cfg.map, build_condenser(cfg), need_image(cfg),
          need(cfg.q, "exponents.q", cfg), need(cfg.s, "exponents.s", cfg),
          cfg.solver, cfg.scheme, false, cfg.tol));
    } else if (check.kind == "capacity_distortion_pp") {
      const Real q = need(cfg.q, "exponents.q", cfg);
      out.push_back(capacity_distortion_check(cfg.map, build_condenser(cfg),
                                              need_image(cfg), q, q,
                                              cfg.solver, cfg.scheme, true,
                                              cfg.tol));
    } else if (check.kind == "energy_bounds") {
      auto batch = energy_bounds_check(
          cfg.map, cfg.domain, need_image(cfg),
          need(cfg.q, "exponents.q", cfg), need(cfg.s, "exponents.s", cfg),
          cfg.family, cfg.scheme, cfg.tol);
      for (auto& v : batch) out.push_back(std::move(v));
    } else if (check.kind == "operator_norm") {
      out.push_back(operator_norm_lower_bound(
          cfg.map, cfg.domain, need_image(cfg),
          need(cfg.p, "exponents.p", cfg), need(cfg.q, "exponents.q", cfg),
          cfg.family, cfg.scheme, cfg.tol));
    } else {
      throw ValidationError("config: " + cfg.name + ": unknown check kind '" +
                            check.kind + "'");
    }
  }
  return out;
}

void print_verdict_line(const VerificationVerdict& v) {
  const char* tag = v.passed ? (v.vacuous ? "VACUOUS" : "PASS") : "FAIL";
  std::printf("[%s] %s: lhs=%.6g rhs=%.6g %s=%.3g (tol %.3g)\n", tag,
              v.name.c_str(), v.lhs, v.rhs,
              v.identity ? "residual" : "slack", v.slack, v.tolerance_used);
}

int verdict_exit_code(const std::vector<VerificationVerdict>& verdicts) {
  bool any_failed = false, any_vacuous = false;
  for (const auto& v : verdicts) {
    any_failed = any_failed || !v.passed;
    any_vacuous = any_vacuous || v.vacuous;
  }
  if (any_failed) return kFailedVerdict;
  if (any_vacuous) return kVacuousOnly;
  return kOk;
}

// Verdict rows a pure computation contributes to suite aggregation.
VerificationVerdict synthetic_verdict(const std::string& name, Real value,
                                      bool passed) {
  VerificationVerdict v;
  v.name = name;
  v.lhs = value;
  v.rhs = value;
  v.passed = passed;
  return v;
}

struct RunOutcome {
  int code = kOk;
  std::vector<VerificationVerdict> verdicts;
};

RunOutcome run_config(ExperimentConfig cfg, bool quiet) {
  RunOutcome outcome;
  if (cfg.command == "distortion") {
    const Real q = need(cfg.q, "exponents.q", cfg);
    const Real r = std::isnan(cfg.r)
                       ? (std::isinf(q) ? 1.0 : q / (q - 1.0))
                       : cfg.r;
    const DistortionReport rep =
        ball_membership(cfg.map, cfg.domain, q, r, cfg.scheme);
    if (!quiet)
      std::printf(
          "distortion %s: K_pq=%.6g K_I_qs=%.6g adj_L%.3g=%.6g verdict=%s\n",
          cfg.name.c_str(), rep.K_pq, rep.K_I_qs, rep.r, rep.adj_Lr_norm,
          rep.ball_class_verdict.c_str());
    if (!cfg.output.path.empty())
      write_file(cfg.output.path, cfg.output.format == "csv"
                                      ? distortion_report_csv(rep)
                                      : distortion_report_json(cfg, rep));
    outcome.verdicts.push_back(
        synthetic_verdict("distortion:" + cfg.name, rep.K_I_qs, true));
    return outcome;
  }
  if (cfg.command == "capacity") {
    const Condenser cond = build_condenser(cfg);
    CapacityResult res;
    try {
      res = solve_capacity(cond, cfg.solver);
    } catch (const SolverFailure& failure) {
      std::fprintf(stderr, "solver failure: %s\n", failure.what());
      if (!cfg.output.path.empty())
        write_file(cfg.output.path,
                   capacity_report_json(cfg, failure.partial));
      outcome.code = kSolver;
      outcome.verdicts.push_back(synthetic_verdict(
          "capacity:" + cfg.name, failure.partial.value, false));
      return outcome;
    }
    if (!quiet) {
      std::printf("capacity %s: value=%.8g grid=%d iters=%lld\n",
                  cfg.name.c_str(), res.value, res.grid_n,
                  static_cast<long long>(res.iterations));
      for (const std::string& w : res.warnings)
        std::printf("  warning: %s\n", w.c_str());
    }
    if (!cfg.output.path.empty())
      write_file(cfg.output.path, cfg.output.format == "csv"
                                      ? capacity_minimizer_csv(cfg, res)
                                      : capacity_report_json(cfg, res));
    outcome.verdicts.push_back(
        synthetic_verdict("capacity:" + cfg.name, res.value, true));
    return outcome;
  }
  if (cfg.command == "verify") {
    outcome.verdicts = run_checks(cfg);
    if (!quiet)
      for (const auto& v : outcome.verdicts) print_verdict_line(v);
    if (!cfg.output.path.empty()) {
      if (cfg.output.format == "csv") {
        std::string doc = verdict_csv_header();
        for (const auto& v : outcome.verdicts)
          doc += verdict_csv_row(cfg.name, v);
        write_file(cfg.output.path, doc);
      } else {
        write_file(cfg.output.path, verify_report_json(cfg, outcome.verdicts));
      }
    }
    outcome.code = verdict_exit_code(outcome.verdicts);
    return outcome;
  }
  throw ValidationError("config: " + cfg.name + ": unknown command '" +
                        cfg.command + "'");
}

int run_one(const std::string& config_path, const Overrides& ov) {
  ExperimentConfig cfg = load_config(config_path);
  apply(ov, cfg);
  return run_config(std::move(cfg), /*quiet=*/false).code;
}

std::string dirname_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

int run_suite(const std::string& manifest_path, const Overrides& ov,
              int jobs) {
  std::ifstream in(manifest_path);
  if (!in) {
    std::fprintf(stderr, "cannot open manifest %s\n", manifest_path.c_str());
    return kUsage;
  }
  const std::string base = dirname_of(manifest_path);
  std::vector<std::string> entries;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string path = line.substr(first, last - first + 1);
    if (path[0] != '/') path = base + path;
    entries.push_back(std::move(path));
  }
  if (entries.empty()) {
    std::fprintf(stderr, "no experiments in %s\n", manifest_path.c_str());
    return kUsage;
  }

  struct Slot {
    std::string name;
    int code = kOk;
    bool missing = false;
    std::string error;
    std::vector<VerificationVerdict> verdicts;
  };
  std::vector<Slot> slots(entries.size());

  std::atomic<std::size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(entries.size())));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= entries.size()) return;
      Slot& slot = slots[i];
      slot.name = entries[i];
      try {
        ExperimentConfig cfg = load_config(entries[i]);
        apply(ov, cfg);
        cfg.output = {};  // the suite aggregates; per-config output via `run`
        slot.name = cfg.name;
        RunOutcome outcome = run_config(std::move(cfg), /*quiet=*/true);
        slot.code = outcome.code;
        slot.verdicts = std::move(outcome.verdicts);
      } catch (const ValidationError& e) {
        slot.missing = true;
        slot.error = e.what();
        slot.code = kUsage;
      } catch (const std::exception& e) {
        slot.error = e.what();
        slot.code = kInternal;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  struct Row {
    std::string config;
    std::string text;
  };
  std::vector<Row> rows;
  bool any_missing = false, any_solver = false;
  std::vector<VerificationVerdict> all;
  for (const Slot& slot : slots) {
    if (!slot.error.empty()) {
      std::fprintf(stderr, "%s: %s\n", slot.name.c_str(), slot.error.c_str());
      rows.push_back(
          {slot.name, verdict_csv_row(slot.name,
                                      synthetic_verdict("error", 0, false))});
      any_missing = any_missing || slot.missing;
      continue;
    }
    int cfg_passed = 0, cfg_failed = 0;
    for (const auto& v : slot.verdicts) {
      rows.push_back({slot.name, verdict_csv_row(slot.name, v)});
      all.push_back(v);
      (v.passed ? cfg_passed : cfg_failed) += 1;
    }
    std::printf("%s: %d passed, %d failed\n", slot.name.c_str(), cfg_passed,
                cfg_failed);
    if (slot.code == kSolver) any_solver = true;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.config < b.config; });
  std::string doc = verdict_csv_header();
  for (const Row& r : rows) doc += r.text;
  if (!ov.output.empty()) {
    write_file(ov.output, doc);
  } else {
    std::fputs(doc.c_str(), stdout);
  }

  int passed = 0, failed = 0;
  for (const auto& v : all) (v.passed ? passed : failed) += 1;
  std::printf("suite: %zu configs, %d verdicts passed, %d failed\n",
              entries.size(), passed, failed);

  if (any_missing) return kUsage;
  if (any_solver) return kSolver;
  return verdict_exit_code(all);
}

}  // namespace

int main(int argc, char** argv) {
  init_log_level();
  CLI::App app{"distortion, capacity, and inequality checks for Sobolev "
               "mappings on grid domains"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  int jobs = 1;

  const auto add_common = [&](CLI::App* cmd, bool with_bracket) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--output", ov.output, "report path override");
    cmd->add_option("--format", ov.format, "report format: json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--grid", ov.grid, "grid resolution override");
    cmd->add_option("--tol", ov.tol, "tolerance override");
    if (with_bracket)
      cmd->add_flag("--bracket", ov.bracket,
                    "also solve with plates grown/shrunk by one cell");
  };

  CLI::App* cmd_distortion =
      app.add_subcommand("distortion", "distortion coefficients and "
                                       "deformation-class membership");
  add_common(cmd_distortion, false);
  CLI::App* cmd_capacity =
      app.add_subcommand("capacity", "condenser capacity by energy descent");
  add_common(cmd_capacity, true);
  CLI::App* cmd_verify =
      app.add_subcommand("verify", "identity and inequality checks");
  add_common(cmd_verify, false);
  CLI::App* cmd_suite =
      app.add_subcommand("suite", "run every config in a manifest");
  cmd_suite->add_option("--config", config_path, "manifest file")->required();
  cmd_suite->add_option("--output", ov.output, "aggregate CSV path");
  cmd_suite->add_option("--grid", ov.grid, "grid resolution override");
  cmd_suite->add_option("--tol", ov.tol, "tolerance override");
  cmd_suite->add_option("--jobs", jobs, "concurrent experiments")
      ->check(CLI::PositiveNumber);
  cmd_suite->add_flag("--bracket", ov.bracket, "bracket capacity solves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (cmd_suite->parsed()) return run_suite(config_path, ov, jobs);
    log_debug("config: " + config_path);
    return run_one(config_path, ov);
  } catch (const SolverFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolver;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const UnsupportedSchemeError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const NoInverseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const ResolutionError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternal;
  }
}
