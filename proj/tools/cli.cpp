#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "metsize/config.hpp"
#include "metsize/data_io.hpp"
#include "metsize/error.hpp"
#include "metsize/pilot_sim.hpp"
#include "metsize/serialization.hpp"
#include "metsize/size_search.hpp"

namespace metsize::cli {

namespace fs = std::filesystem;

namespace {

struct Flag {
  const char* key;
  const char* help;
  bool is_switch = false;
};

// Flags shared by estimate and sweep-proportion. Config files use the same
// keys without the leading dashes.
const std::vector<Flag> kRunFlags = {
    {"model", "Analysis model: ppca, ppcca or dppca (default ppca)"},
    {"covariates", "Number of covariates (PPCCA prior draws)"},
    {"q", "Latent dimension (default 2)"},
    {"bins", "Number of spectral bins p (default 200)"},
    {"prop-significant", "Expected proportion of significant bins m (default 0.2)"},
    {"target-fdr", "Target false discovery rate (default 0.05)"},
    {"min-n", "Smallest total sample size (default 4)"},
    {"max-n", "Largest total sample size (default 200)"},
    {"step", "Grid step in total samples (default 2)"},
    {"ratio", "Group ratio as a:b (default 1:1)"},
    {"permutations", "Permutations per dataset T (default 20)"},
    {"simulations", "Simulated datasets per grid point SIM (default 20)"},
    {"delta", "Shift constant (default 2.3)"},
    {"seed", "Base seed (fallback: METSIZER_SEED, then 0)"},
    {"threads", "Worker threads (default: machine parallelism)"},
    {"pilot", "Pilot CSV to fit the model to"},
    {"schema", "Pilot CSV schema file (key=value)"},
    {"fitted", "Fitted model JSON from `fit`"},
    {"out", "Output directory (default .)"},
};

const std::vector<Flag> kEstimateFlags = {
    {"full-grid", "Evaluate every grid point instead of stopping early", true},
};

const std::vector<Flag> kSweepFlags = {
    {"n-list", "Comma-separated total sample sizes (default 10,20,30)"},
    {"m-list", "Comma-separated proportions (default 0.1,0.2,0.3)"},
};

const std::vector<Flag> kFitFlags = {
    {"model", "ppca, ppcca or dppca (default ppca)"},
    {"q", "Latent dimension (default 2)"},
    {"pilot", "Pilot CSV (required)"},
    {"schema", "Pilot CSV schema file (key=value)"},
    {"max-iter", "PPCCA EM iteration cap (default 500)"},
    {"tol", "PPCCA EM relative tolerance (default 1e-8)"},
    {"out", "Output directory (default .)"},
};

[[noreturn]] void invalid(const std::string& key, const std::string& msg) {
  fail(ErrorKind::Validation, "--" + key + ": " + msg);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    if constexpr (std::is_floating_point_v<T>)
      invalid(key, "expected a number, got '" + text + "'");
    else
      invalid(key, "expected an integer, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  invalid(key, "expected true or false, got '" + text + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) invalid(key, "expected a comma-separated list");
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

std::set<std::string> all_keys() {
  std::set<std::string> keys;
  for (const auto* table : {&kRunFlags, &kEstimateFlags, &kSweepFlags, &kFitFlags})
    for (const auto& f : *table) keys.insert(f.key);
  return keys;
}

// key=value lines; '#' starts a comment.
std::map<std::string, std::string> load_config_file(const fs::path& path) {
  if (!fs::exists(path)) invalid("config", "file not found: " + path.string());
  std::istringstream in(read_text(path));
  const auto known = all_keys();
  std::map<std::string, std::string> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      fail(ErrorKind::Validation, where + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (!known.count(key))
      fail(ErrorKind::Validation, where + ": unknown key '" + key + "'");
    values[key] = trim(line.substr(eq + 1));
  }
  return values;
}

struct Invocation {
  std::string command;
  std::map<std::string, std::string> values;  // effective, after precedence
};

// Config file first, then explicit flags, then the seed fallback.
Invocation resolve(CLI::App* sub, const std::vector<Flag>& flags,
                   std::map<std::string, std::string>& raw,
                   std::map<std::string, bool>& switches,
                   const std::string& config_path) {
  Invocation inv;
  inv.command = sub->get_name();
  std::set<std::string> accepted;
  for (const auto& f : flags) accepted.insert(f.key);
  if (!config_path.empty()) {
    for (auto& [k, v] : load_config_file(config_path))
      if (accepted.count(k)) inv.values[k] = v;
  }
  for (const auto& f : flags) {
    const auto* opt = sub->get_option("--" + std::string(f.key));
    if (opt->count() == 0) continue;
    inv.values[f.key] = f.is_switch ? (switches[f.key] ? "true" : "false") : raw[f.key];
  }
  if (accepted.count("seed") && !inv.values.count("seed")) {
    if (const char* env = std::getenv("METSIZER_SEED"); env && *env) {
      try {
        parse_number<std::uint64_t>("seed", env);
      } catch (const Error&) {
        fail(ErrorKind::Validation,
             std::string("METSIZER_SEED: expected an integer, got '") + env + "'");
      }
      inv.values["seed"] = env;
    }
  }
  return inv;
}

const std::string* get(const Invocation& inv, const std::string& key) {
  const auto it = inv.values.find(key);
  return it == inv.values.end() ? nullptr : &it->second;
}

PilotFileSchema schema_for(const Invocation& inv) {
  if (const auto* s = get(inv, "schema")) {
    if (!fs::exists(*s)) invalid("schema", "file not found: " + *s);
    return load_schema(*s);
  }
  return {};
}

PilotMatrix load_pilot(const Invocation& inv) {
  const auto* path = get(inv, "pilot");
  if (!fs::exists(*path)) invalid("pilot", "file not found: " + *path);
  return load_pilot_csv(*path, schema_for(inv));
}

FittedModel fit_pilot(const PilotMatrix& pilot, ModelKind kind, int q,
                      const PpccaFitOptions& options) {
  if (kind == ModelKind::PPCCA) {
    if (!pilot.covariates || pilot.covariates->cols() == 0)
      invalid("schema", "PPCCA needs covariate_columns in the pilot schema");
    return fit_ppcca(pilot, q, options);
  }
  FittedModel fit = fit_ppca(pilot, q);
  fit.kind = kind;
  return fit;
}

EstimationConfig build_config(const Invocation& inv, std::ostream& err) {
  EstimationConfig c;
  if (const auto* v = get(inv, "model")) {
    try {
      c.model.kind = parse_model_kind(*v);
    } catch (const Error&) {
      invalid("model", "expected ppca, ppcca or dppca, got '" + *v + "'");
    }
  }
  if (const auto* v = get(inv, "q")) c.model.q = parse_number<int>("q", *v);
  if (const auto* v = get(inv, "covariates"))
    c.model.n_covariates = parse_number<int>("covariates", *v);
  if (const auto* v = get(inv, "bins")) c.p = parse_number<int>("bins", *v);
  if (const auto* v = get(inv, "prop-significant"))
    c.m = parse_number<double>("prop-significant", *v);
  if (const auto* v = get(inv, "target-fdr"))
    c.target_fdr = parse_number<double>("target-fdr", *v);
  if (const auto* v = get(inv, "min-n")) c.n_min = parse_number<int>("min-n", *v);
  if (const auto* v = get(inv, "max-n")) c.n_max = parse_number<int>("max-n", *v);
  if (const auto* v = get(inv, "step")) c.grid_step = parse_number<int>("step", *v);
  if (const auto* v = get(inv, "ratio")) {
    const auto colon = v->find(':');
    if (colon == std::string::npos) invalid("ratio", "expected a:b, got '" + *v + "'");
    c.group_ratio.group1 = parse_number<int>("ratio", v->substr(0, colon));
    c.group_ratio.group2 = parse_number<int>("ratio", v->substr(colon + 1));
  }
  if (const auto* v = get(inv, "permutations"))
    c.permutations = parse_number<int>("permutations", *v);
  if (const auto* v = get(inv, "simulations"))
    c.simulations = parse_number<int>("simulations", *v);
  if (const auto* v = get(inv, "delta")) c.delta = parse_number<double>("delta", *v);
  if (const auto* v = get(inv, "seed")) c.seed = parse_number<std::uint64_t>("seed", *v);
  if (const auto* v = get(inv, "threads")) c.threads = parse_number<int>("threads", *v);
  if (const auto* v = get(inv, "full-grid")) c.full_grid = parse_bool("full-grid", *v);

  const bool has_pilot = get(inv, "pilot") != nullptr;
  const bool has_fitted = get(inv, "fitted") != nullptr;
  if (has_pilot && has_fitted) invalid("fitted", "cannot be combined with --pilot");

  if (has_pilot || has_fitted) {
    FittedModel fit;
    if (has_pilot) {
      fit = fit_pilot(load_pilot(inv), c.model.kind, c.model.q, {});
    } else {
      const auto* path = get(inv, "fitted");
      if (!fs::exists(*path)) invalid("fitted", "file not found: " + *path);
      try {
        fit = fitted_model_from_json(nlohmann::json::parse(read_text(*path)));
      } catch (const nlohmann::json::exception& e) {
        invalid("fitted", e.what());
      }
      if (!get(inv, "model")) c.model.kind = fit.kind;
    }
    if (get(inv, "bins") && c.p != fit.p())
      err << "note: --bins " << c.p << " replaced by the pilot's " << fit.p()
          << " variables\n";
    c.p = static_cast<int>(fit.p());
    c.model.q = fit.q;
    c.model.n_covariates =
        fit.kind == ModelKind::PPCCA && fit.covariates
            ? static_cast<int>(fit.covariates->cols())
            : 0;
    c.source = FittedPilot{std::move(fit)};
  } else if (c.model.kind == ModelKind::PPCCA && !get(inv, "covariates")) {
    invalid("covariates", "required with --model ppcca (number of covariates)");
  }
  return c;
}

fs::path out_dir(const Invocation& inv) {
  fs::path dir = get(inv, "out") ? fs::path(*get(inv, "out")) : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() +
                                  ": " + ec.message());
  return dir;
}

int run_estimate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const EstimationConfig config = build_config(inv, err);
  validate(config);
  const fs::path dir = out_dir(inv);
  const SampleSizeResult result = estimate_sample_size(config);

  write_result(result, dir / "result.json", dir / "curve.csv");
  render_curve_svg(result, config.target_fdr, dir / "curve.svg");

  const auto& d = result.diagnostics;
  out << "model " << to_string(config.model.kind) << ", p = " << config.p
      << ", m = " << config.m << ", target FDR " << config.target_fdr
      << ", seed " << config.seed << "\n";
  out << "grid " << config.n_min << ".." << config.n_max << " step "
      << config.grid_step << ": " << d.points_evaluated << " of " << d.grid_size
      << " points evaluated" << (d.early_stopped ? " (early stop)" : "") << "\n";
  if (result.n_hat) {
    out << "estimated sample size n = " << *result.n_hat << " (group 1: "
        << result.n1_hat << ", group 2: " << result.n2_hat << ")\n";
  } else {
    out << "no sample size up to n = " << config.n_max
        << " reaches the target FDR (" << result.reason << ")\n";
  }
  out << std::fixed << std::setprecision(2) << "wall time " << d.wall_time_seconds
      << " s\n";
  out << "wrote " << (dir / "result.json").string() << ", "
      << (dir / "curve.csv").string() << ", " << (dir / "curve.svg").string()
      << "\n";
  if (!result.n_hat) {
    err << "error: grid-exhausted: median FDR stays above " << config.target_fdr
        << " up to n_max = " << config.n_max << "\n";
    return kGridExhausted;
  }
  return kOk;
}

int run_sweep(const Invocation& inv, std::ostream& out, std::ostream& err) {
  EstimationConfig config = build_config(inv, err);
  const std::vector<int> n_values =
      get(inv, "n-list") ? parse_list<int>("n-list", *get(inv, "n-list"))
                         : std::vector<int>{10, 20, 30};
  const std::vector<double> m_values =
      get(inv, "m-list") ? parse_list<double>("m-list", *get(inv, "m-list"))
                         : std::vector<double>{0.1, 0.2, 0.3};
  for (double m : m_values) {
    EstimationConfig probe = config;
    probe.m = m;
    validate(probe);
  }
  const fs::path dir = out_dir(inv);
  const auto sweep = sweep_proportion(config, m_values, n_values);
  write_text(dir / "sweep.csv", sweep_csv(sweep));
  write_text(dir / "sweep.svg", sweep_svg(sweep, config.target_fdr));

  out << "model " << to_string(config.model.kind) << ", p = " << config.p
      << ", seed " << config.seed << "\n";
  out << std::setw(6) << "n" << std::setw(8) << "m" << std::setw(10) << "fdr10"
      << std::setw(10) << "fdr50" << std::setw(10) << "fdr90" << "\n";
  out << std::fixed;
  for (const auto& s : sweep)
    out << std::setw(6) << s.point.n << std::setprecision(2) << std::setw(8) << s.m
        << std::setprecision(4) << std::setw(10) << s.point.fdr10 << std::setw(10)
        << s.point.fdr50 << std::setw(10) << s.point.fdr90 << "\n";
  out << "wrote " << (dir / "sweep.csv").string() << ", "
      << (dir / "sweep.svg").string() << "\n";
  return kOk;
}

int run_fit(const Invocation& inv, std::ostream& out, std::ostream&) {
  if (!get(inv, "pilot")) invalid("pilot", "required for fit");
  ModelKind kind = ModelKind::PPCA;
  if (const auto* v = get(inv, "model")) {
    try {
      kind = parse_model_kind(*v);
    } catch (const Error&) {
      invalid("model", "expected ppca, ppcca or dppca, got '" + *v + "'");
    }
  }
  const int q = get(inv, "q") ? parse_number<int>("q", *get(inv, "q")) : 2;
  if (q < 1) invalid("q", "must be a positive integer");
  PpccaFitOptions options;
  if (const auto* v = get(inv, "max-iter")) options.max_iter = parse_number<int>("max-iter", *v);
  if (const auto* v = get(inv, "tol")) options.tol = parse_number<double>("tol", *v);
  if (options.max_iter < 1) invalid("max-iter", "must be a positive integer");
  if (!(options.tol > 0.0)) invalid("tol", "must be positive");

  const PilotMatrix pilot = load_pilot(inv);
  if (pilot.p() <= q) invalid("q", "must be smaller than the number of variables");
  const FittedModel fit = fit_pilot(pilot, kind, q, options);
  const fs::path dir = out_dir(inv);
  write_text(dir / "fitted_model.json", dump(to_json(fit)));

  out << "fitted " << to_string(fit.kind) << ": n = " << pilot.n() << " (group 1: "
      << pilot.count(1) << ", group 2: " << pilot.count(2) << "), p = " << fit.p()
      << ", q = " << fit.q << "\n";
  out << "noise variance " << fit.noise_var << "\n";
  if (fit.kind == ModelKind::PPCCA)
    out << "EM " << (fit.converged ? "converged" : "did not converge") << " after "
        << fit.iterations << " iterations, log-likelihood "
        << (fit.loglik_trace.empty() ? 0.0 : fit.loglik_trace.back()) << "\n";
  out << "wrote " << (dir / "fitted_model.json").string() << "\n";
  return kOk;
}

void add_flags(CLI::App* sub, const std::vector<Flag>& flags,
               std::map<std::string, std::string>& raw,
               std::map<std::string, bool>& switches) {
  for (const auto& f : flags) {
    const std::string name = "--" + std::string(f.key);
    if (f.is_switch)
      sub->add_flag(name, switches[f.key], f.help);
    else
      sub->add_option(name, raw[f.key], f.help);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Sample size estimation for metabolomic experiments", "metsizer"};
  app.require_subcommand(1);

  std::map<std::string, std::string> raw;
  std::map<std::string, bool> switches;
  std::string config_path;

  auto* estimate = app.add_subcommand("estimate", "Estimate the sample size n");
  auto* sweep = app.add_subcommand("sweep-proportion",
                                   "FDR against the proportion of significant bins");
  auto* fit = app.add_subcommand("fit", "Fit a model to pilot data");

  std::vector<Flag> estimate_flags = kRunFlags;
  estimate_flags.insert(estimate_flags.end(), kEstimateFlags.begin(), kEstimateFlags.end());
  std::vector<Flag> sweep_flags = kRunFlags;
  sweep_flags.insert(sweep_flags.end(), kSweepFlags.begin(), kSweepFlags.end());

  add_flags(estimate, estimate_flags, raw, switches);
  add_flags(sweep, sweep_flags, raw, switches);
  add_flags(fit, kFitFlags, raw, switches);
  for (auto* sub : {estimate, sweep, fit})
    sub->add_option("--config", config_path, "key=value file; explicit flags win");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (auto* sub : {estimate, sweep, fit})
      if (sub->parsed()) target = sub;
    out << target->help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (estimate->parsed())
      return run_estimate(resolve(estimate, estimate_flags, raw, switches, config_path),
                          out, err);
    if (sweep->parsed())
      return run_sweep(resolve(sweep, sweep_flags, raw, switches, config_path), out,
                       err);
    return run_fit(resolve(fit, kFitFlags, raw, switches, config_path), out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::Io:
      case ErrorKind::DegenerateStatistic:
        return kInternal;
      default:
        return kValidation;
    }
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace metsize::cli
