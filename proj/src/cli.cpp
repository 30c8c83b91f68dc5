#include "klsurv/cli.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "klsurv/fit.hpp"
#include "klsurv/io.hpp"
#include "klsurv/sim.hpp"
#include "klsurv/tuning.hpp"

namespace klsurv::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using io::format_double;

namespace {

// UTC timestamp; SOURCE_DATE_EPOCH pins it for reproducible output.
std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(epoch));
    } catch (const std::exception&) {
    }
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json manifest(const std::string& command, json config,
              std::optional<std::uint64_t> seed,
              const std::vector<fs::path>& inputs) {
  json m;
  m["command"] = command;
  m["config"] = std::move(config);
  m["seed"] = seed ? json(*seed) : json(nullptr);
  m["tool_version"] = kToolVersion;
  json digests = json::object();
  for (const auto& p : inputs) digests[p.string()] = io::sha256_file(p);
  m["inputs"] = digests;
  m["timestamp"] = timestamp();
  return m;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void write_json_file(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

struct CvSpec {
  int folds = 5;
  std::optional<std::uint64_t> seed;
  bool stratify = true;
};

CvSpec parse_cv_spec(const std::string& text) {
  CvSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const std::string key = eq == std::string::npos ? "folds" : item.substr(0, eq);
    const std::string value = eq == std::string::npos ? item : item.substr(eq + 1);
    try {
      if (key == "folds") {
        spec.folds = std::stoi(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else if (key == "stratify") {
        spec.stratify = value != "0" && value != "false";
      } else {
        throw InputError(fmt::format("unknown --cv key '{}'", key));
      }
    } catch (const std::logic_error&) {
      throw InputError(fmt::format("bad --cv value '{}'", item));
    }
  }
  return spec;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw InputError(fmt::format("bad lambda grid value '{}'", item));
    }
  }
  return grid;
}

struct FitArgs {
  std::string data;
  std::string link = "logit";
  std::string prior;
  std::optional<double> lambda;
  std::string cv;
  std::string lambda_grid;
  std::uint64_t seed = 1;
  std::optional<int> tau;
  std::string out_dir = ".";
  int max_iter = 100;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  if (!a.prior.empty() && !a.lambda && a.cv.empty()) {
    throw InputError("--prior requires --lambda or --cv");
  }
  if (a.prior.empty() && (a.lambda || !a.cv.empty())) {
    throw InputError("--lambda and --cv require --prior");
  }
  if (a.lambda && !a.cv.empty()) {
    throw InputError("--lambda and --cv are mutually exclusive");
  }
  const Link link = Link::parse(a.link);
  const SurvivalDataset data = io::read_dataset_csv(fs::path(a.data), a.tau);
  FitOptions opts;
  opts.max_iter = a.max_iter;

  std::vector<fs::path> inputs{a.data};
  json config = {{"data", a.data}, {"link", a.link}, {"tau", data.tau()},
                 {"max_iter", a.max_iter}};
  FittedModel model;
  std::optional<CvResult> cv;
  if (a.prior.empty()) {
    model = fit_local(data, link, opts);
  } else {
    inputs.emplace_back(a.prior);
    config["prior"] = a.prior;
    const PriorModel prior = io::read_prior_json(fs::path(a.prior));
    if (a.lambda) {
      config["lambda"] = *a.lambda;
      model = fit_kl(data, prior, *a.lambda, link, opts);
    } else {
      const CvSpec spec = parse_cv_spec(a.cv);
      CvConfig cfg;
      cfg.folds = spec.folds;
      cfg.seed = spec.seed.value_or(a.seed);
      cfg.stratify_on_event = spec.stratify;
      if (!a.lambda_grid.empty()) cfg.lambda_grid = parse_grid(a.lambda_grid);
      config["cv"] = {{"folds", cfg.folds},
                      {"seed", cfg.seed},
                      {"stratify_on_event", cfg.stratify_on_event},
                      {"lambda_grid", cfg.lambda_grid}};
      KlFit kl = fit_kl_cv(data, prior, link, cfg, opts);
      model = std::move(kl.model);
      cv = std::move(kl.cv);
    }
  }

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  const json man = manifest("fit", config, cv ? std::optional(a.seed) : std::nullopt,
                            inputs);
  {
    auto f = open_out(dir / "model.json");
    io::write_model_json(f, model, a.prior.empty() ? "local" : "kl", man.dump());
  }
  json report = {{"final_objective", model.final_objective},
                 {"n_iter", model.n_iter},
                 {"converged", model.converged},
                 {"gradient_norm", model.gradient_norm},
                 {"lambda_used", model.lambda_used}};
  if (cv) {
    report["best_lambda"] = cv->best_lambda;
    auto f = open_out(dir / "cv_curve.csv");
    f << "lambda,mean_loglik";
    for (std::size_t k = 0; k < cv->curve.front().fold_loglik.size(); ++k) {
      f << ",fold" << k + 1;
    }
    f << '\n';
    for (const auto& pt : cv->curve) {
      f << format_double(pt.lambda) << ',' << format_double(pt.mean_loglik);
      for (double v : pt.fold_loglik) f << ',' << format_double(v);
      f << '\n';
    }
  }
  report["manifest"] = man;
  write_json_file(dir / "fit_report.json", report);

  out << fmt::format("objective {}  iterations {}  converged {}",
                     format_double(model.final_objective), model.n_iter,
                     model.converged ? "yes" : "no");
  if (cv) out << fmt::format("  lambda {}", format_double(cv->best_lambda));
  out << '\n';
  return model.converged ? kExitOk : kExitNonConvergence;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out_dir = ".";
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const FittedModel model = io::read_model_json(fs::path(a.model));
  const io::CovariateRows rows =
      io::read_covariates_csv(fs::path(a.data), model.schema);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  {
    auto f = open_out(dir / "predictions.csv");
    f << "id,period,hazard,survival\n";
    for (std::size_t i = 0; i < rows.ids.size(); ++i) {
      const Eigen::VectorXd x = rows.values.row(static_cast<Eigen::Index>(i)).transpose();
      const Eigen::VectorXd haz = predict_hazard(model, x);
      const Eigen::VectorXd surv = predict_survival(model, x);
      for (Eigen::Index k = 0; k < haz.size(); ++k) {
        if (k > 0 && surv[k] > surv[k - 1]) {
          throw Error(fmt::format("survival increased for subject '{}'", rows.ids[i]));
        }
        f << rows.ids[i] << ',' << k + 1 << ',' << format_double(haz[k]) << ','
          << format_double(surv[k]) << '\n';
      }
    }
  }
  write_json_file(dir / "predictions.manifest.json",
                  manifest("predict", {{"model", a.model}, {"data", a.data}},
                           std::nullopt, {a.model, a.data}));
  out << fmt::format("wrote predictions for {} subjects over {} periods\n",
                     rows.ids.size(), model.tau);
  return kExitOk;
}

struct SimulateArgs {
  std::string settings = "a";
  int replications = 100;
  bool fast = false;
  std::uint64_t seed = 1;
  std::optional<int> n_local;
  std::optional<int> n_validation;
  std::optional<int> tau;
  std::string config_file;
  std::string out_dir = ".";
};

std::vector<Setting> parse_settings(const std::string& text) {
  if (text == "all") {
    return {Setting::a, Setting::b, Setting::c, Setting::d, Setting::e, Setting::f};
  }
  std::vector<Setting> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_setting(item));
  if (out.empty()) throw InputError("no setting given");
  return out;
}

// Optional JSON overrides for the scenario defaults.
void apply_config_file(const fs::path& path, ScenarioConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "beta0") {
        const auto v = value.get<std::vector<double>>();
        cfg.beta0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      } else if (key == "eta") {
        const auto v = value.get<std::vector<double>>();
        cfg.eta = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      } else if (key == "n_local") {
        cfg.n_local = value.get<int>();
      } else if (key == "n_validation") {
        cfg.n_validation = value.get<int>();
      } else if (key == "tau") {
        cfg.tau = value.get<int>();
      } else if (key == "rho") {
        cfg.rho = value.get<double>();
      } else if (key == "censor_max") {
        cfg.censor_max = value.get<int>();
      } else if (key == "admin_censor") {
        cfg.admin_censor = value.get<int>();
      } else if (key == "replications") {
        cfg.replications = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "folds") {
        cfg.folds = value.get<int>();
      } else if (key == "lambda_grid") {
        cfg.lambda_grid = value.get<std::vector<double>>();
      } else {
        throw InputError(fmt::format("{}: unknown scenario key '{}'", path.string(), key));
      }
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

json scenario_json(const ScenarioConfig& cfg) {
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  return {{"beta0", vec(cfg.beta0)},     {"eta", vec(cfg.eta)},
          {"n_local", cfg.n_local},      {"n_validation", cfg.n_validation},
          {"tau", cfg.tau},              {"rho", cfg.rho},
          {"censor_max", cfg.censor_max}, {"admin_censor", cfg.admin_censor},
          {"replications", cfg.replications}, {"seed", cfg.seed},
          {"folds", cfg.folds},          {"lambda_grid", cfg.lambda_grid}};
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const auto settings = parse_settings(a.settings);
  ScenarioConfig base;
  std::vector<fs::path> inputs;
  if (!a.config_file.empty()) {
    apply_config_file(a.config_file, base);
    inputs.emplace_back(a.config_file);
  }
  base.replications = a.fast ? 20 : a.replications;
  base.seed = a.seed;
  if (a.n_local) base.n_local = *a.n_local;
  if (a.n_validation) base.n_validation = *a.n_validation;
  if (a.tau) {
    base.tau = *a.tau;
    if (base.eta.size() != 0 && base.eta.size() != base.tau) {
      throw InputError("--tau conflicts with the configured eta length");
    }
  }
  base.validate();

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  auto rep = open_out(dir / "replicates.csv");
  auto sum = open_out(dir / "summary.csv");
  auto fig_ll = open_out(dir / "plot_validation_loglik.csv");
  auto fig_lambda = open_out(dir / "plot_selected_lambda.csv");
  rep << "setting,replicate,arm,validation_loglik,selected_lambda,converged,error\n";
  sum << "setting,arm,completed,failed,mean_validation_loglik,median_validation_loglik,"
         "lambda_median,lambda_mean,lambda_small_fraction\n";
  fig_ll << "setting,replicate,arm,validation_loglik\n";
  fig_lambda << "setting,replicate,selected_lambda\n";

  bool any_failed = false;
  for (Setting s : settings) {
    ScenarioConfig cfg = base;
    cfg.setting = s;
    const StudyResult res = run_study(cfg);
    const char name = setting_name(s);
    for (const auto& r : res.records) {
      const std::string err = r.ok() ? "" : r.error;
      std::string clean = err;
      for (char& c : clean) {
        if (c == ',' || c == '\n') c = ';';
      }
      const std::pair<Arm, double> arms[] = {
          {Arm::kl, r.loglik_kl}, {Arm::prior, r.loglik_prior}, {Arm::local, r.loglik_local}};
      for (const auto& [arm, ll] : arms) {
        const bool conv = arm == Arm::kl      ? r.converged_kl
                          : arm == Arm::local ? r.converged_local
                                              : true;
        rep << name << ',' << r.replicate << ',' << arm_name(arm) << ','
            << (r.ok() ? format_double(ll) : "") << ','
            << (arm == Arm::kl && r.ok() ? format_double(r.selected_lambda) : "") << ','
            << (r.ok() && conv ? 1 : 0) << ',' << clean << '\n';
        if (r.ok()) {
          fig_ll << name << ',' << r.replicate << ',' << arm_name(arm) << ','
                 << format_double(ll) << '\n';
        }
      }
      if (r.ok()) {
        fig_lambda << name << ',' << r.replicate << ',' << format_double(r.selected_lambda)
                   << '\n';
      }
    }
    const StudySummary& sm = res.summary;
    const std::pair<Arm, ArmSummary> arms[] = {
        {Arm::kl, sm.kl}, {Arm::prior, sm.prior}, {Arm::local, sm.local}};
    for (const auto& [arm, as] : arms) {
      sum << name << ',' << arm_name(arm) << ',' << sm.completed << ',' << sm.failed << ','
          << format_double(as.mean) << ',' << format_double(as.median) << ','
          << format_double(sm.lambda_median) << ',' << format_double(sm.lambda_mean) << ','
          << format_double(sm.lambda_small_fraction) << '\n';
    }
    out << fmt::format(
        "setting {}: kl {:.3f}  prior {:.3f}  local {:.3f}  median lambda {}  ({} ok, {} "
        "failed)\n",
        name, sm.kl.mean, sm.prior.mean, sm.local.mean, format_double(sm.lambda_median),
        sm.completed, sm.failed);
    any_failed = any_failed || sm.failed > 0;
  }

  json config = scenario_json(base);
  std::string names;
  for (Setting s : settings) names += setting_name(s);
  config["settings"] = names;
  write_json_file(dir / "manifest.json", manifest("simulate", config, base.seed, inputs));
  return any_failed ? kExitStudyFailure : kExitOk;
}

struct ValidateArgs {
  std::vector<std::string> models;
  std::string data;
  std::optional<int> tau;
  std::string out_dir;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const SurvivalDataset data = io::read_dataset_csv(fs::path(a.data), a.tau);
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& path : a.models) {
    FittedModel model;
    if (io::is_prior_file(path)) {
      const PriorModel prior = io::read_prior_json(fs::path(path));
      model = model_from_prior(prior, data.schema(), data.tau());
    } else {
      model = io::read_model_json(fs::path(path));
    }
    if (model.schema.names() != data.schema().names()) {
      throw InputError(fmt::format("{}: covariates do not match the validation data",
                                   path));
    }
    rows.emplace_back(path, evaluate(model, data));
  }
  out << "model,loglik\n";
  for (const auto& [name, ll] : rows) out << name << ',' << format_double(ll) << '\n';
  if (!a.out_dir.empty()) {
    const fs::path dir(a.out_dir);
    ensure_dir(dir);
    auto f = open_out(dir / "validation.csv");
    f << "model,loglik\n";
    for (const auto& [name, ll] : rows) f << name << ',' << format_double(ll) << '\n';
    std::vector<fs::path> inputs(a.models.begin(), a.models.end());
    inputs.emplace_back(a.data);
    write_json_file(dir / "validation.manifest.json",
                    manifest("validate", {{"models", a.models}, {"data", a.data}},
                             std::nullopt, inputs));
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-time relative risk survival models with KL-weighted prior "
               "integration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a local or prior-integrated model");
  fit_cmd->add_option("--data", fit.data, "Survival data CSV")->required();
  fit_cmd->add_option("--link", fit.link, "logit, log or cloglog");
  fit_cmd->add_option("--prior", fit.prior, "Prior model JSON");
  fit_cmd->add_option("--lambda", fit.lambda, "Fixed prior weight");
  fit_cmd->add_option("--cv", fit.cv, "Cross-validate lambda, e.g. folds=5,seed=3");
  fit_cmd->add_option("--lambda-grid", fit.lambda_grid, "Comma-separated lambda grid");
  fit_cmd->add_option("--seed", fit.seed, "Fold assignment seed");
  fit_cmd->add_option("--tau", fit.tau, "Number of periods");
  fit_cmd->add_option("--max-iter", fit.max_iter, "Newton iteration cap");
  fit_cmd->add_option("--out", fit.out_dir, "Output directory");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Hazard and survival curves");
  pred_cmd->add_option("--model", pred.model, "Fitted model JSON")->required();
  pred_cmd->add_option("--data", pred.data, "Covariate CSV with an id column")->required();
  pred_cmd->add_option("--out", pred.out_dir, "Output directory");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the replication study");
  sim_cmd->add_option("--setting", sim.settings, "a..f, comma list, or all");
  sim_cmd->add_option("--replications", sim.replications, "Replicates per setting");
  sim_cmd->add_flag("--fast", sim.fast, "20 replicates per setting");
  sim_cmd->add_option("--seed", sim.seed, "Study seed");
  sim_cmd->add_option("--n-local", sim.n_local, "Local sample size");
  sim_cmd->add_option("--n-validation", sim.n_validation, "Validation sample size");
  sim_cmd->add_option("--tau", sim.tau, "Modeling horizon");
  sim_cmd->add_option("--config", sim.config_file, "Scenario JSON overrides");
  sim_cmd->add_option("--out", sim.out_dir, "Output directory");

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "Compare models on validation data");
  val_cmd->add_option("--model", val.models, "Model or prior JSON (repeatable)")
      ->required();
  val_cmd->add_option("--data", val.data, "Validation data CSV")->required();
  val_cmd->add_option("--tau", val.tau, "Number of periods");
  val_cmd->add_option("--out", val.out_dir, "Optional output directory");

  std::vector<std::string> argv_store{"klsurv"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*pred_cmd) return cmd_predict(pred, out);
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*val_cmd) return cmd_validate(val, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace klsurv::cli
