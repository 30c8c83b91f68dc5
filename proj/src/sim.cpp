#include "klsurv/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "klsurv/fit.hpp"
#include "klsurv/parallel.hpp"

namespace klsurv {

Setting parse_setting(std::string_view s) {
  if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'f') {
    return static_cast<Setting>(s[0] - 'a');
  }
  throw InputError(fmt::format("unknown setting '{}' (expected a..f)", s));
}

char setting_name(Setting s) { return static_cast<char>('a' + static_cast<int>(s)); }

Eigen::VectorXd default_beta0(std::size_t p0) {
  Eigen::VectorXd b(static_cast<Eigen::Index>(p0));
  for (Eigen::Index j = 0; j < b.size(); ++j) b[j] = (j % 2 == 0) ? 0.5 : -0.5;
  return b;
}

void ScenarioConfig::validate() {
  if (beta0.size() == 0) throw InputError("beta0 must be non-empty");
  if (tau < 1) throw InputError("tau must be >= 1");
  if (eta.size() == 0) {
    eta = Eigen::VectorXd::Constant(tau, Link(LinkKind::logit).apply(0.08));
  }
  if (eta.size() != tau) {
    throw InputError(fmt::format("eta has {} entries, tau is {}", eta.size(), tau));
  }
  if (!(rho > -1.0 && rho < 1.0)) throw InputError("rho must lie in (-1, 1)");
  if (admin_censor < 1 || admin_censor > censor_max) {
    throw InputError("need 1 <= admin_censor <= censor_max");
  }
  if (admin_censor > tau) {
    throw InputError("admin_censor must not exceed tau");
  }
  if (folds < 2) throw InputError("folds must be >= 2");
  if (n_local < folds) throw InputError("n_local must be >= folds");
  if (n_validation < 1) throw InputError("n_validation must be >= 1");
  if (replications < 1) throw InputError("replications must be >= 1");
}

Eigen::MatrixXd ar1_covariance(int p, double rho) {
  Eigen::MatrixXd s(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  }
  return s;
}

Eigen::MatrixXd gen_covariates(int n, int p, double rho, Rng& rng) {
  const Eigen::MatrixXd chol = ar1_covariance(p, rho).llt().matrixL();
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(i, j) = rng.normal();
  }
  return z * chol.transpose();
}

std::vector<std::optional<int>> gen_event_times(const Eigen::MatrixXd& x,
                                                const Eigen::VectorXd& beta_l,
                                                const Eigen::VectorXd& eta,
                                                int tau, Rng& rng) {
  if (x.cols() != beta_l.size()) {
    throw DimensionError(fmt::format("covariates have {} columns, beta has {}",
                                     x.cols(), beta_l.size()));
  }
  if (eta.size() < tau) {
    throw DimensionError(fmt::format("eta has {} entries, tau is {}", eta.size(), tau));
  }
  const Link logit(LinkKind::logit);
  const Eigen::VectorXd xb = x * beta_l;
  std::vector<std::optional<int>> times(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int k = 1; k <= tau; ++k) {
      if (rng.bernoulli(logit.inverse(xb[i] + eta[k - 1]))) {
        times[static_cast<std::size_t>(i)] = k;
        break;
      }
    }
  }
  return times;
}

int truncate_censoring(int latent, int admin_censor) {
  return std::min(latent, admin_censor);
}

std::vector<int> gen_censoring(int n, int censor_max, int admin_censor,
                               Rng& rng) {
  std::vector<int> c(static_cast<std::size_t>(n));
  for (auto& v : c) {
    v = truncate_censoring(static_cast<int>(rng.uniform_int(1, censor_max)),
                           admin_censor);
  }
  return c;
}

SettingModel make_setting(Setting setting, const Eigen::VectorXd& beta0) {
  if (beta0.size() == 0) throw InputError("beta0 must be non-empty");
  const Eigen::Index p0 = beta0.size();
  SettingModel m;
  switch (setting) {
    case Setting::a: m.beta_l = beta0; break;
    case Setting::b: m.beta_l = 0.5 * beta0; break;
    case Setting::c: m.beta_l = beta0.reverse(); break;
    case Setting::d:
    case Setting::e:
    case Setting::f: {
      const double scale = setting == Setting::d   ? 0.2
                           : setting == Setting::e ? 0.5
                                                   : 1.0;
      m.beta_l.resize(2 * p0);
      m.beta_l << beta0, scale * beta0;
      break;
    }
  }
  m.local_p = static_cast<int>(m.beta_l.size());
  return m;
}

CovariateSchema simulation_schema(int p) {
  std::vector<std::string> names;
  for (int j = 1; j <= p; ++j) names.push_back(fmt::format("x{}", j));
  return CovariateSchema(std::move(names));
}

SurvivalDataset generate_dataset(int n, const Eigen::VectorXd& beta_l,
                                 const Eigen::VectorXd& eta, double rho,
                                 int tau, int censor_max, int admin_censor,
                                 Rng& rng) {
  const auto p = static_cast<int>(beta_l.size());
  const Eigen::MatrixXd x = gen_covariates(n, p, rho, rng);
  const auto times = gen_event_times(x, beta_l, eta, tau, rng);
  const auto cens = gen_censoring(n, censor_max, admin_censor, rng);
  std::vector<SubjectRecord> subjects;
  subjects.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& t = times[static_cast<std::size_t>(i)];
    const int c = cens[static_cast<std::size_t>(i)];
    SubjectRecord s;
    s.id = fmt::format("s{}", i + 1);
    s.event = t.has_value() && *t <= c;
    s.observed_time = s.event ? *t : std::min(c, tau);
    s.covariates = x.row(i).transpose();
    subjects.push_back(std::move(s));
  }
  return SurvivalDataset(simulation_schema(p), std::move(subjects), tau);
}

PriorModel study_prior(const ScenarioConfig& cfg) {
  PriorModel prior;
  prior.link = Link(LinkKind::logit);
  prior.tau = cfg.tau;
  prior.eta_hat = cfg.eta;
  for (Eigen::Index j = 0; j < cfg.beta0.size(); ++j) {
    prior.coefficients.emplace_back(fmt::format("x{}", j + 1), cfg.beta0[j]);
  }
  prior.label = "generative prior (eta, beta0)";
  return prior;
}

std::string_view arm_name(Arm arm) {
  switch (arm) {
    case Arm::kl: return "kl";
    case Arm::prior: return "prior";
    case Arm::local: return "local";
  }
  return "kl";
}

ReplicationRecord run_replicate(const ScenarioConfig& cfg, int replicate) {
  ReplicationRecord rec;
  rec.replicate = replicate;
  try {
    const SettingModel sm = make_setting(cfg.setting, cfg.beta0);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate)));
    const SurvivalDataset local =
        generate_dataset(cfg.n_local, sm.beta_l, cfg.eta, cfg.rho, cfg.tau,
                         cfg.censor_max, cfg.admin_censor, rng);
    const SurvivalDataset validation =
        generate_dataset(cfg.n_validation, sm.beta_l, cfg.eta, cfg.rho, cfg.tau,
                         cfg.censor_max, cfg.admin_censor, rng);
    const PriorModel prior = study_prior(cfg);
    const Link link(LinkKind::logit);

    CvConfig cv;
    cv.folds = cfg.folds;
    cv.lambda_grid = cfg.lambda_grid;
    cv.seed = rng.next();
    cv.threads = 1;
    const KlFit kl = fit_kl_cv(local, prior, link, cv);
    const FittedModel local_fit = fit_local(local, link);
    const FittedModel prior_model =
        model_from_prior(prior, local.schema(), cfg.tau);

    rec.selected_lambda = kl.cv.best_lambda;
    rec.loglik_kl = evaluate(kl.model, validation);
    rec.loglik_prior = evaluate(prior_model, validation);
    rec.loglik_local = evaluate(local_fit, validation);
    rec.converged_kl = kl.model.converged;
    rec.converged_local = local_fit.converged;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

StudySummary summarize(Setting setting,
                       const std::vector<ReplicationRecord>& records) {
  StudySummary s;
  s.setting = setting;
  std::vector<double> kl, prior, local, lambdas;
  for (const auto& r : records) {
    if (!r.ok()) {
      ++s.failed;
      continue;
    }
    ++s.completed;
    kl.push_back(r.loglik_kl);
    prior.push_back(r.loglik_prior);
    local.push_back(r.loglik_local);
    lambdas.push_back(r.selected_lambda);
  }
  s.kl = {mean(kl), median(kl)};
  s.prior = {mean(prior), median(prior)};
  s.local = {mean(local), median(local)};
  s.lambda_mean = mean(lambdas);
  s.lambda_median = median(lambdas);
  s.lambda_small_fraction =
      lambdas.empty()
          ? std::nan("")
          : static_cast<double>(std::count_if(lambdas.begin(), lambdas.end(),
                                              [](double l) { return l <= 0.1; })) /
                static_cast<double>(lambdas.size());
  return s;
}

StudyResult run_study(ScenarioConfig cfg) {
  cfg.validate();
  StudyResult out;
  out.records.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(
      out.records.size(),
      [&](std::size_t r) {
        out.records[r] = run_replicate(cfg, static_cast<int>(r));
      },
      cfg.threads > 0 ? cfg.threads : default_thread_count());
  out.summary = summarize(cfg.setting, out.records);
  return out;
}

}  // namespace klsurv
