#include "klsurv/fit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace klsurv {

void FitOptions::validate() const {
  if (max_iter < 1) throw InputError("max_iter must be >= 1");
  if (!(tol > 0.0)) throw InputError("tol must be > 0");
  if (step_halving_max < 0) throw InputError("step_halving_max must be >= 0");
}

namespace {

constexpr double kGradientTight = 1e-9;
constexpr double kGradientLoose = 1e-7;

struct Problem {
  const PersonPeriodTable& table;
  const ResponseWeights& responses;
  Link link;
  Eigen::Index tau;
  std::vector<bool> estimable;
};

bool feasible(const Problem& prob, const ParamVector& params) {
  if (prob.link.kind() != LinkKind::log) return true;
  if (prob.table.rows() == 0) return true;
  return linear_predictor(params, prob.table).maxCoeff() < -kLogDomainMargin;
}

void clamp_eta(Eigen::VectorXd& theta, Eigen::Index tau) {
  for (Eigen::Index k = 0; k < tau; ++k) {
    theta[k] = std::clamp(theta[k], -kEtaBound, kEtaBound);
  }
}

ParamVector default_init(const Problem& prob, std::size_t p,
                         const std::optional<Eigen::VectorXd>& fixed_eta) {
  ParamVector init = ParamVector::zeros(static_cast<int>(prob.tau), p);
  Eigen::VectorXd deaths = Eigen::VectorXd::Zero(prob.tau);
  Eigen::VectorXd at_risk = Eigen::VectorXd::Zero(prob.tau);
  const Eigen::VectorXd& y = prob.responses.values();
  for (std::size_t r = 0; r < prob.table.rows(); ++r) {
    const auto k = prob.table.period[r] - 1;
    deaths[k] += y[static_cast<Eigen::Index>(r)];
    at_risk[k] += 1.0;
  }
  for (Eigen::Index k = 0; k < prob.tau; ++k) {
    if (!prob.estimable[static_cast<std::size_t>(k)]) {
      init.eta[k] = fixed_eta ? (*fixed_eta)[k] : 0.0;
      continue;
    }
    double eta = prob.link.apply(std::max(deaths[k] / at_risk[k], kHazardEps));
    eta = std::clamp(eta, -kEtaBound, kEtaBound);
    if (prob.link.kind() == LinkKind::log) eta = std::min(eta, -1e-6);
    init.eta[k] = eta;
  }
  return init;
}

// Parameters that move freely: estimable baselines not pinned at a bound by
// an outward-pointing gradient, plus every coefficient.
std::vector<Eigen::Index> free_set(const Problem& prob,
                                   const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& grad) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(theta.size()));
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (j < prob.tau) {
      if (!prob.estimable[static_cast<std::size_t>(j)]) continue;
      if (theta[j] <= -kEtaBound && grad[j] < 0.0) continue;
      if (theta[j] >= kEtaBound && grad[j] > 0.0) continue;
    }
    idx.push_back(j);
  }
  return idx;
}

double max_abs(const Eigen::VectorXd& grad,
               const std::vector<Eigen::Index>& idx) {
  double m = 0.0;
  for (Eigen::Index j : idx) m = std::max(m, std::abs(grad[j]));
  return m;
}

void check_rank(const Problem& prob, const ParamVector& init) {
  const Eigen::MatrixXd info =
      expected_information(init, prob.table, prob.link);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < info.rows(); ++j) {
    if (j < prob.tau && !prob.estimable[static_cast<std::size_t>(j)]) continue;
    idx.push_back(j);
  }
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd scale(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double d = info(idx[a], idx[a]);
    if (!(d > 0.0)) {
      throw SingularHessianError(
          static_cast<std::size_t>(idx[a]),
          fmt::format("parameter {} has no information (all-zero column)",
                      idx[a]));
    }
    scale[a] = 1.0 / std::sqrt(d);
  }
  Eigen::MatrixXd corr(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      corr(a, b) = info(idx[a], idx[b]) * scale[a] * scale[b];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(corr);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) {
    const Eigen::Index bad = idx[qr.colsPermutation().indices()[qr.rank()]];
    throw SingularHessianError(
        static_cast<std::size_t>(bad),
        fmt::format("design is rank deficient ({} of {}); parameter {} is "
                    "collinear with the others",
                    qr.rank(), n, bad));
  }
}

}  // namespace

FittedModel fit_table(const PersonPeriodTable& table,
                      const CovariateSchema& schema,
                      const ResponseWeights& responses, Link link,
                      const FitOptions& opts,
                      const std::optional<Eigen::VectorXd>& fixed_eta) {
  opts.validate();
  if (static_cast<std::size_t>(table.covariates.cols()) != schema.size()) {
    throw DimensionError("table covariates do not match schema");
  }
  if (responses.values().size() != static_cast<Eigen::Index>(table.rows())) {
    throw AlignmentError("responses do not match table rows");
  }
  if (schema.size() >= table.rows()) {
    throw DimensionError(fmt::format(
        "{} covariates need more than {} person-period rows", schema.size(),
        table.rows()));
  }
  if (!(responses.values().sum() > 0.0)) {
    throw NoEventsError("no events to fit");
  }
  if (fixed_eta && fixed_eta->size() < table.tau) {
    throw DimensionError("fixed baseline vector shorter than tau");
  }

  Problem prob{table, responses, link, table.tau, {}};
  const auto counts = table.at_risk_counts();
  for (auto c : counts) prob.estimable.push_back(c > 0);

  ParamVector start;
  if (opts.init) {
    start = *opts.init;
    if (start.eta.size() != table.tau ||
        static_cast<std::size_t>(start.beta.size()) != schema.size()) {
      throw DimensionError("initial parameters do not match the data");
    }
    for (Eigen::Index k = 0; k < prob.tau; ++k) {
      if (!prob.estimable[static_cast<std::size_t>(k)] && fixed_eta) {
        start.eta[k] = (*fixed_eta)[k];
      }
    }
  } else {
    start = default_init(prob, schema.size(), fixed_eta);
  }
  Eigen::VectorXd theta = start.joined();
  clamp_eta(theta, prob.tau);
  start = ParamVector::split(theta, static_cast<int>(prob.tau));
  if (!feasible(prob, start)) {
    throw DomainError("initial parameters leave the log-link domain");
  }
  check_rank(prob, start);

  double obj = objective(start, table, responses, link);
  FittedModel model;
  model.objective_trace.push_back(obj);

  bool small_change = false;
  double pg = 0.0;
  int iter = 0;
  for (;; ++iter) {
    const ParamVector current = ParamVector::split(theta, static_cast<int>(prob.tau));
    const Eigen::VectorXd grad = gradient(current, table, responses, link);
    const auto idx = free_set(prob, theta, grad);
    pg = max_abs(grad, idx);
    if (pg < kGradientTight || (small_change && pg < kGradientLoose)) break;
    if (iter >= opts.max_iter) break;

    const auto n = static_cast<Eigen::Index>(idx.size());
    const Eigen::MatrixXd hess = hessian(current, table, responses, link);
    Eigen::MatrixXd neg_h(n, n);
    Eigen::VectorXd g_free(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      g_free[a] = grad[idx[a]];
      for (Eigen::Index b = 0; b < n; ++b) neg_h(a, b) = -hess(idx[a], idx[b]);
    }
    Eigen::VectorXd dir_free;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
    const bool newton = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                        ldlt.vectorD().minCoeff() >
                            1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff());
    if (newton) {
      dir_free = ldlt.solve(g_free);
    } else {
      dir_free = g_free / std::max(1.0, g_free.lpNorm<Eigen::Infinity>());
    }
    Eigen::VectorXd direction = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index a = 0; a < n; ++a) direction[idx[a]] = dir_free[a];

    bool accepted = false;
    double step = 1.0;
    for (int h = 0; h <= opts.step_halving_max; ++h, step *= 0.5) {
      Eigen::VectorXd cand = theta + step * direction;
      clamp_eta(cand, prob.tau);
      const ParamVector cp = ParamVector::split(cand, static_cast<int>(prob.tau));
      if (!feasible(prob, cp)) continue;
      const double cand_obj = objective(cp, table, responses, link);
      if (cand_obj >= obj) {
        small_change = std::abs(cand_obj - obj) <= opts.tol * (1.0 + std::abs(obj));
        const bool moved = cand_obj > obj;
        theta = cand;
        obj = cand_obj;
        model.objective_trace.push_back(obj);
        accepted = moved;
        if (!moved) small_change = true;
        break;
      }
    }
    if (!accepted) {
      const ParamVector cur = ParamVector::split(theta, static_cast<int>(prob.tau));
      const Eigen::VectorXd g = gradient(cur, table, responses, link);
      pg = max_abs(g, free_set(prob, theta, g));
      break;
    }
  }

  model.params = ParamVector::split(theta, static_cast<int>(prob.tau));
  model.link = link;
  model.schema = schema;
  model.tau = table.tau;
  model.eta_estimable = prob.estimable;
  if (fixed_eta) model.eta_estimable.assign(model.eta_estimable.size(), true);
  model.n_iter = iter;
  model.final_objective = obj;
  model.lambda_used = responses.lambda();
  model.gradient_norm = pg;
  model.converged = pg < kStationarityTol;
  return model;
}

FittedModel fit_local(const SurvivalDataset& data, Link link,
                      const FitOptions& opts) {
  if (data.event_count() == 0) throw NoEventsError("dataset has no events");
  const PersonPeriodTable table = expand_person_period(data);
  return fit_table(table, data.schema(), ResponseWeights::observed(table), link,
                   opts);
}

FittedModel fit_kl(const SurvivalDataset& data, const PriorModel& prior,
                   double lambda, Link link, const FitOptions& opts) {
  if (data.event_count() == 0) throw NoEventsError("dataset has no events");
  const PersonPeriodTable table = expand_person_period(data);
  const Eigen::VectorXd preds = prior_predictions(prior, table, data.schema());
  const ResponseWeights responses = ResponseWeights::blended(table, preds, lambda);
  std::optional<Eigen::VectorXd> fixed;
  if (lambda > 0.0) fixed = prior.eta_hat.head(table.tau);
  return fit_table(table, data.schema(), responses, link, opts, fixed);
}

FittedModel model_from_prior(const PriorModel& prior,
                             const CovariateSchema& schema, int tau) {
  if (prior.tau < tau) {
    throw TauMismatchError(fmt::format(
        "prior covers {} periods, {} requested", prior.tau, tau));
  }
  FittedModel model;
  model.params.eta = prior.eta_hat.head(tau);
  model.params.beta = align_prior(prior, schema);
  model.link = prior.link;
  model.schema = schema;
  model.tau = tau;
  model.eta_estimable.assign(static_cast<std::size_t>(tau), true);
  model.converged = true;
  model.final_objective = std::numeric_limits<double>::quiet_NaN();
  model.lambda_used = std::numeric_limits<double>::infinity();
  return model;
}

Eigen::VectorXd predict_hazard(const FittedModel& model,
                               const Eigen::VectorXd& covariates) {
  if (covariates.size() != model.params.beta.size()) {
    throw DimensionError(fmt::format("expected {} covariates, got {}",
                                     model.params.beta.size(),
                                     covariates.size()));
  }
  const double xb = covariates.dot(model.params.beta);
  Eigen::VectorXd out(model.tau);
  for (Eigen::Index k = 0; k < model.tau; ++k) {
    if (!model.eta_estimable.empty() &&
        !model.eta_estimable[static_cast<std::size_t>(k)]) {
      throw UnestimableError(
          fmt::format("baseline for period {} was not estimable", k + 1));
    }
    out[k] = model.link.inverse(model.params.eta[k] + xb);
  }
  return out;
}

Eigen::VectorXd predict_survival(const FittedModel& model,
                                 const Eigen::VectorXd& covariates) {
  const Eigen::VectorXd hazard = predict_hazard(model, covariates);
  Eigen::VectorXd surv(hazard.size());
  double s = 1.0;
  for (Eigen::Index k = 0; k < hazard.size(); ++k) {
    s *= 1.0 - hazard[k];
    surv[k] = s;
  }
  return surv;
}

double evaluate(const FittedModel& model, const SurvivalDataset& data) {
  if (data.schema().names() != model.schema.names()) {
    throw DimensionError("dataset covariates do not match the model schema");
  }
  if (data.tau() > model.tau) {
    throw DimensionError(fmt::format(
        "dataset spans {} periods, model covers {}", data.tau(), model.tau));
  }
  const PersonPeriodTable table = expand_person_period(data);
  const auto counts = table.at_risk_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0 && !model.eta_estimable.empty() &&
        !model.eta_estimable[k]) {
      throw UnestimableError(
          fmt::format("baseline for period {} was not estimable", k + 1));
    }
  }
  ParamVector params{model.params.eta.head(data.tau()), model.params.beta};
  return log_likelihood(params, table, model.link);
}

}  // namespace klsurv
