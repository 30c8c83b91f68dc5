#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "klsurv/core.hpp"
#include "klsurv/likelihood.hpp"
#include "klsurv/prior.hpp"

namespace klsurv {

// Baselines are held inside [-kEtaBound, kEtaBound] while fitting.
inline constexpr double kEtaBound = 15.0;
// Log-link iterates keep every linear predictor below -kLogDomainMargin.
inline constexpr double kLogDomainMargin = 1e-8;
// Fits report converged only when the projected gradient is below this.
inline constexpr double kStationarityTol = 1e-5;

struct FitOptions {
  int max_iter = 100;
  double tol = 1e-9;
  int step_halving_max = 30;
  // Starting point; when empty, beta = 0 and eta_k = h(raw death fraction).
  std::optional<ParamVector> init;

  void validate() const;
};

struct FittedModel {
  ParamVector params;
  Link link;
  CovariateSchema schema;
  int tau = 0;
  // false for periods no training subject reached; predictions there throw.
  std::vector<bool> eta_estimable;
  bool converged = false;
  int n_iter = 0;
  double final_objective = 0.0;
  double lambda_used = 0.0;
  // Max-norm of the gradient over parameters not held at a bound.
  double gradient_norm = 0.0;
  // Objective after every accepted step, starting with the initial point.
  std::vector<double> objective_trace;
};

// Maximizes the given response-weighted objective on a prepared table.
// fixed_eta supplies values for periods without at-risk rows; when absent
// those periods are marked unestimable.
FittedModel fit_table(const PersonPeriodTable& table,
                      const CovariateSchema& schema,
                      const ResponseWeights& responses, Link link,
                      const FitOptions& opts,
                      const std::optional<Eigen::VectorXd>& fixed_eta = {});

FittedModel fit_local(const SurvivalDataset& data, Link link,
                      const FitOptions& opts = {});

FittedModel fit_kl(const SurvivalDataset& data, const PriorModel& prior,
                   double lambda, Link link, const FitOptions& opts = {});

// Wraps a prior as a model on the given schema (zero-padded coefficients,
// prior link, first schema tau periods of the baseline).
FittedModel model_from_prior(const PriorModel& prior,
                             const CovariateSchema& schema, int tau);

Eigen::VectorXd predict_hazard(const FittedModel& model,
                               const Eigen::VectorXd& covariates);

// S(k) = prod_{j<=k} (1 - hazard_j) for k = 1..tau. S(0) = 1 is implied and
// not emitted.
Eigen::VectorXd predict_survival(const FittedModel& model,
                                 const Eigen::VectorXd& covariates);

// Unweighted log-likelihood of data under the model, whatever lambda the
// model was fitted with.
double evaluate(const FittedModel& model, const SurvivalDataset& data);

}  // namespace klsurv
