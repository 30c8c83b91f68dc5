#pragma once

// Test-only reference computations. Nothing here calls into the likelihood
// or fit code paths it is used to check.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "klsurv/core.hpp"

namespace klsurv::testing {

// Inverse links written out directly, without clamping.
inline double ref_inverse_link(LinkKind kind, double x) {
  switch (kind) {
    case LinkKind::logit: return 1.0 / (1.0 + std::exp(-x));
    case LinkKind::log: return std::exp(x);
    case LinkKind::cloglog: return 1.0 - std::exp(-std::exp(x));
  }
  return 0.0;
}

// Log of the product-form likelihood: for every period k, survivors of the
// risk set R_k contribute (1 - hazard) and members of the death set D_k
// contribute hazard. Works from subject records, not the person-period table.
inline double product_form_loglik(const SurvivalDataset& data,
                                  const Eigen::VectorXd& eta,
                                  const Eigen::VectorXd& beta, LinkKind kind) {
  double likelihood = 1.0;
  for (int k = 1; k <= data.tau(); ++k) {
    double risk_term = 1.0;
    double death_term = 1.0;
    for (const auto& s : data.subjects()) {
      if (s.observed_time < k) continue;  // not in R_k
      const double hazard = ref_inverse_link(kind, eta[k - 1] + s.covariates.dot(beta));
      const bool dies = s.event && s.observed_time == k;  // in D_k
      if (dies) {
        death_term *= hazard;
      } else {
        risk_term *= 1.0 - hazard;
      }
    }
    likelihood *= risk_term * death_term;
  }
  return std::log(likelihood);
}

// Central differences of a scalar function.
inline Eigen::VectorXd central_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x, down = x;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

// Central differences of a vector function; column j holds d f / d x_j.
inline Eigen::MatrixXd central_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::MatrixXd jac(x.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x, down = x;
    up[j] += h;
    down[j] -= h;
    jac.col(j) = (f(up) - f(down)) / (2.0 * h);
  }
  return jac;
}

inline double relative_error(double actual, double expected) {
  return std::abs(actual - expected) / std::max(1.0, std::abs(expected));
}

inline double max_relative_error(const Eigen::MatrixXd& actual,
                                 const Eigen::MatrixXd& expected) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < actual.rows(); ++i) {
    for (Eigen::Index j = 0; j < actual.cols(); ++j) {
      worst = std::max(worst, relative_error(actual(i, j), expected(i, j)));
    }
  }
  return worst;
}

// Small random survival data: times uniform on 1..tau, covariates uniform on
// [-1, 1]. When at_least_one_event is set the first subject is an event.
inline SurvivalDataset random_dataset(std::mt19937_64& gen, int n, int tau,
                                      int p, bool at_least_one_event = true) {
  std::uniform_int_distribution<int> time(1, tau);
  std::uniform_real_distribution<double> cov(-1.0, 1.0);
  std::bernoulli_distribution event(0.6);
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("v" + std::to_string(j + 1));
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < n; ++i) {
    SubjectRecord s;
    s.id = "id" + std::to_string(i);
    s.observed_time = time(gen);
    s.event = event(gen) || (at_least_one_event && i == 0);
    s.covariates.resize(p);
    for (int j = 0; j < p; ++j) s.covariates[j] = cov(gen);
    subjects.push_back(std::move(s));
  }
  return SurvivalDataset(CovariateSchema(names), std::move(subjects), tau);
}

// Parameters whose linear predictors are admissible for every link when
// covariates lie in [-1, 1]: eta in [-3, -1.5], |beta_j| <= 0.3 / p.
inline void random_admissible_params(std::mt19937_64& gen, int tau, int p,
                                     Eigen::VectorXd& eta,
                                     Eigen::VectorXd& beta) {
  std::uniform_real_distribution<double> e(-3.0, -1.5);
  std::uniform_real_distribution<double> b(-0.3, 0.3);
  eta.resize(tau);
  beta.resize(p);
  for (int k = 0; k < tau; ++k) eta[k] = e(gen);
  for (int j = 0; j < p; ++j) beta[j] = b(gen) / std::max(1, p);
}

// One-period data with `events` deaths among `n` subjects and no covariates.
inline SurvivalDataset binomial_dataset(int events, int n) {
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < n; ++i) {
    subjects.push_back({"s" + std::to_string(i), 1, i < events, Eigen::VectorXd(0)});
  }
  return SurvivalDataset(CovariateSchema{}, std::move(subjects), 1);
}

}  // namespace klsurv::testing
