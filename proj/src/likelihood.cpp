#include "klsurv/likelihood.hpp"

#include <fmt/format.h>

#include <cmath>

namespace klsurv {

ParamVector ParamVector::zeros(int tau, std::size_t p) {
  return {Eigen::VectorXd::Zero(tau),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p))};
}

ParamVector ParamVector::split(const Eigen::VectorXd& joined, int tau) {
  if (tau < 0 || joined.size() < tau) {
    throw DimensionError("joined parameter vector shorter than tau");
  }
  return {joined.head(tau), joined.tail(joined.size() - tau)};
}

Eigen::VectorXd ParamVector::joined() const {
  Eigen::VectorXd out(size());
  out << eta, beta;
  return out;
}

ResponseWeights ResponseWeights::observed(const PersonPeriodTable& table) {
  return ResponseWeights(table.death, 0.0);
}

ResponseWeights ResponseWeights::blended(const PersonPeriodTable& table,
                                         const Eigen::VectorXd& prior_preds,
                                         double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError(fmt::format("lambda must be finite and >= 0, got {}",
                                  lambda));
  }
  if (prior_preds.size() != table.death.size()) {
    throw AlignmentError(fmt::format(
        "prior predictions have {} rows, person-period table has {}",
        prior_preds.size(), table.death.size()));
  }
  Eigen::VectorXd y = (table.death + lambda * prior_preds) / (1.0 + lambda);
  return ResponseWeights(std::move(y), lambda);
}

Eigen::VectorXd linear_predictor(const ParamVector& params,
                                 const PersonPeriodTable& table) {
  if (params.eta.size() != table.tau) {
    throw DimensionError(fmt::format("eta has length {}, table tau is {}",
                                     params.eta.size(), table.tau));
  }
  if (params.beta.size() != table.covariates.cols()) {
    throw DimensionError(fmt::format("beta has length {}, table has {} "
                                     "covariates",
                                     params.beta.size(),
                                     table.covariates.cols()));
  }
  Eigen::VectorXd u = table.covariates * params.beta;
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    u[r] += params.eta[table.period[static_cast<std::size_t>(r)] - 1];
  }
  return u;
}

namespace {

void check_responses(const PersonPeriodTable& table,
                     const ResponseWeights& responses) {
  if (responses.values().size() != static_cast<Eigen::Index>(table.rows())) {
    throw AlignmentError("response vector does not match table rows");
  }
}

// First and second derivative of y log g + (1-y) log(1-g) in the linear
// predictor u.
struct RowDerivatives {
  double score;
  double curvature;
};

RowDerivatives row_derivatives(Link link, double u, double y) {
  const double g = link.inverse(u);
  const double d1 = link.inverse_derivative(u);
  const double d2 = link.inverse_second_derivative(u);
  const double v = g * (1.0 - g);
  const double resid = y - g;
  return {d1 * resid / v,
          (d2 * resid - d1 * d1) / v -
              d1 * d1 * resid * (1.0 - 2.0 * g) / (v * v)};
}

}  // namespace

double objective(const ParamVector& params, const PersonPeriodTable& table,
                 const ResponseWeights& responses, Link link) {
  check_responses(table, responses);
  const Eigen::VectorXd u = linear_predictor(params, table);
  const Eigen::VectorXd& y = responses.values();
  double total = 0.0;
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    const double g = link.inverse(u[r]);
    const double log_surv = std::log1p(-g);
    total += y[r] * (std::log(g) - log_surv) + log_surv;
  }
  return total;
}

Eigen::VectorXd gradient(const ParamVector& params,
                         const PersonPeriodTable& table,
                         const ResponseWeights& responses, Link link) {
  check_responses(table, responses);
  const Eigen::VectorXd u = linear_predictor(params, table);
  const Eigen::VectorXd& y = responses.values();
  Eigen::VectorXd score(u.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    score[r] = row_derivatives(link, u[r], y[r]).score;
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    grad[table.period[static_cast<std::size_t>(r)] - 1] += score[r];
  }
  grad.tail(params.beta.size()) = table.covariates.transpose() * score;
  return grad;
}

namespace {

// Assemble sum_r w_r z_r z_r' with z_r = (e_{k(r)}, x_r).
Eigen::MatrixXd weighted_cross_product(const PersonPeriodTable& table,
                                       const Eigen::VectorXd& w) {
  const Eigen::Index tau = table.tau;
  const Eigen::Index p = table.covariates.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(tau + p, tau + p);
  for (Eigen::Index r = 0; r < w.size(); ++r) {
    const Eigen::Index k = table.period[static_cast<std::size_t>(r)] - 1;
    out(k, k) += w[r];
    out.block(k, tau, 1, p) += w[r] * table.covariates.row(r);
  }
  out.block(tau, 0, p, tau) = out.block(0, tau, tau, p).transpose();
  out.block(tau, tau, p, p).noalias() =
      table.covariates.transpose() * (w.asDiagonal() * table.covariates);
  return out;
}

}  // namespace

Eigen::MatrixXd hessian(const ParamVector& params,
                        const PersonPeriodTable& table,
                        const ResponseWeights& responses, Link link) {
  check_responses(table, responses);
  const Eigen::VectorXd u = linear_predictor(params, table);
  const Eigen::VectorXd& y = responses.values();
  Eigen::VectorXd w(u.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    w[r] = row_derivatives(link, u[r], y[r]).curvature;
  }
  return weighted_cross_product(table, w);
}

Eigen::MatrixXd expected_information(const ParamVector& params,
                                     const PersonPeriodTable& table,
                                     Link link) {
  const Eigen::VectorXd u = linear_predictor(params, table);
  Eigen::VectorXd w(u.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    const double g = link.inverse(u[r]);
    const double d1 = link.inverse_derivative(u[r]);
    w[r] = d1 * d1 / (g * (1.0 - g));
  }
  return weighted_cross_product(table, w);
}

double log_likelihood(const ParamVector& params,
                      const PersonPeriodTable& table, Link link) {
  return objective(params, table, ResponseWeights::observed(table), link);
}

double weighted_log_likelihood(const ParamVector& params,
                               const PersonPeriodTable& table,
                               const Eigen::VectorXd& prior_preds,
                               double lambda, Link link) {
  return objective(params, table,
                   ResponseWeights::blended(table, prior_preds, lambda), link);
}

Eigen::VectorXd gradient(const ParamVector& params,
                         const PersonPeriodTable& table, Link link) {
  return gradient(params, table, ResponseWeights::observed(table), link);
}

Eigen::VectorXd gradient(const ParamVector& params,
                         const PersonPeriodTable& table,
                         const Eigen::VectorXd& prior_preds, double lambda,
                         Link link) {
  return gradient(params, table,
                  ResponseWeights::blended(table, prior_preds, lambda), link);
}

Eigen::MatrixXd hessian(const ParamVector& params,
                        const PersonPeriodTable& table, Link link) {
  return hessian(params, table, ResponseWeights::observed(table), link);
}

Eigen::MatrixXd hessian(const ParamVector& params,
                        const PersonPeriodTable& table,
                        const Eigen::VectorXd& prior_preds, double lambda,
                        Link link) {
  return hessian(params, table,
                 ResponseWeights::blended(table, prior_preds, lambda), link);
}

}  // namespace klsurv
