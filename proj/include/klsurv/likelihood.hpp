#pragma once

#include <Eigen/Dense>

#include "klsurv/core.hpp"

namespace klsurv {

// Joint parameter (eta_1..eta_tau, beta_1..beta_p). The joined layout used
// by gradients and Hessians puts the baselines first.
struct ParamVector {
  Eigen::VectorXd eta;
  Eigen::VectorXd beta;

  static ParamVector zeros(int tau, std::size_t p);
  static ParamVector split(const Eigen::VectorXd& joined, int tau);

  Eigen::Index size() const noexcept { return eta.size() + beta.size(); }
  Eigen::VectorXd joined() const;
};

// Per-row binary-regression responses (delta + lambda * delta_hat) / (1 + lambda).
// With lambda = 0 the values are the observed death indicators, bit for bit.
class ResponseWeights {
 public:
  static ResponseWeights observed(const PersonPeriodTable& table);
  static ResponseWeights blended(const PersonPeriodTable& table,
                                 const Eigen::VectorXd& prior_preds,
                                 double lambda);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  double lambda() const noexcept { return lambda_; }

 private:
  ResponseWeights(Eigen::VectorXd values, double lambda)
      : values_(std::move(values)), lambda_(lambda) {}

  Eigen::VectorXd values_;
  double lambda_ = 0.0;
};

// eta_k + x_ik' beta for every row. Throws DimensionError on shape mismatch.
Eigen::VectorXd linear_predictor(const ParamVector& params,
                                 const PersonPeriodTable& table);

// Sum over rows of y log(g/(1-g)) + log(1-g) with y the given responses.
double objective(const ParamVector& params, const PersonPeriodTable& table,
                 const ResponseWeights& responses, Link link);
Eigen::VectorXd gradient(const ParamVector& params,
                         const PersonPeriodTable& table,
                         const ResponseWeights& responses, Link link);
Eigen::MatrixXd hessian(const ParamVector& params,
                        const PersonPeriodTable& table,
                        const ResponseWeights& responses, Link link);

// Fisher information sum g'^2 / (g(1-g)) z z' with z = (e_k, x). Positive
// semidefinite for every link; its rank equals the rank of the design.
Eigen::MatrixXd expected_information(const ParamVector& params,
                                     const PersonPeriodTable& table,
                                     Link link);

// Local-data log-likelihood.
double log_likelihood(const ParamVector& params,
                      const PersonPeriodTable& table, Link link);

// Prior-integrated objective. prior_preds holds delta_hat per table row.
double weighted_log_likelihood(const ParamVector& params,
                               const PersonPeriodTable& table,
                               const Eigen::VectorXd& prior_preds,
                               double lambda, Link link);

Eigen::VectorXd gradient(const ParamVector& params,
                         const PersonPeriodTable& table, Link link);
Eigen::VectorXd gradient(const ParamVector& params,
                         const PersonPeriodTable& table,
                         const Eigen::VectorXd& prior_preds, double lambda,
                         Link link);
Eigen::MatrixXd hessian(const ParamVector& params,
                        const PersonPeriodTable& table, Link link);
Eigen::MatrixXd hessian(const ParamVector& params,
                        const PersonPeriodTable& table,
                        const Eigen::VectorXd& prior_preds, double lambda,
                        Link link);

}  // namespace klsurv
