#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "klsurv/core.hpp"

namespace klsurv {

// A published prediction model: per-period baselines plus name-keyed
// coefficients. The coefficient set may be a subset of the local schema.
struct PriorModel {
  Link link;
  int tau = 0;
  Eigen::VectorXd eta_hat;
  std::vector<std::pair<std::string, double>> coefficients;
  std::string label;

  // Throws InputError when eta_hat length or finiteness is off, or a
  // coefficient name repeats.
  void validate() const;
};

// Coefficients laid out in schema order; covariates the prior does not
// mention get 0.
Eigen::VectorXd align_prior(const PriorModel& prior,
                            const CovariateSchema& schema);

// delta_hat for every table row, using the prior's own inverse link.
Eigen::VectorXd prior_predictions(const PriorModel& prior,
                                  const PersonPeriodTable& table,
                                  const CovariateSchema& schema);

}  // namespace klsurv
