#include "klsurv/prior.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_set>

namespace klsurv {

void PriorModel::validate() const {
  if (tau < 1) throw InputError(fmt::format("prior tau must be >= 1, got {}", tau));
  if (eta_hat.size() != tau) {
    throw InputError(fmt::format("prior eta has {} entries, tau is {}",
                                 eta_hat.size(), tau));
  }
  if (!eta_hat.allFinite()) throw InputError("prior eta has non-finite entries");
  std::unordered_set<std::string> seen;
  for (const auto& [name, value] : coefficients) {
    if (!seen.insert(name).second) {
      throw InputError(fmt::format("duplicate prior coefficient '{}'", name));
    }
    if (!std::isfinite(value)) {
      throw InputError(fmt::format("prior coefficient '{}' is not finite", name));
    }
  }
}

Eigen::VectorXd align_prior(const PriorModel& prior,
                            const CovariateSchema& schema) {
  Eigen::VectorXd out =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(schema.size()));
  std::vector<std::string> unknown;
  for (const auto& [name, value] : prior.coefficients) {
    if (const auto idx = schema.index_of(name)) {
      out[static_cast<Eigen::Index>(*idx)] = value;
    } else {
      unknown.push_back(name);
    }
  }
  if (!unknown.empty()) throw UnknownCovariateError(std::move(unknown));
  return out;
}

Eigen::VectorXd prior_predictions(const PriorModel& prior,
                                  const PersonPeriodTable& table,
                                  const CovariateSchema& schema) {
  if (prior.tau < table.tau) {
    throw TauMismatchError(fmt::format(
        "prior covers {} periods, local data needs {}", prior.tau, table.tau));
  }
  if (static_cast<std::size_t>(table.covariates.cols()) != schema.size()) {
    throw AlignmentError("table covariates do not match schema");
  }
  const Eigen::VectorXd beta = align_prior(prior, schema);
  Eigen::VectorXd u = table.covariates * beta;
  Eigen::VectorXd out(u.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    out[r] = prior.link.inverse(
        u[r] + prior.eta_hat[table.period[static_cast<std::size_t>(r)] - 1]);
  }
  return out;
}

}  // namespace klsurv
