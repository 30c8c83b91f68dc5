#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "klsurv/errors.hpp"

namespace klsurv {

// Hazards are kept inside [kHazardEps, 1 - kHazardEps] so log terms stay
// finite.
inline constexpr double kHazardEps = 1e-12;

enum class LinkKind { logit, log, cloglog };

// Inverse link g mapping a linear predictor to a per-period hazard.
// logit gives the discrete logistic model, log the discrete relative risk
// model and cloglog the grouped relative risk model.
class Link {
 public:
  constexpr Link() = default;
  constexpr explicit Link(LinkKind kind) : kind_(kind) {}

  static Link parse(std::string_view name);

  constexpr LinkKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;

  // g(x), clamped to [kHazardEps, 1 - kHazardEps].
  double inverse(double x) const;
  // g'(x) of the unclamped inverse link.
  double inverse_derivative(double x) const;
  double inverse_second_derivative(double x) const;
  // h(p), the link itself. p is clamped into [kHazardEps, 1 - kHazardEps].
  double apply(double p) const;

  // Throws DomainError when x is outside the admissible domain.
  void check_domain(double x) const;

  friend constexpr bool operator==(Link, Link) = default;

 private:
  LinkKind kind_ = LinkKind::logit;
};

double link_inverse(Link link, double x);
double link_inverse_derivative(Link link, double x);

class CovariateSchema {
 public:
  CovariateSchema() = default;
  explicit CovariateSchema(std::vector<std::string> names);

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  friend bool operator==(const CovariateSchema&,
                         const CovariateSchema&) = default;

 private:
  std::vector<std::string> names_;
};

struct SubjectRecord {
  std::string id;
  int observed_time = 1;
  bool event = false;
  Eigen::VectorXd covariates;
};

// Subject-level survival data on the discrete time grid 1..tau.
class SurvivalDataset {
 public:
  SurvivalDataset(CovariateSchema schema, std::vector<SubjectRecord> subjects,
                  int tau);

  const CovariateSchema& schema() const noexcept { return schema_; }
  const std::vector<SubjectRecord>& subjects() const noexcept {
    return subjects_;
  }
  std::size_t size() const noexcept { return subjects_.size(); }
  int tau() const noexcept { return tau_; }
  std::size_t event_count() const noexcept;

  SurvivalDataset subset(std::span<const std::size_t> indices) const;

 private:
  CovariateSchema schema_;
  std::vector<SubjectRecord> subjects_;
  int tau_;
};

// One row per (subject, period at risk). Every materialized row has
// Y_ik = 1, so the at-risk indicator is implicit.
struct PersonPeriodTable {
  std::vector<std::size_t> subject;
  std::vector<int> period;      // 1-based
  Eigen::VectorXd death;        // 0/1
  Eigen::MatrixXd covariates;   // rows x p
  int tau = 0;

  std::size_t rows() const noexcept { return period.size(); }
  std::size_t p() const noexcept {
    return static_cast<std::size_t>(covariates.cols());
  }
  // Number of rows in period k (the size of the risk set R_k).
  std::vector<std::size_t> at_risk_counts() const;
};

PersonPeriodTable expand_person_period(const SurvivalDataset& data);

}  // namespace klsurv
