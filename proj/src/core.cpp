#include "klsurv/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace klsurv {

UnknownCovariateError::UnknownCovariateError(std::vector<std::string> names)
    : AlignmentError(fmt::format("prior covariates not in local schema: {}",
                                 fmt::join(names, ", "))),
      names_(std::move(names)) {}

InputError::InputError(const std::string& what, std::size_t line,
                       std::size_t column)
    : Error(line == 0 ? what
                      : fmt::format("line {}, column {}: {}", line, column,
                                    what)),
      line_(line),
      column_(column) {}

namespace {

double clamp_hazard(double p) {
  return std::clamp(p, kHazardEps, 1.0 - kHazardEps);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Link Link::parse(std::string_view name) {
  if (name == "logit") return Link(LinkKind::logit);
  if (name == "log") return Link(LinkKind::log);
  if (name == "cloglog") return Link(LinkKind::cloglog);
  throw InputError(fmt::format("unknown link '{}' (expected logit, log or "
                               "cloglog)",
                               name));
}

std::string_view Link::name() const noexcept {
  switch (kind_) {
    case LinkKind::logit: return "logit";
    case LinkKind::log: return "log";
    case LinkKind::cloglog: return "cloglog";
  }
  return "logit";
}

void Link::check_domain(double x) const {
  if (!std::isfinite(x)) {
    throw DomainError(fmt::format("non-finite linear predictor {}", x));
  }
  if (kind_ == LinkKind::log && x >= 0.0) {
    throw DomainError(fmt::format(
        "log link requires a negative linear predictor, got {}", x));
  }
}

double Link::inverse(double x) const {
  check_domain(x);
  switch (kind_) {
    case LinkKind::logit: return clamp_hazard(logistic(x));
    case LinkKind::log: return clamp_hazard(std::exp(x));
    case LinkKind::cloglog: return clamp_hazard(-std::expm1(-std::exp(x)));
  }
  return 0.5;
}

double Link::inverse_derivative(double x) const {
  check_domain(x);
  switch (kind_) {
    case LinkKind::logit: {
      const double g = logistic(x);
      return g * (1.0 - g);
    }
    case LinkKind::log: return std::exp(x);
    case LinkKind::cloglog: {
      const double ex = std::exp(x);
      return ex * std::exp(-ex);
    }
  }
  return 0.0;
}

double Link::inverse_second_derivative(double x) const {
  check_domain(x);
  switch (kind_) {
    case LinkKind::logit: {
      const double g = logistic(x);
      return g * (1.0 - g) * (1.0 - 2.0 * g);
    }
    case LinkKind::log: return std::exp(x);
    case LinkKind::cloglog: {
      const double ex = std::exp(x);
      return ex * std::exp(-ex) * (1.0 - ex);
    }
  }
  return 0.0;
}

double Link::apply(double p) const {
  const double q = clamp_hazard(p);
  switch (kind_) {
    case LinkKind::logit: return std::log(q) - std::log1p(-q);
    case LinkKind::log: return std::log(q);
    case LinkKind::cloglog: return std::log(-std::log1p(-q));
  }
  return 0.0;
}

double link_inverse(Link link, double x) { return link.inverse(x); }

double link_inverse_derivative(Link link, double x) {
  return link.inverse_derivative(x);
}

CovariateSchema::CovariateSchema(std::vector<std::string> names)
    : names_(std::move(names)) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InputError("empty covariate name");
    if (!seen.insert(n).second) {
      throw InputError(fmt::format("duplicate covariate name '{}'", n));
    }
  }
}

std::optional<std::size_t> CovariateSchema::index_of(
    std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

SurvivalDataset::SurvivalDataset(CovariateSchema schema,
                                 std::vector<SubjectRecord> subjects, int tau)
    : schema_(std::move(schema)), subjects_(std::move(subjects)), tau_(tau) {
  if (tau_ < 1) throw InputError(fmt::format("tau must be >= 1, got {}", tau_));
  for (const auto& s : subjects_) {
    if (static_cast<std::size_t>(s.covariates.size()) != schema_.size()) {
      throw DimensionError(fmt::format(
          "subject '{}' has {} covariates, schema has {}", s.id,
          s.covariates.size(), schema_.size()));
    }
    if (s.observed_time < 1 || s.observed_time > tau_) {
      throw InputError(fmt::format("subject '{}' time {} outside 1..{}", s.id,
                                   s.observed_time, tau_));
    }
    if (!s.covariates.allFinite()) {
      throw InputError(
          fmt::format("subject '{}' has non-finite covariates", s.id));
    }
  }
}

std::size_t SurvivalDataset::event_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(subjects_.begin(), subjects_.end(),
                    [](const SubjectRecord& s) { return s.event; }));
}

SurvivalDataset SurvivalDataset::subset(
    std::span<const std::size_t> indices) const {
  std::vector<SubjectRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(subjects_.at(i));
  return SurvivalDataset(schema_, std::move(out), tau_);
}

std::vector<std::size_t> PersonPeriodTable::at_risk_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(tau), 0);
  for (int k : period) ++counts[static_cast<std::size_t>(k - 1)];
  return counts;
}

PersonPeriodTable expand_person_period(const SurvivalDataset& data) {
  PersonPeriodTable table;
  table.tau = data.tau();
  std::size_t rows = 0;
  for (const auto& s : data.subjects()) {
    rows += static_cast<std::size_t>(s.observed_time);
  }
  const auto p = static_cast<Eigen::Index>(data.schema().size());
  table.subject.reserve(rows);
  table.period.reserve(rows);
  table.death.resize(static_cast<Eigen::Index>(rows));
  table.covariates.resize(static_cast<Eigen::Index>(rows), p);

  Eigen::Index r = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.subjects()[i];
    for (int k = 1; k <= s.observed_time; ++k, ++r) {
      table.subject.push_back(i);
      table.period.push_back(k);
      table.death[r] = (s.event && k == s.observed_time) ? 1.0 : 0.0;
      table.covariates.row(r) = s.covariates.transpose();
    }
  }
  return table;
}

}  // namespace klsurv
