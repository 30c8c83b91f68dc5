#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "klsurv/core.hpp"
#include "klsurv/fit.hpp"
#include "klsurv/prior.hpp"

namespace klsurv::io {

inline constexpr int kFormatVersion = 1;

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Survival data CSV: header row with id, time, event, then covariate columns
// in header order. tau defaults to the largest observed time.
SurvivalDataset read_dataset_csv(std::istream& in,
                                 std::optional<int> tau = std::nullopt);
SurvivalDataset read_dataset_csv(const std::filesystem::path& path,
                                 std::optional<int> tau = std::nullopt);
void write_dataset_csv(std::ostream& out, const SurvivalDataset& data);

// Covariate rows for prediction: an id column plus every schema covariate by
// name (any order, extra columns ignored).
struct CovariateRows {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;  // rows x schema.size(), schema order
};
CovariateRows read_covariates_csv(std::istream& in,
                                  const CovariateSchema& schema);
CovariateRows read_covariates_csv(const std::filesystem::path& path,
                                  const CovariateSchema& schema);

PriorModel read_prior_json(std::istream& in);
PriorModel read_prior_json(const std::filesystem::path& path);
void write_prior_json(std::ostream& out, const PriorModel& prior);

// Free-form key/value provenance block embedded in output files; passed as
// serialized JSON text so callers do not need the JSON library.
FittedModel read_model_json(std::istream& in);
FittedModel read_model_json(const std::filesystem::path& path);
void write_model_json(std::ostream& out, const FittedModel& model,
                      const std::string& label = {},
                      const std::string& manifest_json = {});

// True when the JSON document at path is a prior file rather than a model.
bool is_prior_file(const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace klsurv::io
