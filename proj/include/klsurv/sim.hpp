#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "klsurv/core.hpp"
#include "klsurv/prior.hpp"
#include "klsurv/rng.hpp"
#include "klsurv/tuning.hpp"

namespace klsurv {

// Local-vs-prior coefficient relationships.
//   a: beta_l = beta0          d: beta_l = (beta0, 0.2 beta0)
//   b: beta_l = 0.5 beta0      e: beta_l = (beta0, 0.5 beta0)
//   c: beta_l = reverse(beta0) f: beta_l = (beta0, beta0)
enum class Setting { a, b, c, d, e, f };

Setting parse_setting(std::string_view s);
char setting_name(Setting s);

// (0.5, -0.5, 0.5, ...) of length p0.
Eigen::VectorXd default_beta0(std::size_t p0 = 10);

struct ScenarioConfig {
  Setting setting = Setting::a;
  Eigen::VectorXd beta0 = default_beta0();
  int n_local = 300;
  int n_validation = 1000;
  int tau = 10;
  // Per-period baseline; defaults to logit(0.08) in every period.
  Eigen::VectorXd eta;
  double rho = 0.5;
  int censor_max = 30;
  int admin_censor = 10;
  int replications = 100;
  std::uint64_t seed = 1;
  int folds = 5;
  std::vector<double> lambda_grid = default_lambda_grid();
  // 0 means default_thread_count().
  int threads = 0;

  // Fills defaults (eta) and checks ranges; throws InputError.
  void validate();
};

Eigen::MatrixXd ar1_covariance(int p, double rho);

Eigen::MatrixXd gen_covariates(int n, int p, double rho, Rng& rng);

// First period with a logistic-hazard success, or nullopt when the subject
// survives all tau periods.
std::vector<std::optional<int>> gen_event_times(const Eigen::MatrixXd& x,
                                                const Eigen::VectorXd& beta_l,
                                                const Eigen::VectorXd& eta,
                                                int tau, Rng& rng);

// min(U, admin_censor) with U uniform on 1..censor_max.
int truncate_censoring(int latent, int admin_censor);
std::vector<int> gen_censoring(int n, int censor_max, int admin_censor,
                               Rng& rng);

struct SettingModel {
  Eigen::VectorXd beta_l;
  int local_p = 0;
};

SettingModel make_setting(Setting setting, const Eigen::VectorXd& beta0);

// Covariate names x1..xp.
CovariateSchema simulation_schema(int p);

// Draws covariates, event times and censoring, and records
// observed_time = min(T, C), event = (T <= C).
SurvivalDataset generate_dataset(int n, const Eigen::VectorXd& beta_l,
                                 const Eigen::VectorXd& eta, double rho,
                                 int tau, int censor_max, int admin_censor,
                                 Rng& rng);

// Prior built from the generative baseline and beta0 on x1..x_p0.
PriorModel study_prior(const ScenarioConfig& cfg);

enum class Arm { kl, prior, local };
std::string_view arm_name(Arm arm);

struct ReplicationRecord {
  int replicate = 0;
  double selected_lambda = 0.0;
  double loglik_kl = 0.0;
  double loglik_prior = 0.0;
  double loglik_local = 0.0;
  bool converged_kl = false;
  bool converged_local = false;
  // Non-empty when the replicate aborted; the numbers are then meaningless.
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

struct ArmSummary {
  double mean = 0.0;
  double median = 0.0;
};

struct StudySummary {
  Setting setting = Setting::a;
  int completed = 0;
  int failed = 0;
  ArmSummary kl, prior, local;
  double lambda_median = 0.0;
  double lambda_mean = 0.0;
  // Share of completed replicates with selected lambda <= 0.1.
  double lambda_small_fraction = 0.0;
};

struct StudyResult {
  std::vector<ReplicationRecord> records;
  StudySummary summary;
};

ReplicationRecord run_replicate(const ScenarioConfig& cfg, int replicate);
StudySummary summarize(Setting setting,
                       const std::vector<ReplicationRecord>& records);
StudyResult run_study(ScenarioConfig cfg);

}  // namespace klsurv
