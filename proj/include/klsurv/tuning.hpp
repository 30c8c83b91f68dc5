#pragma once

#include <cstdint>
#include <vector>

#include "klsurv/fit.hpp"
#include "klsurv/prior.hpp"

namespace klsurv {

// {0} followed by 20 log-spaced points from 0.01 to 10.
std::vector<double> default_lambda_grid();

struct CvConfig {
  int folds = 5;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::uint64_t seed = 0;
  bool stratify_on_event = true;
  // 0 means default_thread_count().
  int threads = 0;

  void validate() const;
};

struct CvPoint {
  double lambda = 0.0;
  double mean_loglik = 0.0;
  std::vector<double> fold_loglik;
};

struct CvResult {
  double best_lambda = 0.0;
  std::vector<CvPoint> curve;
  // fold id (0-based) per subject, in dataset order.
  std::vector<int> fold_assignment;
};

// Subject-level fold ids. With stratification, events and non-events are
// dealt round-robin separately so each stratum is spread evenly.
std::vector<int> assign_folds(const SurvivalDataset& data, int folds,
                              std::uint64_t seed, bool stratify_on_event);

// Largest mean held-out log-likelihood; exact ties go to the smaller lambda.
double select_best_lambda(const std::vector<CvPoint>& curve);

CvResult cv_select_lambda(const SurvivalDataset& data, const PriorModel& prior,
                          Link link, const CvConfig& cfg,
                          const FitOptions& opts = {});

struct KlFit {
  CvResult cv;
  FittedModel model;
};

// Cross-validates lambda, then refits on all of data at the chosen value.
KlFit fit_kl_cv(const SurvivalDataset& data, const PriorModel& prior,
                Link link, const CvConfig& cfg, const FitOptions& opts = {});

}  // namespace klsurv
