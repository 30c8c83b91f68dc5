#include "klsurv/tuning.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "klsurv/parallel.hpp"
#include "klsurv/rng.hpp"

namespace klsurv {

std::vector<double> default_lambda_grid() {
  std::vector<double> grid{0.0};
  constexpr int kPoints = 20;
  const double lo = std::log10(0.01);
  const double hi = std::log10(10.0);
  for (int i = 0; i < kPoints; ++i) {
    grid.push_back(std::pow(10.0, lo + (hi - lo) * i / (kPoints - 1)));
  }
  return grid;
}

void CvConfig::validate() const {
  if (folds < 2) throw InputError(fmt::format("folds must be >= 2, got {}", folds));
  if (lambda_grid.empty()) throw InputError("lambda grid is empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0) || !std::isfinite(lambda_grid[i])) {
      throw InputError(fmt::format("lambda grid value {} is not a finite "
                                   "non-negative number",
                                   lambda_grid[i]));
    }
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
      throw InputError("lambda grid must be strictly increasing");
    }
  }
}

std::vector<int> assign_folds(const SurvivalDataset& data, int folds,
                              std::uint64_t seed, bool stratify_on_event) {
  if (folds < 2) throw InputError("folds must be >= 2");
  std::vector<std::vector<std::size_t>> strata(stratify_on_event ? 2 : 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool ev = data.subjects()[i].event;
    strata[stratify_on_event && ev ? 1 : 0].push_back(i);
  }
  Rng rng(derive_seed(seed, 0x666f6c6473ULL));
  std::vector<int> out(data.size(), 0);
  int next = 0;
  for (auto& members : strata) {
    for (std::size_t i = members.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t idx : members) {
      out[idx] = next;
      next = (next + 1) % folds;
    }
  }
  return out;
}

double select_best_lambda(const std::vector<CvPoint>& curve) {
  if (curve.empty()) throw InputError("empty cross-validation curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const bool better = curve[i].mean_loglik > curve[best].mean_loglik ||
                        (curve[i].mean_loglik == curve[best].mean_loglik &&
                         curve[i].lambda < curve[best].lambda);
    if (better) best = i;
  }
  return curve[best].lambda;
}

namespace {

struct FoldData {
  PersonPeriodTable train_table;
  Eigen::VectorXd train_preds;
  SurvivalDataset held_out;
};

}  // namespace

CvResult cv_select_lambda(const SurvivalDataset& data, const PriorModel& prior,
                          Link link, const CvConfig& cfg,
                          const FitOptions& opts) {
  cfg.validate();
  if (data.size() < static_cast<std::size_t>(cfg.folds)) {
    throw InputError(fmt::format("{} subjects cannot fill {} folds",
                                 data.size(), cfg.folds));
  }
  CvResult result;
  result.fold_assignment =
      assign_folds(data, cfg.folds, cfg.seed, cfg.stratify_on_event);

  std::vector<FoldData> folds;
  folds.reserve(static_cast<std::size_t>(cfg.folds));
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (result.fold_assignment[i] == f ? held : train).push_back(i);
    }
    SurvivalDataset train_data = data.subset(train);
    if (train_data.event_count() == 0) {
      throw DegenerateFoldError(
          f, fmt::format("training portion of fold {} has no events", f));
    }
    PersonPeriodTable table = expand_person_period(train_data);
    Eigen::VectorXd preds = prior_predictions(prior, table, data.schema());
    folds.push_back({std::move(table), std::move(preds), data.subset(held)});
  }

  const std::size_t n_lambda = cfg.lambda_grid.size();
  const auto n_folds = static_cast<std::size_t>(cfg.folds);
  std::vector<double> scores(n_lambda * n_folds, 0.0);
  const std::optional<Eigen::VectorXd> prior_eta =
      prior.eta_hat.head(data.tau()).eval();
  parallel_for(
      n_lambda * n_folds,
      [&](std::size_t job) {
        const std::size_t li = job / n_folds;
        const FoldData& fd = folds[job % n_folds];
        const double lambda = cfg.lambda_grid[li];
        const ResponseWeights responses =
            ResponseWeights::blended(fd.train_table, fd.train_preds, lambda);
        const FittedModel model =
            fit_table(fd.train_table, data.schema(), responses, link, opts,
                      lambda > 0.0 ? prior_eta : std::nullopt);
        scores[job] = evaluate(model, fd.held_out);
      },
      cfg.threads > 0 ? cfg.threads : default_thread_count());

  for (std::size_t li = 0; li < n_lambda; ++li) {
    CvPoint point;
    point.lambda = cfg.lambda_grid[li];
    point.fold_loglik.assign(scores.begin() + static_cast<long>(li * n_folds),
                             scores.begin() + static_cast<long>((li + 1) * n_folds));
    point.mean_loglik =
        std::accumulate(point.fold_loglik.begin(), point.fold_loglik.end(), 0.0) /
        static_cast<double>(n_folds);
    result.curve.push_back(std::move(point));
  }
  result.best_lambda = select_best_lambda(result.curve);
  return result;
}

KlFit fit_kl_cv(const SurvivalDataset& data, const PriorModel& prior,
                Link link, const CvConfig& cfg, const FitOptions& opts) {
  KlFit out;
  out.cv = cv_select_lambda(data, prior, link, cfg, opts);
  out.model = fit_kl(data, prior, out.cv.best_lambda, link, opts);
  return out;
}

}  // namespace klsurv
