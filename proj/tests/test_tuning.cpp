#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "klsurv/sim.hpp"
#include "klsurv/tuning.hpp"
#include "oracles.hpp"

using namespace klsurv;

namespace {

PriorModel flat_prior(const CovariateSchema& schema, int tau) {
  PriorModel p;
  p.link = Link(LinkKind::logit);
  p.tau = tau;
  p.eta_hat = Eigen::VectorXd::Constant(tau, -1.5);
  for (const auto& n : schema.names()) p.coefficients.emplace_back(n, 0.0);
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("default lambda grid") {
  const auto g = default_lambda_grid();
  REQUIRE(g.size() == 21);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(0.01));
  CHECK(g[20] == doctest::Approx(10.0));
  for (std::size_t i = 2; i < g.size(); ++i) {
    CHECK(g[i] / g[i - 1] == doctest::Approx(g[2] / g[1]));
  }
}

TEST_CASE("fold assignment partitions subjects evenly within strata") {
  std::mt19937_64 gen(3);
  for (bool stratify : {true, false}) {
    for (int folds : {2, 5, 7}) {
      const auto data = testing::random_dataset(gen, 53, 4, 1);
      const auto a = assign_folds(data, folds, 17, stratify);
      REQUIRE(a.size() == data.size());
      std::map<std::pair<bool, int>, int> per_stratum;
      std::vector<int> sizes(static_cast<std::size_t>(folds), 0);
      for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i] >= 0);
        REQUIRE(a[i] < folds);
        ++sizes[static_cast<std::size_t>(a[i])];
        ++per_stratum[{stratify && data.subjects()[i].event, a[i]}];
      }
      CHECK(*std::max_element(sizes.begin(), sizes.end()) -
                *std::min_element(sizes.begin(), sizes.end()) <=
            1);
      for (bool ev : {false, true}) {
        int lo = 1 << 30, hi = 0;
        for (int f = 0; f < folds; ++f) {
          const int c = per_stratum[{ev, f}];
          lo = std::min(lo, c);
          hi = std::max(hi, c);
        }
        if (stratify || !ev) CHECK(hi - lo <= 1);
      }
      CHECK(assign_folds(data, folds, 17, stratify) == a);
    }
  }
}

TEST_CASE("singleton grid selects zero") {
  std::mt19937_64 gen(5);
  const auto data = testing::random_dataset(gen, 60, 3, 2);
  CvConfig cfg;
  cfg.lambda_grid = {0.0};
  cfg.threads = 1;
  const auto res = cv_select_lambda(data, flat_prior(data.schema(), 3), Link(LinkKind::logit), cfg);
  CHECK(res.best_lambda == 0.0);
  REQUIRE(res.curve.size() == 1);
  CHECK(res.curve[0].fold_loglik.size() == 5);
}

TEST_CASE("best lambda breaks exact ties toward the smaller value") {
  std::vector<CvPoint> curve{{0.0, -10.0, {}}, {0.5, -3.0, {}}, {1.0, -3.0, {}}, {2.0, -4.0, {}}};
  CHECK(select_best_lambda(curve) == 0.5);
  std::reverse(curve.begin(), curve.end());
  CHECK(select_best_lambda(curve) == 0.5);
}

TEST_CASE("CV curve is reproducible and independent of thread count") {
  std::mt19937_64 gen(7);
  const auto data = testing::random_dataset(gen, 80, 4, 2);
  const auto prior = flat_prior(data.schema(), 4);
  CvConfig cfg;
  cfg.lambda_grid = {0.0, 0.1, 1.0, 10.0};
  cfg.seed = 99;
  cfg.threads = 1;
  const auto a = cv_select_lambda(data, prior, Link(LinkKind::logit), cfg);
  cfg.threads = 4;
  const auto b = cv_select_lambda(data, prior, Link(LinkKind::logit), cfg);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].fold_loglik == b.curve[i].fold_loglik);
    CHECK(a.curve[i].mean_loglik == b.curve[i].mean_loglik);
  }
  CHECK(a.best_lambda == b.best_lambda);
  CHECK(a.fold_assignment == b.fold_assignment);
}

TEST_CASE("held-out score is the unweighted log-likelihood of the fold") {
  std::mt19937_64 gen(9);
  const auto data = testing::random_dataset(gen, 50, 3, 1);
  const auto prior = flat_prior(data.schema(), 3);
  CvConfig cfg;
  cfg.lambda_grid = {0.0, 2.0};
  cfg.folds = 3;
  cfg.threads = 1;
  const auto res = cv_select_lambda(data, prior, Link(LinkKind::logit), cfg);
  for (int f = 0; f < 3; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (res.fold_assignment[i] == f ? held : train).push_back(i);
    }
    const auto m = fit_kl(data.subset(train), prior, 2.0, Link(LinkKind::logit));
    CHECK(res.curve[1].fold_loglik[static_cast<std::size_t>(f)] ==
          doctest::Approx(evaluate(m, data.subset(held))).epsilon(1e-12));
  }
}

TEST_CASE("a fold without training events is reported") {
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < 10; ++i) {
    subjects.push_back({"s" + std::to_string(i), 1 + i % 2, i == 0, Eigen::VectorXd::Constant(1, i * 0.1)});
  }
  const SurvivalDataset data(CovariateSchema({"x"}), subjects, 2);
  CvConfig cfg;
  cfg.folds = 2;
  try {
    cv_select_lambda(data, flat_prior(data.schema(), 2), Link(LinkKind::logit), cfg);
    FAIL("expected DegenerateFoldError");
  } catch (const DegenerateFoldError& e) {
    const auto folds = assign_folds(data, 2, cfg.seed, true);
    CHECK(e.fold() == folds[0]);
  }
}

TEST_CASE("CV config validation") {
  CvConfig cfg;
  cfg.folds = 1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = {};
  cfg.lambda_grid = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.lambda_grid = {-1.0};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.lambda_grid = {};
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("CV prefers larger lambda when the prior is the generating model") {
  ScenarioConfig base;
  base.validate();
  const auto prior = study_prior(base);
  std::vector<double> same, reversed;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (Setting s : {Setting::a, Setting::c}) {
      Rng rng(derive_seed(1000, seed));
      const auto sm = make_setting(s, base.beta0);
      const auto data = generate_dataset(300, sm.beta_l, base.eta, 0.5, 10, 30, 10, rng);
      CvConfig cfg;
      cfg.seed = seed;
      cfg.threads = 1;
      const auto res = cv_select_lambda(data, prior, Link(LinkKind::logit), cfg);
      (s == Setting::a ? same : reversed).push_back(res.best_lambda);
    }
  }
  CHECK(median(same) > median(reversed));
  CHECK(std::count_if(reversed.begin(), reversed.end(), [](double l) { return l <= 0.1; }) >= 4);
}
