#include "doctest.h"

#include <algorithm>
#include <random>

#include "klsurv/fit.hpp"
#include "klsurv/prior.hpp"
#include "oracles.hpp"

using namespace klsurv;

namespace {

PriorModel make_prior(std::vector<std::pair<std::string, double>> coef, int tau = 3,
                      double eta = 0.0, LinkKind kind = LinkKind::logit) {
  PriorModel p;
  p.link = Link(kind);
  p.tau = tau;
  p.eta_hat = Eigen::VectorXd::Constant(tau, eta);
  p.coefficients = std::move(coef);
  p.label = "test";
  return p;
}

}  // namespace

TEST_CASE("align_prior zero-pads missing covariates") {
  const auto v = align_prior(make_prior({{"a", 1.0}, {"b", -0.5}}),
                             CovariateSchema({"a", "b", "c", "d"}));
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == -0.5);
  CHECK(v[2] == 0.0);
  CHECK(v[3] == 0.0);

  const auto empty = align_prior(make_prior({}), CovariateSchema({"a", "b"}));
  CHECK(empty.size() == 2);
  CHECK(empty.isZero(0.0));
}

TEST_CASE("align_prior rejects covariates missing from the local schema") {
  try {
    align_prior(make_prior({{"z", 1.0}}), CovariateSchema({"a", "b"}));
    FAIL("expected UnknownCovariateError");
  } catch (const UnknownCovariateError& e) {
    CHECK(e.names() == std::vector<std::string>{"z"});
  }
}

TEST_CASE("align_prior commutes with schema permutations") {
  const auto prior = make_prior({{"c", 3.0}, {"a", 1.0}});
  std::vector<std::string> names{"a", "b", "c", "d"};
  const auto base = align_prior(prior, CovariateSchema(names));
  std::vector<std::size_t> perm{0, 1, 2, 3};
  do {
    std::vector<std::string> permuted;
    for (auto i : perm) permuted.push_back(names[i]);
    const auto v = align_prior(prior, CovariateSchema(permuted));
    for (std::size_t j = 0; j < perm.size(); ++j) {
      CHECK(v[static_cast<Eigen::Index>(j)] == base[static_cast<Eigen::Index>(perm[j])]);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("prior_predictions values") {
  const CovariateSchema schema({"x"});
  const SurvivalDataset data(schema, {{"s", 2, true, Eigen::VectorXd::Ones(1)}}, 2);
  const auto table = expand_person_period(data);

  const auto flat = prior_predictions(make_prior({}, 2, 0.0), table, schema);
  CHECK((flat.array() == 0.5).all());

  const auto shifted = prior_predictions(make_prior({{"x", 1.0}}, 2, -1.0), table, schema);
  CHECK(shifted[0] == doctest::Approx(0.5));
}

TEST_CASE("prior_predictions recompute the linear predictor through the prior link") {
  std::mt19937_64 gen(4);
  for (LinkKind kind : {LinkKind::logit, LinkKind::log, LinkKind::cloglog}) {
    const auto data = testing::random_dataset(gen, 10, 4, 2);
    const auto table = expand_person_period(data);
    PriorModel prior = make_prior({{"v2", 0.2}, {"v1", -0.1}}, 5, 0.0, kind);
    prior.eta_hat << -2.0, -1.5, -1.2, -2.5, -3.0;
    const auto preds = prior_predictions(prior, table, data.schema());
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto x = table.covariates.row(static_cast<Eigen::Index>(r));
      const double lp = prior.eta_hat[table.period[r] - 1] - 0.1 * x[0] + 0.2 * x[1];
      CHECK(preds[static_cast<Eigen::Index>(r)] ==
            doctest::Approx(testing::ref_inverse_link(kind, lp)).epsilon(1e-13));
      CHECK(preds[static_cast<Eigen::Index>(r)] > 0.0);
      CHECK(preds[static_cast<Eigen::Index>(r)] < 1.0);
    }
  }
}

TEST_CASE("prior_predictions is a row-wise function") {
  std::mt19937_64 gen(8);
  const auto data = testing::random_dataset(gen, 8, 3, 2);
  PriorModel prior = make_prior({{"v1", 0.4}}, 3, -1.0);
  const auto table = expand_person_period(data);
  const auto preds = prior_predictions(prior, table, data.schema());

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  const auto reversed = expand_person_period(data.subset(order));
  const auto rpreds = prior_predictions(prior, reversed, data.schema());
  for (std::size_t r = 0; r < reversed.rows(); ++r) {
    const auto orig_subject = order[reversed.subject[r]];
    for (std::size_t q = 0; q < table.rows(); ++q) {
      if (table.subject[q] == orig_subject && table.period[q] == reversed.period[r]) {
        CHECK(rpreds[static_cast<Eigen::Index>(r)] == preds[static_cast<Eigen::Index>(q)]);
      }
    }
  }
}

TEST_CASE("prior_predictions checks the horizon") {
  const CovariateSchema schema({"x"});
  const SurvivalDataset data(schema, {{"s", 3, true, Eigen::VectorXd::Ones(1)}}, 3);
  const auto table = expand_person_period(data);
  CHECK_THROWS_AS(prior_predictions(make_prior({}, 2), table, schema), TauMismatchError);
  CHECK_NOTHROW(prior_predictions(make_prior({}, 5), table, schema));
  CHECK_THROWS_AS(prior_predictions(make_prior({{"q", 1.0}}, 3), table, schema), AlignmentError);
}

TEST_CASE("prior matching a fitted model reproduces its hazards") {
  std::mt19937_64 gen(12);
  const auto data = testing::random_dataset(gen, 40, 3, 2);
  const auto model = fit_local(data, Link(LinkKind::logit));
  PriorModel prior = make_prior({{"v1", model.params.beta[0]}, {"v2", model.params.beta[1]}}, 3);
  prior.eta_hat = model.params.eta;
  const auto table = expand_person_period(data);
  const auto preds = prior_predictions(prior, table, data.schema());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const Eigen::VectorXd x = table.covariates.row(static_cast<Eigen::Index>(r)).transpose();
    const double h = predict_hazard(model, x)[table.period[r] - 1];
    CHECK(std::abs(preds[static_cast<Eigen::Index>(r)] - h) <= 1e-12);
  }
}

TEST_CASE("prior validation") {
  PriorModel p = make_prior({{"a", 1.0}, {"a", 2.0}});
  CHECK_THROWS_AS(p.validate(), InputError);
  p = make_prior({});
  p.eta_hat[0] = NAN;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = make_prior({});
  p.tau = 4;
  CHECK_THROWS_AS(p.validate(), InputError);
}
