#include "doctest.h"

#include <cmath>

#include "klsurv/fit.hpp"
#include "klsurv/sim.hpp"

using namespace klsurv;

TEST_CASE("AR1 covariance") {
  const auto s2 = ar1_covariance(2, 0.5);
  CHECK(s2(0, 0) == 1.0);
  CHECK(s2(0, 1) == 0.5);
  CHECK(s2(1, 0) == 0.5);
  const auto s3 = ar1_covariance(3, 0.5);
  CHECK(s3(0, 1) == 0.5);
  CHECK(s3(1, 2) == 0.5);
  CHECK(s3(0, 2) == 0.25);
  CHECK(ar1_covariance(4, 0.0).isIdentity(0.0));
}

TEST_CASE("covariates follow the AR1 normal law") {
  Rng rng(1);
  const auto x = gen_covariates(100000, 3, 0.5, rng);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (x.rows() - 1.0);
  CHECK((cov - ar1_covariance(3, 0.5)).cwiseAbs().maxCoeff() < 0.02);
  CHECK(x.colwise().mean().cwiseAbs().maxCoeff() < 0.02);

  Rng rng0(2);
  const auto y = gen_covariates(100000, 3, 0.0, rng0);
  const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
  const Eigen::MatrixXd ycov = yc.transpose() * yc / (y.rows() - 1.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(std::abs(ycov(i, j) / std::sqrt(ycov(i, i) * ycov(j, j))) < 0.02);
    }
  }
}

TEST_CASE("covariate generation is deterministic given the seed") {
  Rng a(42), b(42);
  const auto x = gen_covariates(50, 4, 0.5, a);
  const auto y = gen_covariates(50, 4, 0.5, b);
  CHECK((x.array() == y.array()).all());
}

TEST_CASE("event times follow the discrete hazard law") {
  Rng rng(3);
  const int n = 100000;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 2);
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd eta = Eigen::VectorXd::Constant(4, std::log(0.3 / 0.7));
  const auto t = gen_event_times(x, beta, eta, 4, rng);
  std::vector<int> counts(6, 0);
  for (const auto& v : t) ++counts[v ? static_cast<std::size_t>(*v) : 5];
  CHECK(std::abs(counts[1] / double(n) - 0.3) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 0.21) < 0.01);
  CHECK(std::abs(counts[3] / double(n) - 0.147) < 0.01);
  CHECK(std::abs(counts[5] / double(n) - std::pow(0.7, 4)) < 0.01);
}

TEST_CASE("event-time extremes") {
  Rng rng(4);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(200, 1);
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
  const auto none = gen_event_times(x, beta, Eigen::VectorXd::Constant(10, -30.0), 10, rng);
  for (const auto& v : none) CHECK_FALSE(v.has_value());
  const auto all = gen_event_times(x, beta, Eigen::VectorXd::Constant(10, 30.0), 10, rng);
  for (const auto& v : all) CHECK(v == 1);
  CHECK_THROWS_AS(gen_event_times(x, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(10), 10, rng),
                  DimensionError);
}

TEST_CASE("censoring is uniform then truncated") {
  CHECK(truncate_censoring(15, 10) == 10);
  CHECK(truncate_censoring(3, 10) == 3);
  Rng rng(5);
  const auto c = gen_censoring(100000, 30, 10, rng);
  int at_admin = 0, low = 0;
  for (int v : c) {
    CHECK(v >= 1);
    CHECK(v <= 10);
    at_admin += v == 10;
    low += v == 1;
  }
  CHECK(std::abs(at_admin / 100000.0 - 0.7) < 0.01);
  CHECK(std::abs(low / 100000.0 - 1.0 / 30.0) < 0.005);
}

TEST_CASE("setting transformations") {
  Eigen::VectorXd b2(2);
  b2 << 1.0, -2.0;
  const auto sb = make_setting(Setting::b, b2);
  CHECK(sb.beta_l[0] == 0.5);
  CHECK(sb.beta_l[1] == -1.0);
  CHECK(sb.local_p == 2);

  Eigen::VectorXd b3(3);
  b3 << 1.0, -2.0, 3.0;
  const auto sc = make_setting(Setting::c, b3);
  CHECK(sc.beta_l[0] == 3.0);
  CHECK(sc.beta_l[1] == -2.0);
  CHECK(sc.beta_l[2] == 1.0);

  const auto sd = make_setting(Setting::d, b2);
  REQUIRE(sd.local_p == 4);
  CHECK(sd.beta_l[0] == 1.0);
  CHECK(sd.beta_l[1] == -2.0);
  CHECK(sd.beta_l[2] == doctest::Approx(0.2));
  CHECK(sd.beta_l[3] == doctest::Approx(-0.4));

  CHECK(make_setting(Setting::a, b2).beta_l == b2);
  CHECK(make_setting(Setting::e, b2).beta_l[3] == -1.0);
  CHECK(make_setting(Setting::f, b2).beta_l[3] == -2.0);
  CHECK(parse_setting("e") == Setting::e);
  CHECK_THROWS_AS(parse_setting("g"), InputError);
}

TEST_CASE("generated datasets respect the observation scheme") {
  ScenarioConfig cfg;
  cfg.validate();
  Rng rng(6);
  const auto sm = make_setting(Setting::f, cfg.beta0);
  const auto data = generate_dataset(500, sm.beta_l, cfg.eta, cfg.rho, cfg.tau, cfg.censor_max,
                                     cfg.admin_censor, rng);
  CHECK(data.schema().size() == 20);
  CHECK(data.tau() == 10);
  for (const auto& s : data.subjects()) {
    CHECK(s.observed_time >= 1);
    CHECK(s.observed_time <= cfg.admin_censor);
  }
  const double frac = static_cast<double>(data.event_count()) / data.size();
  CHECK(frac > 0.1);
  CHECK(frac < 0.9);
}

TEST_CASE("study prior pads the new covariates with zeros") {
  ScenarioConfig cfg;
  cfg.setting = Setting::e;
  cfg.validate();
  const auto prior = study_prior(cfg);
  CHECK(prior.coefficients.size() == 10);
  const auto v = align_prior(prior, simulation_schema(20));
  CHECK(v.head(10) == cfg.beta0);
  CHECK(v.tail(10).isZero(0.0));
  CHECK(cfg.eta.size() == 10);
  CHECK(cfg.eta[3] == doctest::Approx(std::log(0.08 / 0.92)));
}

TEST_CASE("scenario validation") {
  ScenarioConfig cfg;
  cfg.rho = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = {};
  cfg.n_local = 3;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = {};
  cfg.admin_censor = 40;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("study output is deterministic and independent of thread count") {
  ScenarioConfig cfg;
  cfg.setting = Setting::d;
  cfg.replications = 3;
  cfg.seed = 5;
  cfg.lambda_grid = {0.0, 0.1, 1.0, 10.0};
  cfg.threads = 1;
  const auto a = run_study(cfg);
  cfg.threads = 3;
  const auto b = run_study(cfg);
  REQUIRE(a.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.records[i].ok());
    CHECK(a.records[i].loglik_kl == b.records[i].loglik_kl);
    CHECK(a.records[i].loglik_prior == b.records[i].loglik_prior);
    CHECK(a.records[i].loglik_local == b.records[i].loglik_local);
    CHECK(a.records[i].selected_lambda == b.records[i].selected_lambda);
  }
  CHECK(a.summary.completed == 3);
  CHECK(a.summary.kl.mean == b.summary.kl.mean);
}

TEST_CASE("replicates record failures instead of aborting") {
  ScenarioConfig cfg;
  cfg.replications = 2;
  cfg.eta = Eigen::VectorXd::Constant(10, -40.0);  // no events at all
  cfg.lambda_grid = {0.0};
  cfg.threads = 1;
  const auto res = run_study(cfg);
  CHECK(res.summary.failed == 2);
  CHECK_FALSE(res.records[0].error.empty());
}

TEST_CASE("summary statistics") {
  std::vector<ReplicationRecord> recs(3);
  recs[0].loglik_kl = -3;
  recs[1].loglik_kl = -1;
  recs[2].loglik_kl = -2;
  recs[0].selected_lambda = 0.0;
  recs[1].selected_lambda = 0.05;
  recs[2].selected_lambda = 5.0;
  const auto s = summarize(Setting::c, recs);
  CHECK(s.kl.mean == doctest::Approx(-2.0));
  CHECK(s.kl.median == -2.0);
  CHECK(s.lambda_median == 0.05);
  CHECK(s.lambda_small_fraction == doctest::Approx(2.0 / 3.0));
}
