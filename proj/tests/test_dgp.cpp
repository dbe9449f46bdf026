#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tobart/dgp.hpp"

using namespace tobart;

TEST_CASE("mean surfaces") {
  Eigen::RowVectorXd x(30);
  x.setConstant(0.5);
  CHECK(friedman_mean(x) == doctest::Approx(14.5711).epsilon(1e-4));
  x.setZero();
  CHECK(jacobson_mean(x) == doctest::Approx(3.0).epsilon(1e-14));
  Eigen::RowVectorXd g(5);
  g << 2.0, 0.0, 0.0, 0.0, 0.0;
  CHECK(groot_mean(g) == doctest::Approx(0.0).epsilon(1e-14));
  // sigrist surface at an all-positive corner
  Eigen::RowVectorXd s(30);
  s.setConstant(1.0);
  CHECK(sigrist_mean(s) == doctest::Approx(5 * 0.3 + 6.0).epsilon(1e-12));
}

TEST_CASE("preset specs") {
  const auto friedman = make_dgp_spec("friedman");
  CHECK(friedman.censor_lower_pct == 15.0);
  CHECK(friedman.censor_upper_pct == 85.0);
  CHECK(friedman.p == 30);
  CHECK(friedman.n_train == 500);
  const auto oneside = make_dgp_spec("friedman-1side");
  CHECK(oneside.censor_lower_pct == 15.0);
  CHECK(oneside.censor_upper_pct < 0.0);
  const auto groot = make_dgp_spec("groot");
  CHECK(groot.censor_lower_pct == 40.0);
  const auto sigrist = make_dgp_spec("sigrist");
  CHECK(sigrist.censor_upper_pct == 95.0);
  CHECK(sigrist.censor_lower_pct < 0.0);
  const auto jacobson = make_dgp_spec("jacobson");
  CHECK(jacobson.censor_lower_pct == 25.0);
  const auto caron = make_dgp_spec("caron");
  CHECK(caron.causal);
  CHECK(caron.n_train == 200);
  CHECK(caron.p == 10);
  const auto nie = make_dgp_spec("nie-C");
  CHECK(nie.p == 12);
  CHECK_THROWS_AS(make_dgp_spec("unknown"), std::invalid_argument);
}

TEST_CASE("censoring thresholds are empirical order statistics") {
  for (const char* name : {"friedman", "groot", "sigrist", "jacobson"}) {
    const auto spec = make_dgp_spec(name);
    RngStream rng(5);
    const auto data = generate(spec, rng);
    const double n = static_cast<double>(spec.n_train);
    if (spec.censor_lower_pct >= 0.0) {
      const double frac = static_cast<double>(data.train.count(CensorStatus::kAtLower)) / n;
      CHECK(std::abs(frac - spec.censor_lower_pct / 100.0) <= 1.0 / n + 1e-12);
    }
    if (spec.censor_upper_pct >= 0.0) {
      const double frac = static_cast<double>(data.train.count(CensorStatus::kAtUpper)) / n;
      CHECK(std::abs(frac - (1.0 - spec.censor_upper_pct / 100.0)) <= 1.0 / n + 1e-12);
    }
    // test outcomes censored with the train thresholds
    for (std::size_t i = 0; i < data.test.y.size(); ++i) {
      const double y_star = data.y_star_test[static_cast<Eigen::Index>(i)];
      CHECK(data.test.y[i].y == data.test.bounds.censor(y_star));
    }
  }
}

TEST_CASE("zero error makes the observed outcome the censored mean surface") {
  auto spec = make_dgp_spec("friedman");
  spec.error_params.sigma = 0.0;
  RngStream rng(6);
  const auto data = generate(spec, rng);
  for (Eigen::Index i = 0; i < data.train.x.rows(); ++i) {
    const double f = friedman_mean(data.train.x.row(i));
    CHECK(data.train.y[static_cast<std::size_t>(i)].y == data.train.bounds.censor(f));
  }
}

TEST_CASE("caron covariates match the stated covariance") {
  auto spec = make_dgp_spec("caron");
  spec.n_train = 400000;  // entrywise 0.01 is ~4 MC standard errors here
  spec.n_test = 0;
  RngStream rng(7);
  const auto data = generate(spec, rng);
  const Eigen::MatrixXd centered =
      data.train.x.rowwise() - data.train.x.colwise().mean();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(spec.n_train - 1);
  for (int j = 0; j < 10; ++j) {
    for (int k = 0; k < 10; ++k) {
      const double want = std::pow(0.6, std::abs(j - k)) + (j != k ? 0.1 : 0.0);
      CHECK(std::abs(cov(j, k) - want) < 0.01);
    }
  }
}

TEST_CASE("nie and friedberg surfaces") {
  auto specA = make_dgp_spec("nie-A");
  RngStream rng(8);
  const auto dataA = generate(specA, rng);
  // treatment-centered outcome: with zero error, y* = mu + tau (z - 0.5)
  auto specC = make_dgp_spec("nie-C");
  specC.error_params.sigma = 0.0;
  const auto dataC = generate(specC, rng);
  for (int i = 0; i < 20; ++i) {
    const double z = dataC.t_train[static_cast<std::size_t>(i)] - 0.5;
    CHECK(dataC.y_star_train[i] ==
          doctest::Approx(dataC.mu_train[i] + dataC.tau_train[i] * z).epsilon(1e-12));
    CHECK(dataC.tau_train[i] == 1.0);
  }
  // friedberg tau at (1/3, 1/3) is (1 + 1/2)^2
  auto specF = make_dgp_spec("friedberg");
  specF.error_params.sigma = 0.0;
  const auto dataF = generate(specF, rng);
  for (int i = 0; i < dataF.train.x.rows(); ++i) {
    const double t1 = 1.0 + 1.0 / (1.0 + std::exp(-20.0 * (dataF.train.x(i, 0) - 1.0 / 3.0)));
    const double t2 = 1.0 + 1.0 / (1.0 + std::exp(-20.0 * (dataF.train.x(i, 1) - 1.0 / 3.0)));
    CHECK(dataF.tau_train[i] == doctest::Approx(t1 * t2).epsilon(1e-12));
    CHECK(dataF.mu_train[i] == 0.0);
  }
}

TEST_CASE("metrics") {
  Dataset test;
  test.x = Eigen::MatrixXd::Zero(4, 1);
  test.bounds = {0.0, kInf};
  test.y = {{0.0, CensorStatus::kAtLower},
            {0.0, CensorStatus::kAtLower},
            {1.0, CensorStatus::kInterior},
            {2.0, CensorStatus::kInterior}};
  Eigen::VectorXd y_star(4);
  y_star << -1.0, -0.5, 1.0, 2.0;

  SUBCASE("perfect probabilities") {
    TestPredictions pred;
    pred.outcome_mean.resize(4);
    pred.outcome_mean << 0.0, 0.0, 1.0, 2.0;
    pred.p_censored.resize(4);
    pred.p_censored << 1.0, 1.0, 0.0, 0.0;
    const auto m = compute_metrics(pred, test, y_star);
    CHECK(m.mse == 0.0);
    CHECK(m.brier == 0.0);
    CHECK(m.auc == 1.0);
  }
  SUBCASE("coin-flip probabilities") {
    TestPredictions pred;
    pred.outcome_mean = Eigen::VectorXd::Zero(4);
    pred.p_censored = Eigen::VectorXd::Constant(4, 0.5);
    const auto m = compute_metrics(pred, test, y_star);
    CHECK(m.brier == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(m.auc == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("rank AUC on the worked example") {
    Eigen::VectorXd scores(4);
    scores << 0.9, 0.8, 0.2, 0.1;
    CHECK(rank_auc(scores, {1, 1, 0, 0}) == 1.0);
    CHECK(rank_auc(scores, {0, 0, 1, 1}) == 0.0);
  }
  SUBCASE("alignment mismatch rejected") {
    TestPredictions pred;
    pred.outcome_mean = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(compute_metrics(pred, test, y_star), std::invalid_argument);
  }
}

TEST_CASE("replicate determinism and the linear-Tobit paper value") {
  ExperimentSpec spec;
  spec.dgp = make_dgp_spec("jacobson");
  spec.methods = {"linear-tobit"};
  spec.repetitions = 5;
  spec.seed = 99;
  const auto a = replicate(spec);
  const auto b = replicate(spec);
  CHECK(a.table() == b.table());
  // paper Table 1: linear Tobit on the jacobson DGP, sigma = 1
  CHECK(a.mean_metrics[0].mse == doctest::Approx(0.694).epsilon(0.15));

  ExperimentSpec bad = spec;
  bad.methods = {"no-such-method"};
  CHECK_THROWS_AS(replicate(bad), std::invalid_argument);
}
