#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tobart/chain.hpp"
#include "tobart/dgp.hpp"
#include "tobart/stats.hpp"

using namespace tobart;

TEST_CASE("draw_latent") {
  RngStream rng(1);
  const CensoringBounds bounds{0.0, kInf};

  SUBCASE("interior values pass through") {
    CHECK(draw_latent(rng, {3.2, CensorStatus::kInterior}, 0.0, 0.0, 1.0, bounds) == 3.2);
  }
  SUBCASE("at-lower draws live below the bound") {
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = draw_latent(rng, {0.0, CensorStatus::kAtLower}, 0.0, 0.0, 1.0, bounds);
      CHECK(d <= 0.0);
      sum += d;
    }
    CHECK(sum / n == doctest::Approx(-0.7978846).epsilon(0.004));
  }
  SUBCASE("at-upper with the mean far above the bound") {
    const CensoringBounds b2{-kInf, 0.0};
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = draw_latent(rng, {0.0, CensorStatus::kAtUpper}, 5.0, 0.0, 1.0, b2);
      CHECK(d > 0.0);
      sum += d;
    }
    CHECK(sum / n == doctest::Approx(5.0).epsilon(0.002));
  }
  SUBCASE("inconsistent status rejected") {
    CHECK_THROWS_AS(draw_latent(rng, {1.0, CensorStatus::kAtLower}, 0.0, 0.0, 1.0, bounds),
                    std::domain_error);
    CHECK_THROWS_AS(draw_latent(rng, {-1.0, CensorStatus::kInterior}, 0.0, 0.0, 1.0, bounds),
                    std::domain_error);
  }
}

TEST_CASE("draw_sigma2") {
  RngStream rng(2);
  SUBCASE("prior reduction at n=0") {
    const double nu = 6.0, lambda = 2.0;
    const int reps = 200000;
    std::vector<double> draws(reps);
    for (int i = 0; i < reps; ++i)
      draws[static_cast<std::size_t>(i)] = draw_sigma2(rng, Eigen::VectorXd(), nu, lambda);
    // sigma^2 ~ IG(nu/2, nu lambda/2): mean = nu lambda / (nu - 2)
    CHECK(oracles::sample_mean(draws) == doctest::Approx(nu * lambda / (nu - 2.0)).epsilon(0.02));
  }
  SUBCASE("posterior mean with data") {
    Eigen::VectorXd resid = Eigen::VectorXd::Ones(1000);  // SSR = 1000
    const int reps = 100000;
    double sum = 0.0;
    for (int i = 0; i < reps; ++i) sum += draw_sigma2(rng, resid, 3.0, 1.0);
    CHECK(sum / reps == doctest::Approx(1003.0 / 1001.0).epsilon(0.003));
  }
  SUBCASE("invalid hyperparameters") {
    CHECK_THROWS_AS(draw_sigma2(rng, Eigen::VectorXd(), 3.0, -1.0), std::domain_error);
    CHECK_THROWS_AS(draw_sigma2(rng, Eigen::VectorXd(), 0.0, 1.0), std::domain_error);
  }
}

namespace {

Dataset friedman_uncensored(int n, int p, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset data;
  data.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) data.x(i, j) = rng.uniform();
  data.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = friedman_mean(data.x.row(i));
    data.y[static_cast<std::size_t>(i)] = {f + rng.normal(), CensorStatus::kInterior};
  }
  return data;
}

}  // namespace

TEST_CASE("plain BART smoke benchmark on uncensored Friedman data") {
  const Dataset data = friedman_uncensored(500, 10, 77);
  ChainConfig cfg;
  cfg.burn_in = 1000;
  cfg.draws = 1000;
  cfg.seed = 5;
  const PosteriorDraws draws = fit_tobart(data, cfg, Eigen::MatrixXd());

  Eigen::VectorXd mean_f = Eigen::VectorXd::Zero(data.n());
  for (const auto& f : draws.f_train) mean_f += f;
  mean_f /= static_cast<double>(draws.f_train.size());
  double sse = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double d = Eigen::VectorXd(mean_f)[i] - data.y[static_cast<std::size_t>(i)].y;
    sse += d * d;
  }
  const double rmse = std::sqrt(sse / static_cast<double>(data.n()));
  CHECK(rmse < 1.5);
}

TEST_CASE("all-interior data keeps the latent draw an identity") {
  const Dataset data = friedman_uncensored(60, 4, 3);
  ChainConfig cfg;
  cfg.burn_in = 0;
  cfg.draws = 1;
  cfg.m = 10;
  const auto calib = calibrate(data, default_calibration(false));
  TobitChain chain(data, cfg, calib);
  RngStream rng(4);
  for (int it = 0; it < 25; ++it) {
    chain.step(rng);
    for (Eigen::Index i = 0; i < data.n(); ++i)
      CHECK(chain.latent()[i] ==
            data.y[static_cast<std::size_t>(i)].y - chain.center());
  }
}

TEST_CASE("latent consistency invariant under censoring") {
  RngStream gen(9);
  Dataset data;
  const int n = 80;
  data.x.resize(n, 3);
  data.y.resize(static_cast<std::size_t>(n));
  data.bounds = {-0.5, 1.5};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) data.x(i, j) = gen.uniform();
    const double y_star = 2.0 * data.x(i, 0) - 0.5 + 0.7 * gen.normal();
    data.y[static_cast<std::size_t>(i)] = observe(y_star, data.bounds);
  }
  REQUIRE(data.count(CensorStatus::kAtLower) > 0);
  REQUIRE(data.count(CensorStatus::kAtUpper) > 0);

  ChainConfig cfg;
  cfg.m = 20;
  const auto calib = calibrate(data, default_calibration(false));
  TobitChain chain(data, cfg, calib);
  RngStream rng(10);
  const double a_c = data.bounds.a - chain.center();
  const double b_c = data.bounds.b - chain.center();
  for (int it = 0; it < 40; ++it) {
    chain.step(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& o = data.y[static_cast<std::size_t>(i)];
      switch (o.status) {
        case CensorStatus::kInterior:
          CHECK(chain.latent()[i] == o.y - chain.center());
          break;
        case CensorStatus::kAtLower:
          CHECK(chain.latent()[i] <= a_c);
          break;
        case CensorStatus::kAtUpper:
          CHECK(chain.latent()[i] >= b_c);
          break;
      }
    }
  }
}

TEST_CASE("fixed seed reproduces the posterior draws exactly") {
  RngStream gen(11);
  Dataset data;
  const int n = 60;
  data.x.resize(n, 3);
  data.y.resize(static_cast<std::size_t>(n));
  data.bounds = {0.0, kInf};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) data.x(i, j) = gen.uniform();
    data.y[static_cast<std::size_t>(i)] =
        observe(data.x(i, 0) + 0.5 * gen.normal(), data.bounds);
  }
  ChainConfig cfg;
  cfg.burn_in = 50;
  cfg.draws = 50;
  cfg.m = 25;
  cfg.seed = 123;
  cfg.stream_id = 2;
  Eigen::MatrixXd test_x = data.x.topRows(10);
  const auto a = fit_tobart(data, cfg, test_x);
  const auto b = fit_tobart(data, cfg, test_x);
  REQUIRE(a.size() == b.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    CHECK(a.sigma[d] == b.sigma[d]);
    for (Eigen::Index i = 0; i < test_x.rows(); ++i) CHECK(a.f_test[d][i] == b.f_test[d][i]);
  }
}

TEST_CASE("degenerate and invalid inputs are refused") {
  Dataset data;
  data.x = Eigen::MatrixXd::Random(20, 2);
  data.bounds = {0.0, kInf};
  data.y.assign(20, {0.0, CensorStatus::kAtLower});  // every row censored
  ChainConfig cfg;
  CalibratedPriors calib;
  CHECK_THROWS_WITH_AS(run_chain(data, cfg, calib, Eigen::MatrixXd()),
                       doctest::Contains("degenerate"), std::invalid_argument);

  Dataset small = data;
  small.x = Eigen::MatrixXd::Random(5, 2);
  small.y.assign(5, {1.0, CensorStatus::kInterior});
  CHECK_THROWS_AS(run_chain(small, cfg, calib, Eigen::MatrixXd()), std::invalid_argument);

  Dataset nonfinite = data;
  nonfinite.y.assign(20, {1.0, CensorStatus::kInterior});
  nonfinite.x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(run_chain(nonfinite, cfg, calib, Eigen::MatrixXd()), std::invalid_argument);
}

TEST_CASE("stump chain matches the reference intercept-only Tobit sampler") {
  // n=20 with one censored row; m=1 forced stump, fixed hyperparameters
  RngStream gen(21);
  Dataset data;
  const int n = 20;
  data.x.resize(n, 2);
  data.y.resize(static_cast<std::size_t>(n));
  data.bounds = {-1.0, kInf};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) data.x(i, j) = gen.uniform();
    double y_star = -2.0;  // row 0 censored, the rest drawn interior
    if (i > 0)
      do {
        y_star = 0.2 + gen.normal();
      } while (y_star <= data.bounds.a);
    data.y[static_cast<std::size_t>(i)] = observe(y_star, data.bounds);
  }
  REQUIRE(data.count(CensorStatus::kAtLower) == 1);

  ChainConfig cfg;
  cfg.m = 1;
  cfg.forest.min_leaf = 1000;  // no topology moves: stump forever
  cfg.burn_in = 2000;
  cfg.draws = 50000;
  cfg.thin = 5;
  cfg.seed = 31;
  CalibratedPriors calib;
  calib.center = 0.0;
  calib.nu = 3.0;
  calib.lambda = 0.8;
  calib.sigma_hat = 1.0;

  const auto draws = run_chain(data, cfg, calib, Eigen::MatrixXd());
  std::vector<double> mu_chain, s2_chain;
  for (std::size_t d = 0; d < draws.size(); ++d) {
    mu_chain.push_back(draws.f_train[d][5]);  // stump: same value at every row
    s2_chain.push_back(draws.sigma[d] * draws.sigma[d]);
  }

  // the chain's leaf prior sd is set from the observed range
  TobitChain probe(data, cfg, calib);
  const double sigma_mu = probe.forest().sigma_mu;
  const auto ref = oracles::reference_intercept_tobit(data.y, data.bounds, sigma_mu, calib.nu,
                                                      calib.lambda, 2000, 10000, 5, 99);
  const double p_mu = oracles::ks_test_two_sample(mu_chain, ref.mu);
  const double p_s2 = oracles::ks_test_two_sample(s2_chain, ref.sigma2);
  CHECK(p_mu > 0.01);
  CHECK(p_s2 > 0.01);
}

TEST_CASE("successive-conditional simulation reproduces the sigma^2 prior") {
  // Geweke-style check: re-simulate the data from the model each iteration;
  // the stationary marginal of sigma^2 is then its prior.
  RngStream gen(41);
  const int n = 30;
  Dataset data;
  data.x.resize(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) data.x(i, j) = gen.uniform();
  data.bounds = {0.0, kInf};
  data.y.assign(static_cast<std::size_t>(n), {0.5, CensorStatus::kInterior});

  ChainConfig cfg;
  cfg.m = 5;
  cfg.forest.min_leaf = 5;
  CalibratedPriors calib;
  calib.center = 0.0;
  calib.nu = 10.0;
  calib.lambda = 0.9;
  calib.sigma_hat = 1.0;
  TobitChain chain(data, cfg, calib);

  RngStream rng(43);
  const int total = 30000;
  const int burn = 2000;
  std::vector<double> s2, prec;
  for (int it = 0; it < total; ++it) {
    // data | params
    std::vector<ObservedOutcome> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double y_star = chain.forest().fitted[i] + chain.sigma() * rng.normal();
      y[static_cast<std::size_t>(i)] = observe(y_star, data.bounds);
    }
    bool interior = false;
    for (const auto& o : y)
      if (o.status == CensorStatus::kInterior) interior = true;
    if (interior) chain.set_outcomes(y);  // keep the chain's data valid
    // params | data
    chain.step(rng);
    if (it >= burn) {
      s2.push_back(chain.sigma() * chain.sigma());
      prec.push_back(1.0 / (chain.sigma() * chain.sigma()));
    }
  }
  // prior: sigma^2 ~ IG(nu/2, nu lambda/2)
  const double want_mean_s2 = calib.nu * calib.lambda / (calib.nu - 2.0);
  const double want_mean_prec = 1.0 / calib.lambda;
  const double se_s2 = oracles::batch_means_se(s2);
  const double se_prec = oracles::batch_means_se(prec);
  CHECK(std::abs(oracles::sample_mean(s2) - want_mean_s2) < 3.0 * se_s2);
  CHECK(std::abs(oracles::sample_mean(prec) - want_mean_prec) < 3.0 * se_prec);
}
