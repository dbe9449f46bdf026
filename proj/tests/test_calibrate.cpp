#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tobart/calibrate.hpp"
#include "tobart/stats.hpp"

using namespace tobart;

namespace {

Dataset make_data(int n, int p, const CensoringBounds& bounds, std::uint64_t seed,
                  double mu = 0.0, double sigma = 1.0) {
  RngStream rng(seed);
  Dataset d;
  d.bounds = bounds;
  d.x.resize(n, p);
  d.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.uniform();
    d.y[static_cast<std::size_t>(i)] = observe(mu + sigma * rng.normal(), bounds);
  }
  return d;
}

}  // namespace

TEST_CASE("sigma-hat estimators") {
  SUBCASE("cens reduces to the normal MLE without censoring") {
    const Dataset d = make_data(4000, 2, CensoringBounds{}, 1, 0.7, 1.3);
    const auto res = estimate_sigma_hat(d, SigmaHatMethod::kCens);
    // normal MLE sd (denominator n)
    double mean = 0.0;
    for (const auto& o : d.y) mean += o.y;
    mean /= static_cast<double>(d.y.size());
    double ss = 0.0;
    for (const auto& o : d.y) ss += (o.y - mean) * (o.y - mean);
    const double mle_sd = std::sqrt(ss / static_cast<double>(d.y.size()));
    CHECK(res.value == doctest::Approx(mle_sd).epsilon(1e-4));
    CHECK(!res.fell_back);
  }
  SUBCASE("censored-normal MLE recovers the truth at scale") {
    const Dataset d = make_data(100000, 1, CensoringBounds{0.0, kInf}, 2, 0.0, 1.0);
    const auto res = estimate_sigma_hat(d, SigmaHatMethod::kCens);
    CHECK(res.value == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("naive SD on the same data is biased low") {
    const Dataset d = make_data(100000, 1, CensoringBounds{0.0, kInf}, 2, 0.0, 1.0);
    const auto res = estimate_sigma_hat(d, SigmaHatMethod::kNaive);
    // sd of max(Z, 0): sqrt(1/2 - phi(0)^2)
    const double want = std::sqrt(0.5 - 0.3989422804 * 0.3989422804);
    CHECK(res.value == doctest::Approx(want).epsilon(0.02));
  }
  SUBCASE("lm method uses OLS residuals") {
    RngStream rng(3);
    Dataset d;
    const int n = 5000;
    d.x.resize(n, 1);
    d.y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      d.x(i, 0) = rng.uniform();
      d.y[static_cast<std::size_t>(i)] = {2.0 * d.x(i, 0) + 0.5 * rng.normal(),
                                          CensorStatus::kInterior};
    }
    const auto res = estimate_sigma_hat(d, SigmaHatMethod::kLm);
    CHECK(res.value == doctest::Approx(0.5).epsilon(0.05));
    // the naive method ignores the regression structure entirely
    const auto naive = estimate_sigma_hat(d, SigmaHatMethod::kNaive);
    CHECK(naive.value > res.value);
  }
}

TEST_CASE("linear Tobit MLE") {
  SUBCASE("no censoring reduces to OLS") {
    RngStream rng(4);
    const int n = 400;
    Eigen::MatrixXd x(n, 2);
    std::vector<ObservedOutcome> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform();
      x(i, 1) = rng.normal();
      y[static_cast<std::size_t>(i)] = {1.0 + 2.0 * x(i, 0) - 0.7 * x(i, 1) + 0.4 * rng.normal(),
                                        CensorStatus::kInterior};
    }
    const auto fit = fit_linear_tobit(x, y, CensoringBounds{});
    CHECK(fit.converged);
    Eigen::MatrixXd design(n, 3);
    design.col(0).setOnes();
    design.rightCols(2) = x;
    Eigen::VectorXd yv(n);
    for (int i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)].y;
    const Eigen::VectorXd ols = design.colPivHouseholderQr().solve(yv);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.beta[j] - ols[j]) < 1e-6);
  }
  SUBCASE("recovers the Jacobson coefficients under censoring") {
    RngStream rng(5);
    const int n = 20000;
    Eigen::MatrixXd x(n, 5);
    Eigen::VectorXd y_star(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 5; ++j) x(i, j) = rng.uniform();
      y_star[i] = 3.0 + 5.0 * x(i, 0) + x(i, 1) + 0.5 * x(i, 2) - 2.0 * x(i, 3) +
                  0.1 * x(i, 4) + rng.normal();
    }
    // censor from below at the 25th percentile
    std::vector<double> sorted(y_star.begin(), y_star.end());
    std::sort(sorted.begin(), sorted.end());
    const CensoringBounds bounds{sorted[n / 4], kInf};
    std::vector<ObservedOutcome> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = observe(y_star[i], bounds);

    const auto fit = fit_linear_tobit(x, y, bounds);
    CHECK(fit.converged);
    const double want[6] = {3.0, 5.0, 1.0, 0.5, -2.0, 0.1};
    for (int j = 0; j < 6; ++j) CHECK(std::abs(fit.beta[j] - want[j]) < 0.05);
    CHECK(fit.sigma == doctest::Approx(1.0).epsilon(0.03));
  }
  SUBCASE("intercept-only on uncensored data is the sample mean") {
    RngStream rng(6);
    const int n = 500;
    std::vector<ObservedOutcome> y(static_cast<std::size_t>(n));
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = {2.0 + rng.normal(), CensorStatus::kInterior};
      mean += y[static_cast<std::size_t>(i)].y;
    }
    mean /= n;
    const auto fit = fit_linear_tobit(Eigen::MatrixXd(n, 0), y, CensoringBounds{});
    CHECK(fit.converged);
    CHECK(std::abs(fit.beta[0] - mean) < 1e-6);
  }
  SUBCASE("rank-deficient design rejected") {
    RngStream rng(7);
    const int n = 100;
    Eigen::MatrixXd x(n, 2);
    std::vector<ObservedOutcome> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform();
      x(i, 1) = 2.0 * x(i, 0);  // collinear
      y[static_cast<std::size_t>(i)] = {rng.normal(), CensorStatus::kInterior};
    }
    CHECK_THROWS_AS(fit_linear_tobit(x, y, CensoringBounds{}), std::invalid_argument);
  }
  SUBCASE("finite-difference gradient vanishes at the optimum") {
    RngStream rng(8);
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 150 + static_cast<int>(rng.uniform_index(100));
      const int p = 1 + static_cast<int>(rng.uniform_index(3));
      Eigen::MatrixXd x(n, p);
      Eigen::VectorXd y_star(n);
      for (int i = 0; i < n; ++i) {
        double f = 0.5;
        for (int j = 0; j < p; ++j) {
          x(i, j) = rng.normal();
          f += (j + 1) * 0.4 * x(i, j);
        }
        y_star[i] = f + 0.8 * rng.normal();
      }
      std::vector<double> sorted(y_star.begin(), y_star.end());
      std::sort(sorted.begin(), sorted.end());
      const CensoringBounds bounds{sorted[n / 5], kInf};
      std::vector<ObservedOutcome> y(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = observe(y_star[i], bounds);
      const auto fit = fit_linear_tobit(x, y, bounds);
      if (!fit.converged) continue;

      Eigen::MatrixXd design(n, p + 1);
      design.col(0).setOnes();
      design.rightCols(p) = x;
      const double ll0 = tobit_log_lik(design, y, bounds, fit.beta, fit.sigma);
      const double scale = std::max(1.0, std::abs(ll0));
      for (int j = 0; j <= p; ++j) {
        Eigen::VectorXd bp = fit.beta, bm = fit.beta;
        const double h = 1e-5;
        bp[j] += h;
        bm[j] -= h;
        const double g = (tobit_log_lik(design, y, bounds, bp, fit.sigma) -
                          tobit_log_lik(design, y, bounds, bm, fit.sigma)) /
                         (2.0 * h);
        CHECK(std::abs(g) / scale < 1e-4);
      }
      const double h = 1e-6;
      const double gs = (tobit_log_lik(design, y, bounds, fit.beta, fit.sigma * (1.0 + h)) -
                         tobit_log_lik(design, y, bounds, fit.beta, fit.sigma * (1.0 - h))) /
                        (2.0 * h * fit.sigma);
      CHECK(std::abs(gs) / scale < 1e-4);
    }
  }
}

TEST_CASE("lambda solver") {
  CHECK(solve_lambda(1.0, 0.5, 10.0) == doctest::Approx(0.93418).epsilon(1e-4));
  CHECK(solve_lambda(2.0, 0.7, 3.0) == doctest::Approx(4.0 * solve_lambda(1.0, 0.7, 3.0)).epsilon(1e-12));
  CHECK(solve_lambda(1.0, 0.999, 5.0) < solve_lambda(1.0, 0.5, 5.0));
  CHECK(solve_lambda(1.0, 0.9999, 5.0) < 0.05);
  CHECK_THROWS_AS(solve_lambda(1.0, 0.0, 3.0), std::domain_error);

  SUBCASE("prior simulation hits the q-quantile within 0.005") {
    RngStream rng(9);
    for (const auto& [q, nu] : std::vector<std::pair<double, double>>{{0.95, 3.0}, {0.9, 10.0}}) {
      const double sigma_hat = 1.7;
      const double lambda = solve_lambda(sigma_hat, q, nu);
      const int n = 1000000;
      int below = 0;
      for (int i = 0; i < n; ++i) {
        const double s2 = nu * lambda / rng.chi_square(nu);
        if (std::sqrt(s2) <= sigma_hat) ++below;
      }
      CHECK(std::abs(static_cast<double>(below) / n - q) < 0.005);
    }
  }
}

TEST_CASE("k0 solver") {
  Eigen::VectorXd e(3);
  e << 10.0, -3.0, 2.0;
  CHECK(solve_k0(1.0, e, 10.0) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::VectorXd half = e / 2.0;
  CHECK(solve_k0(1.0, half, 10.0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(solve_k0(1.0, e, 0.0), std::domain_error);
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(solve_k0(1.0, zeros, 10.0), std::domain_error);
}

TEST_CASE("center estimator") {
  SUBCASE("no censoring gives the sample mean") {
    const Dataset d = make_data(2000, 1, CensoringBounds{}, 10, 1.4, 0.8);
    double mean = 0.0;
    for (const auto& o : d.y) mean += o.y;
    mean /= static_cast<double>(d.y.size());
    const auto res = estimate_center(d.y, d.bounds);
    CHECK(res.value == doctest::Approx(mean).epsilon(1e-6));
    CHECK(!res.fell_back);
  }
  SUBCASE("heavily censored normal recovered at scale") {
    const Dataset d = make_data(100000, 1, CensoringBounds{2.0, kInf}, 11, 2.0, 1.0);
    const auto res = estimate_center(d.y, d.bounds);
    CHECK(res.value == doctest::Approx(2.0).epsilon(0.015));
  }
  SUBCASE("all values at the bound trigger the fallback") {
    std::vector<ObservedOutcome> y(30, {0.0, CensorStatus::kAtLower});
    const auto res = estimate_center(y, CensoringBounds{0.0, kInf});
    CHECK(res.fell_back);
    CHECK(res.value == 0.0);
  }
}

TEST_CASE("calibration defaults and report") {
  const auto homo = default_calibration(false);
  CHECK(homo.method == SigmaHatMethod::kCens);
  CHECK(homo.q == 0.95);
  CHECK(homo.nu == 3.0);
  const auto dp = default_calibration(true);
  CHECK(dp.method == SigmaHatMethod::kTobit);
  CHECK(dp.q == 0.9);
  CHECK(dp.nu == 10.0);

  const Dataset d = make_data(500, 3, CensoringBounds{-0.8, kInf}, 12, 0.0, 1.0);
  const auto cal = calibrate(d, homo);
  // lambda satisfies the quantile identity
  CHECK(cal.lambda ==
        doctest::Approx(cal.sigma_hat * cal.sigma_hat * chi_square_quantile(1.0 - cal.q, cal.nu) /
                        cal.nu)
            .epsilon(1e-10));
  CHECK(cal.k0 > 0.0);
  const std::string rep = cal.report();
  CHECK(rep.find("sigma_hat=") != std::string::npos);
  CHECK(rep.find("lambda=") != std::string::npos);
  CHECK(rep.find("center=") != std::string::npos);
}
