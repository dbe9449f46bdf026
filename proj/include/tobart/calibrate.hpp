#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tobart/data.hpp"

namespace tobart {

enum class SigmaHatMethod { kNaive, kTobit, kCens, kLm };

SigmaHatMethod parse_sigma_hat_method(const std::string& name);
std::string sigma_hat_method_name(SigmaHatMethod m);

// Linear Type-I Tobit maximum likelihood fit by Newton iterations with line
// search on (beta, log sigma). beta[0] is the intercept.
struct TobitMleFit {
  Eigen::VectorXd beta;
  double sigma = 1.0;
  bool converged = false;
  double log_lik = 0.0;
  Eigen::VectorXd residuals;  // observed y minus linear predictor
};

// x holds the covariates without an intercept column (may have zero columns
// for an intercept-only fit); the design gets the intercept prepended.
TobitMleFit fit_linear_tobit(const Eigen::MatrixXd& x, const std::vector<ObservedOutcome>& y,
                             const CensoringBounds& bounds);

double tobit_log_lik(const Eigen::MatrixXd& design, const std::vector<ObservedOutcome>& y,
                     const CensoringBounds& bounds, const Eigen::VectorXd& beta, double sigma);

struct SigmaHatResult {
  double value = 1.0;
  SigmaHatMethod method_used = SigmaHatMethod::kNaive;
  bool fell_back = false;
};

SigmaHatResult estimate_sigma_hat(const Dataset& data, SigmaHatMethod method);

// lambda such that P(sigma <= sigma_hat) = q under sigma^2 ~ nu lambda / chisq_nu.
double solve_lambda(double sigma_hat, double q, double nu);

// k0 from max_i |e_i| = k_s sqrt(lambda)/sqrt(k0).
double solve_k0(double lambda, const Eigen::VectorXd& residuals, double k_s);

struct CenterResult {
  double value = 0.0;
  bool fell_back = false;
};

// Mean parameter of the censored-normal MLE (intercept-only Tobit).
CenterResult estimate_center(const std::vector<ObservedOutcome>& y, const CensoringBounds& bounds);

struct CalibratedPriors {
  double sigma_hat = 1.0;
  SigmaHatMethod sigma_hat_method = SigmaHatMethod::kCens;
  double lambda = 1.0;
  double q = 0.95;
  double nu = 3.0;
  double k0 = 1.0;
  double k_s = 10.0;
  double center = 0.0;
  Eigen::VectorXd residuals;  // linear-Tobit residuals feeding k0
  bool sigma_fell_back = false;
  bool center_fell_back = false;

  std::string report() const;
};

struct CalibrationOptions {
  SigmaHatMethod method = SigmaHatMethod::kCens;
  double q = 0.95;
  double nu = 3.0;
  double k_s = 10.0;
};

// Defaults: homoskedastic error uses (cens, q=0.95, nu=3); the DP mixture
// uses (tobit, q=0.9, nu=10).
CalibrationOptions default_calibration(bool dp_error);

CalibratedPriors calibrate(const Dataset& data, const CalibrationOptions& opts);

}  // namespace tobart
