#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tobart/rng.hpp"

namespace tobart {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Truncation / censoring interval; either endpoint may be infinite.
struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool valid() const { return lower < upper; }
  bool contains(double x) const { return x > lower && x < upper; }
};

double normal_pdf(double x, double mu, double sigma);
double normal_cdf(double x, double mu, double sigma);

// Standard normal helpers.
double std_normal_pdf(double z);
double std_normal_cdf(double z);
double std_normal_sf(double z);  // upper tail, accurate for large z
double normal_quantile(double p);

// Regularized incomplete gamma P(a,x) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi_square_cdf(double x, double nu);
double chi_square_quantile(double p, double nu);

// Density of loc + sqrt(scale_sq) * T_nu at x.
double t_density(double x, double nu, double loc, double scale_sq);
double log_t_density(double x, double nu, double loc, double scale_sq);

// Draw from N(mu, sigma^2) restricted to bounds. Inverse-CDF in the body,
// shifted-exponential rejection once the interval sits beyond 5 sigma.
double sample_truncated_normal(RngStream& rng, double mu, double sigma, Interval bounds);

// Analytic mean/variance of the truncated normal (test oracles and checks).
double truncated_normal_mean(double mu, double sigma, Interval bounds);
double truncated_normal_var(double mu, double sigma, Interval bounds);

// IG(shape, scale): density proportional to x^{-shape-1} exp(-scale/x).
double sample_inverse_gamma(RngStream& rng, double shape, double scale);

std::vector<double> sample_dirichlet(RngStream& rng, std::span<const double> weights);

// Error distributions used by the simulation DGPs.
enum class ErrorKind { kNormal, kSkewT, kWeibull, kStudentT };

struct ErrorParams {
  double sigma = 1.0;        // normal
  double st_location = 1.0;  // skew-t
  double st_scale = 1.0;
  double st_nu = 4.0;
  double st_slant = 2.0;
  double wb_shape = 0.5;  // weibull
  double wb_scale = 0.2;
  double t_nu = 3.0;  // student t
};

double sample_error_dist(RngStream& rng, ErrorKind kind, const ErrorParams& params);

ErrorKind parse_error_kind(const std::string& name);
std::string error_kind_name(ErrorKind kind);

}  // namespace tobart
