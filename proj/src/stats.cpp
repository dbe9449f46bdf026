#include "tobart/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tobart {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}  // namespace

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_normal_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-z / kSqrt2);
}

double std_normal_sf(double z) {
  if (std::isinf(z)) return z > 0 ? 0.0 : 1.0;
  return 0.5 * std::erfc(z / kSqrt2);
}

double normal_pdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("normal_pdf: sigma must be > 0");
  const double z = (x - mu) / sigma;
  return std_normal_pdf(z) / sigma;
}

double normal_cdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("normal_cdf: sigma must be > 0");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return std_normal_cdf((x - mu) / sigma);
}

// Acklam's rational approximation refined with one Halley step.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::domain_error("normal_quantile: p must be in [0,1]");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the erfc-based CDF.
  const double e = std_normal_cdf(x) - p;
  const double u = e / std_normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

// Regularized lower incomplete gamma by series (x < a+1) or continued
// fraction (x >= a+1).
double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_p: invalid arguments");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_gamma_a = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
  }
  // Lentz continued fraction for Q(a,x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
  return 1.0 - q;
}

double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

double chi_square_cdf(double x, double nu) {
  if (!(nu > 0.0)) throw std::domain_error("chi_square_cdf: nu must be > 0");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * nu, 0.5 * x);
}

double chi_square_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0) || !(nu > 0.0))
    throw std::domain_error("chi_square_quantile: invalid arguments");
  // Bracket then bisect/Newton on the CDF.
  double lo = 0.0, hi = std::max(nu, 1.0);
  while (chi_square_cdf(hi, nu) < p) hi *= 2.0;
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    const double f = chi_square_cdf(x, nu) - p;
    if (f > 0)
      hi = x;
    else
      lo = x;
    // Newton step using the chi-square density, clipped to the bracket.
    const double dens =
        std::exp((0.5 * nu - 1.0) * std::log(x) - 0.5 * x - std::lgamma(0.5 * nu) -
                 0.5 * nu * std::log(2.0));
    double next = x - f / std::max(dens, 1e-300);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-13 * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

double log_t_density(double x, double nu, double loc, double scale_sq) {
  if (!(nu > 0.0) || !(scale_sq > 0.0))
    throw std::domain_error("t_density: nu and scale_sq must be > 0");
  const double z2 = (x - loc) * (x - loc) / scale_sq;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * M_PI * scale_sq) -
         0.5 * (nu + 1.0) * std::log1p(z2 / nu);
}

double t_density(double x, double nu, double loc, double scale_sq) {
  return std::exp(log_t_density(x, nu, loc, scale_sq));
}

namespace {

// One-sided tail sampler: standard normal conditioned on z >= lo, lo > 0.
// Robert (1995) shifted-exponential rejection.
double sample_std_normal_tail(RngStream& rng, double lo) {
  const double lambda = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  for (;;) {
    const double z = lo + rng.exponential() / lambda;
    const double diff = z - lambda;
    if (std::log(rng.uniform_pos()) <= -0.5 * diff * diff) return z;
  }
}

}  // namespace

double sample_truncated_normal(RngStream& rng, double mu, double sigma, Interval bounds) {
  if (!(sigma > 0.0)) throw std::domain_error("sample_truncated_normal: sigma must be > 0");
  if (!bounds.valid()) throw std::domain_error("sample_truncated_normal: empty interval");
  const double lo = (bounds.lower - mu) / sigma;
  const double hi = (bounds.upper - mu) / sigma;

  constexpr double kTail = 5.0;
  double z;
  if (lo >= kTail) {
    do {
      z = sample_std_normal_tail(rng, lo);
    } while (z > hi);
  } else if (hi <= -kTail) {
    do {
      z = -sample_std_normal_tail(rng, -hi);
    } while (z < lo);
  } else {
    const double plo = std_normal_cdf(lo);
    const double phi = std_normal_cdf(hi);
    double u = plo + rng.uniform() * (phi - plo);
    u = std::clamp(u, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
    z = normal_quantile(u);
  }
  double x = mu + sigma * z;
  // Keep the draw strictly interior against rounding at the endpoints.
  if (x <= bounds.lower) x = std::nextafter(bounds.lower, kInf);
  if (x >= bounds.upper) x = std::nextafter(bounds.upper, -kInf);
  return x;
}

namespace {

// Interior mass Phi(hi) - Phi(lo) without tail cancellation.
double interior_normal_mass(double lo, double hi) {
  if (lo + hi > 0.0) return std_normal_sf(lo) - std_normal_sf(hi);
  return std_normal_cdf(hi) - std_normal_cdf(lo);
}

}  // namespace

double truncated_normal_mean(double mu, double sigma, Interval bounds) {
  const double lo = (bounds.lower - mu) / sigma;
  const double hi = (bounds.upper - mu) / sigma;
  const double mass = interior_normal_mass(lo, hi);
  const double plo = std::isinf(lo) ? 0.0 : std_normal_pdf(lo);
  const double phi = std::isinf(hi) ? 0.0 : std_normal_pdf(hi);
  return mu + sigma * (plo - phi) / mass;
}

double truncated_normal_var(double mu, double sigma, Interval bounds) {
  const double lo = (bounds.lower - mu) / sigma;
  const double hi = (bounds.upper - mu) / sigma;
  const double mass = interior_normal_mass(lo, hi);
  const double plo = std::isinf(lo) ? 0.0 : std_normal_pdf(lo);
  const double phi = std::isinf(hi) ? 0.0 : std_normal_pdf(hi);
  const double alo = std::isinf(lo) ? 0.0 : lo * std_normal_pdf(lo);
  const double ahi = std::isinf(hi) ? 0.0 : hi * std_normal_pdf(hi);
  const double r = (plo - phi) / mass;
  return sigma * sigma * (1.0 + (alo - ahi) / mass - r * r);
}

double sample_inverse_gamma(RngStream& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::domain_error("sample_inverse_gamma: shape and scale must be > 0");
  return scale / rng.gamma(shape);
}

std::vector<double> sample_dirichlet(RngStream& rng, std::span<const double> weights) {
  if (weights.empty()) throw std::domain_error("sample_dirichlet: empty weight vector");
  std::vector<double> out(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw std::domain_error("sample_dirichlet: weights must be > 0");
    out[i] = rng.gamma(weights[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    // All gamma draws underflowed (tiny concentrations); fall back to the
    // largest-weight corner via log-scale gumbel trick.
    std::size_t best = 0;
    double best_val = -kInf;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double g = std::log(weights[i]) - std::log(rng.exponential());
      if (g > best_val) {
        best_val = g;
        best = i;
      }
    }
    std::fill(out.begin(), out.end(), 0.0);
    out[best] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

double sample_error_dist(RngStream& rng, ErrorKind kind, const ErrorParams& params) {
  switch (kind) {
    case ErrorKind::kNormal:
      if (params.sigma < 0.0) throw std::domain_error("sample_error_dist: sigma < 0");
      return params.sigma * rng.normal();
    case ErrorKind::kSkewT: {
      // Azzalini skew-t: skew-normal numerator over sqrt(chi^2_nu / nu).
      const double delta = params.st_slant / std::sqrt(1.0 + params.st_slant * params.st_slant);
      const double u0 = rng.normal();
      const double u1 = rng.normal();
      const double sn = delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1;
      const double w = rng.chi_square(params.st_nu) / params.st_nu;
      return params.st_location + params.st_scale * sn / std::sqrt(w);
    }
    case ErrorKind::kWeibull: {
      if (!(params.wb_shape > 0.0) || !(params.wb_scale > 0.0))
        throw std::domain_error("sample_error_dist: weibull params must be > 0");
      return params.wb_scale * std::pow(rng.exponential(), 1.0 / params.wb_shape);
    }
    case ErrorKind::kStudentT:
      return rng.student_t(params.t_nu);
  }
  throw std::domain_error("sample_error_dist: unknown kind");
}

ErrorKind parse_error_kind(const std::string& name) {
  if (name == "normal") return ErrorKind::kNormal;
  if (name == "skew-t" || name == "skewt") return ErrorKind::kSkewT;
  if (name == "weibull") return ErrorKind::kWeibull;
  if (name == "t") return ErrorKind::kStudentT;
  throw std::domain_error("unknown error distribution: " + name);
}

std::string error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNormal: return "normal";
    case ErrorKind::kSkewT: return "skew-t";
    case ErrorKind::kWeibull: return "weibull";
    case ErrorKind::kStudentT: return "t";
  }
  return "?";
}

}  // namespace tobart
