#include "tobart/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tobart/stats.hpp"

namespace tobart {

SigmaHatMethod parse_sigma_hat_method(const std::string& name) {
  if (name == "naive") return SigmaHatMethod::kNaive;
  if (name == "tobit") return SigmaHatMethod::kTobit;
  if (name == "cens") return SigmaHatMethod::kCens;
  if (name == "lm") return SigmaHatMethod::kLm;
  throw std::invalid_argument("unknown sigma-hat method: " + name);
}

std::string sigma_hat_method_name(SigmaHatMethod m) {
  switch (m) {
    case SigmaHatMethod::kNaive: return "naive";
    case SigmaHatMethod::kTobit: return "tobit";
    case SigmaHatMethod::kCens: return "cens";
    case SigmaHatMethod::kLm: return "lm";
  }
  return "?";
}

namespace {

// phi(z)/Phi(z), stable in the deep lower tail.
double mills_lower(double z) {
  if (z < -20.0) {
    const double z2 = z * z;
    return -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
  }
  return std_normal_pdf(z) / std_normal_cdf(z);
}

// phi(z)/(1-Phi(z)), stable in the deep upper tail.
double mills_upper(double z) { return mills_lower(-z); }

double sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) ss += (v[i] - mean) * (v[i] - mean);
  return std::sqrt(ss / std::max<double>(1.0, static_cast<double>(v.size()) - 1.0));
}

struct TobitObjective {
  const Eigen::MatrixXd& design;
  const std::vector<ObservedOutcome>& y;
  const CensoringBounds& bounds;

  double log_lik(const Eigen::VectorXd& theta) const {
    const Eigen::Index p = design.cols();
    const double sigma = std::exp(theta[p]);
    Eigen::VectorXd beta = theta.head(p);
    return tobit_log_lik(design, y, bounds, beta, sigma);
  }

  // analytic gradient in (beta, h = log sigma)
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    const Eigen::Index p = design.cols();
    const double sigma = std::exp(theta[p]);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p + 1);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double xb = design.row(static_cast<Eigen::Index>(i)).dot(theta.head(p));
      double dbeta_scale = 0.0;  // multiplies x_i / sigma
      double dh = 0.0;
      switch (y[i].status) {
        case CensorStatus::kInterior: {
          const double z = (y[i].y - xb) / sigma;
          dbeta_scale = z;
          dh = z * z - 1.0;
          break;
        }
        case CensorStatus::kAtLower: {
          const double za = (bounds.a - xb) / sigma;
          const double r = mills_lower(za);
          dbeta_scale = -r;
          dh = -za * r;
          break;
        }
        case CensorStatus::kAtUpper: {
          const double zb = (bounds.b - xb) / sigma;
          const double r = mills_upper(zb);
          dbeta_scale = r;
          dh = zb * r;
          break;
        }
      }
      g.head(p) += dbeta_scale / sigma * design.row(static_cast<Eigen::Index>(i)).transpose();
      g[p] += dh;
    }
    return g;
  }
};

}  // namespace

double tobit_log_lik(const Eigen::MatrixXd& design, const std::vector<ObservedOutcome>& y,
                     const CensoringBounds& bounds, const Eigen::VectorXd& beta, double sigma) {
  long double ll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double xb = design.row(static_cast<Eigen::Index>(i)).dot(beta);
    switch (y[i].status) {
      case CensorStatus::kInterior:
        ll += std::log(normal_pdf(y[i].y, xb, sigma));
        break;
      case CensorStatus::kAtLower: {
        const double za = (bounds.a - xb) / sigma;
        ll += (za < -20.0) ? std::log(std_normal_pdf(za) / mills_lower(za))
                           : std::log(std::max(std_normal_cdf(za), 1e-300));
        break;
      }
      case CensorStatus::kAtUpper: {
        const double zb = (bounds.b - xb) / sigma;
        ll += (zb > 20.0) ? std::log(std_normal_pdf(zb) / mills_upper(zb))
                          : std::log(std::max(std_normal_sf(zb), 1e-300));
        break;
      }
    }
  }
  return static_cast<double>(ll);
}

TobitMleFit fit_linear_tobit(const Eigen::MatrixXd& x, const std::vector<ObservedOutcome>& y,
                             const CensoringBounds& bounds) {
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (x.rows() != 0 && x.rows() != n)
    throw std::invalid_argument("fit_linear_tobit: row mismatch");
  Eigen::MatrixXd design(n, x.cols() + 1);
  design.col(0).setOnes();
  if (x.cols() > 0) design.rightCols(x.cols()) = x;
  const Eigen::Index p = design.cols();
  if (n < p + 1) throw std::invalid_argument("fit_linear_tobit: too few observations");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p) throw std::invalid_argument("fit_linear_tobit: design is rank deficient");
  }

  // initialize from OLS on the interior rows
  std::vector<int> interior;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i].status == CensorStatus::kInterior) interior.push_back(static_cast<int>(i));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  if (static_cast<Eigen::Index>(interior.size()) >= p + 1) {
    Eigen::MatrixXd xi(interior.size(), p);
    Eigen::VectorXd yi(interior.size());
    for (std::size_t r = 0; r < interior.size(); ++r) {
      xi.row(static_cast<Eigen::Index>(r)) = design.row(interior[r]);
      yi[static_cast<Eigen::Index>(r)] = y[interior[r]].y;
    }
    const Eigen::VectorXd beta0 = xi.colPivHouseholderQr().solve(yi);
    theta.head(p) = beta0;
    const Eigen::VectorXd res = yi - xi * beta0;
    theta[p] = std::log(std::max(sample_sd(res), 1e-3));
  } else {
    Eigen::VectorXd all_y(n);
    for (Eigen::Index i = 0; i < n; ++i) all_y[i] = y[static_cast<std::size_t>(i)].y;
    theta[0] = all_y.mean();
    theta[p] = std::log(std::max(sample_sd(all_y), 1e-3));
  }

  TobitObjective obj{design, y, bounds};
  double f = obj.log_lik(theta);
  bool converged = false;
  const int max_iter = 200;
  const double tol_g = 1e-7;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd g = obj.gradient(theta);
    if (g.lpNorm<Eigen::Infinity>() < tol_g) {
      converged = true;
      break;
    }
    // Hessian of -loglik by central differences of the gradient
    const Eigen::Index dim = p + 1;
    Eigen::MatrixXd h(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double step = 1e-5 * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += step;
      tm[j] -= step;
      h.col(j) = -(obj.gradient(tp) - obj.gradient(tm)) / (2.0 * step);
    }
    h = 0.5 * (h + h.transpose()).eval();

    Eigen::VectorXd dir;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd hr = h;
      hr.diagonal().array() += ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(hr);
      if (llt.info() == Eigen::Success) {
        dir = llt.solve(g);
        break;
      }
      ridge = (ridge == 0.0) ? 1e-4 : ridge * 10.0;
    }
    if (dir.size() == 0 || !dir.allFinite()) dir = g;  // gradient ascent fallback

    // Near the optimum the objective changes by less than the evaluation
    // noise and a sufficient-ascent test cannot discriminate; take plain
    // Newton steps there and let the gradient test terminate.
    if (g.lpNorm<Eigen::Infinity>() < 1e-3 * std::max(1.0, std::abs(f))) {
      Eigen::VectorXd cand = theta + dir;
      cand[p] = std::max(cand[p], std::log(1e-6));
      const double fc = obj.log_lik(cand);
      if (std::isfinite(fc) && fc >= f - 1e-8 * std::max(1.0, std::abs(f))) {
        theta = cand;
        f = fc;
        continue;
      }
      break;
    }

    // backtracking line search on the log-likelihood
    double t = 1.0;
    const double slope = g.dot(dir);
    bool moved = false;
    while (t > 1e-12) {
      Eigen::VectorXd cand = theta + t * dir;
      cand[p] = std::max(cand[p], std::log(1e-6));  // sigma floor
      const double fc = obj.log_lik(cand);
      if (std::isfinite(fc) && fc >= f + 1e-4 * t * slope) {
        theta = cand;
        f = fc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }

  TobitMleFit fit;
  fit.beta = theta.head(p);
  fit.sigma = std::exp(theta[p]);
  fit.converged = converged;
  fit.log_lik = f;
  fit.residuals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    fit.residuals[i] = y[static_cast<std::size_t>(i)].y - design.row(i).dot(fit.beta);
  return fit;
}

SigmaHatResult estimate_sigma_hat(const Dataset& data, SigmaHatMethod method) {
  const Eigen::Index n = data.n();
  if (n < 2) throw std::invalid_argument("estimate_sigma_hat: need at least two observations");
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = data.y[static_cast<std::size_t>(i)].y;

  const auto naive = [&] { return sample_sd(yv); };
  SigmaHatResult out;
  out.method_used = method;
  switch (method) {
    case SigmaHatMethod::kNaive:
      out.value = naive();
      return out;
    case SigmaHatMethod::kLm: {
      Eigen::MatrixXd design(n, data.p() + 1);
      design.col(0).setOnes();
      design.rightCols(data.p()) = data.x;
      const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(yv);
      out.value = sample_sd((yv - design * beta).eval());
      return out;
    }
    case SigmaHatMethod::kCens: {
      try {
        const auto fit = fit_linear_tobit(Eigen::MatrixXd(n, 0), data.y, data.bounds);
        if (fit.converged && fit.sigma > 1e-8) {
          out.value = fit.sigma;
          return out;
        }
      } catch (const std::exception&) {
      }
      out.value = naive();
      out.method_used = SigmaHatMethod::kNaive;
      out.fell_back = true;
      return out;
    }
    case SigmaHatMethod::kTobit: {
      try {
        const auto fit = fit_linear_tobit(data.x, data.y, data.bounds);
        if (fit.converged && fit.sigma > 1e-8) {
          out.value = fit.sigma;
          return out;
        }
      } catch (const std::exception&) {
      }
      // fall back to the intercept-only fit, then to the naive SD
      try {
        const auto fit = fit_linear_tobit(Eigen::MatrixXd(n, 0), data.y, data.bounds);
        if (fit.converged && fit.sigma > 1e-8) {
          out.value = fit.sigma;
          out.method_used = SigmaHatMethod::kCens;
          out.fell_back = true;
          return out;
        }
      } catch (const std::exception&) {
      }
      out.value = naive();
      out.method_used = SigmaHatMethod::kNaive;
      out.fell_back = true;
      return out;
    }
  }
  throw std::logic_error("estimate_sigma_hat: unreachable");
}

double solve_lambda(double sigma_hat, double q, double nu) {
  if (!(q > 0.0 && q < 1.0) || !(nu > 0.0) || !(sigma_hat > 0.0))
    throw std::domain_error("solve_lambda: invalid arguments");
  // P(sigma <= sigma_hat) = q  <=>  chisq_nu >= nu lambda / sigma_hat^2 w.p. q
  return sigma_hat * sigma_hat * chi_square_quantile(1.0 - q, nu) / nu;
}

double solve_k0(double lambda, const Eigen::VectorXd& residuals, double k_s) {
  if (!(k_s > 0.0) || !(lambda > 0.0)) throw std::domain_error("solve_k0: invalid arguments");
  if (residuals.size() == 0) throw std::domain_error("solve_k0: empty residual vector");
  const double max_abs = residuals.cwiseAbs().maxCoeff();
  if (!(max_abs > 0.0)) throw std::domain_error("solve_k0: residuals are all zero");
  return k_s * k_s * lambda / (max_abs * max_abs);
}

CenterResult estimate_center(const std::vector<ObservedOutcome>& y,
                             const CensoringBounds& bounds) {
  CenterResult out;
  double mean = 0.0;
  for (const auto& o : y) mean += o.y;
  mean /= static_cast<double>(y.size());
  std::size_t interior = 0;
  for (const auto& o : y)
    if (o.status == CensorStatus::kInterior) ++interior;
  if (interior == 0) {
    out.value = mean;
    out.fell_back = true;
    return out;
  }
  try {
    const auto fit =
        fit_linear_tobit(Eigen::MatrixXd(static_cast<Eigen::Index>(y.size()), 0), y, bounds);
    if (fit.converged) {
      out.value = fit.beta[0];
      return out;
    }
  } catch (const std::exception&) {
  }
  out.value = mean;
  out.fell_back = true;
  return out;
}

CalibrationOptions default_calibration(bool dp_error) {
  CalibrationOptions opts;
  if (dp_error) {
    opts.method = SigmaHatMethod::kTobit;
    opts.q = 0.9;
    opts.nu = 10.0;
  } else {
    opts.method = SigmaHatMethod::kCens;
    opts.q = 0.95;
    opts.nu = 3.0;
  }
  return opts;
}

CalibratedPriors calibrate(const Dataset& data, const CalibrationOptions& opts) {
  CalibratedPriors cal;
  cal.q = opts.q;
  cal.nu = opts.nu;
  cal.k_s = opts.k_s;

  const auto sh = estimate_sigma_hat(data, opts.method);
  cal.sigma_hat = sh.value;
  cal.sigma_hat_method = sh.method_used;
  cal.sigma_fell_back = sh.fell_back;
  cal.lambda = solve_lambda(cal.sigma_hat, cal.q, cal.nu);

  const auto ctr = estimate_center(data.y, data.bounds);
  cal.center = ctr.value;
  cal.center_fell_back = ctr.fell_back;

  // k0 from the residuals of the full linear-Tobit fit
  try {
    const auto fit = fit_linear_tobit(data.x, data.y, data.bounds);
    cal.residuals = fit.residuals;
  } catch (const std::exception&) {
    Eigen::VectorXd e(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
      e[i] = data.y[static_cast<std::size_t>(i)].y - cal.center;
    cal.residuals = e;
  }
  try {
    cal.k0 = solve_k0(cal.lambda, cal.residuals, cal.k_s);
  } catch (const std::exception&) {
    cal.k0 = 1.0;
  }
  return cal;
}

std::string CalibratedPriors::report() const {
  std::ostringstream os;
  os << "sigma_hat_method=" << sigma_hat_method_name(sigma_hat_method) << "\n"
     << "sigma_hat=" << sigma_hat << "\n"
     << "lambda=" << lambda << "\n"
     << "q=" << q << "\n"
     << "nu=" << nu << "\n"
     << "k0=" << k0 << "\n"
     << "k_s=" << k_s << "\n"
     << "center=" << center << "\n"
     << "sigma_fell_back=" << (sigma_fell_back ? 1 : 0) << "\n"
     << "center_fell_back=" << (center_fell_back ? 1 : 0) << "\n";
  return os.str();
}

}  // namespace tobart
