#include "tobart/chain.hpp"

#include <cmath>
#include <stdexcept>

#include "tobart/stats.hpp"

namespace tobart {

double draw_latent(RngStream& rng, const ObservedOutcome& obs, double f_i, double gamma_i,
                   double sigma_i, const CensoringBounds& bounds) {
  switch (obs.status) {
    case CensorStatus::kInterior:
      if (!(obs.y > bounds.a && obs.y < bounds.b))
        throw std::domain_error("draw_latent: interior outcome outside bounds");
      return obs.y;
    case CensorStatus::kAtLower:
      if (!std::isfinite(bounds.a) || obs.y != bounds.a)
        throw std::domain_error("draw_latent: at-lower outcome inconsistent with bounds");
      return sample_truncated_normal(rng, f_i + gamma_i, sigma_i, Interval{-kInf, bounds.a});
    case CensorStatus::kAtUpper:
      if (!std::isfinite(bounds.b) || obs.y != bounds.b)
        throw std::domain_error("draw_latent: at-upper outcome inconsistent with bounds");
      return sample_truncated_normal(rng, f_i + gamma_i, sigma_i, Interval{bounds.b, kInf});
  }
  throw std::domain_error("draw_latent: bad status");
}

double draw_sigma2(RngStream& rng, const Eigen::VectorXd& residuals, double nu, double lambda) {
  if (!(nu > 0.0) || !(lambda > 0.0)) throw std::domain_error("draw_sigma2: nu, lambda must be > 0");
  const double n = static_cast<double>(residuals.size());
  const double ssr = residuals.squaredNorm();
  return sample_inverse_gamma(rng, 0.5 * (n + nu), 0.5 * (ssr + nu * lambda));
}

namespace {

void validate_inputs(const Dataset& data) {
  if (data.n() < 10) throw std::invalid_argument("run_chain: need at least 10 observations");
  if (data.p() < 1) throw std::invalid_argument("run_chain: need at least one covariate");
  if (!data.x.allFinite()) throw std::invalid_argument("run_chain: non-finite covariates");
  if (!data.bounds.valid()) throw std::invalid_argument("run_chain: invalid censoring bounds");
  if (data.bounds.censors() && data.count(CensorStatus::kInterior) == 0)
    throw std::invalid_argument(
        "run_chain: degenerate data, every outcome is censored and no interior outcomes "
        "remain to identify the scale");
  for (const auto& o : data.y) {
    if (!std::isfinite(o.y)) throw std::invalid_argument("run_chain: non-finite outcome");
    switch (o.status) {
      case CensorStatus::kAtLower:
        if (o.y != data.bounds.a)
          throw std::invalid_argument("run_chain: at-lower outcome not equal to lower bound");
        break;
      case CensorStatus::kAtUpper:
        if (o.y != data.bounds.b)
          throw std::invalid_argument("run_chain: at-upper outcome not equal to upper bound");
        break;
      case CensorStatus::kInterior:
        if (!(o.y > data.bounds.a && o.y < data.bounds.b))
          throw std::invalid_argument("run_chain: interior outcome outside bounds");
        break;
    }
  }
}

double observed_range(const Dataset& data) {
  double lo = kInf, hi = -kInf;
  for (const auto& o : data.y) {
    lo = std::min(lo, o.y);
    hi = std::max(hi, o.y);
  }
  return std::max(hi - lo, 1e-8);
}

}  // namespace

TobitChain::TobitChain(const Dataset& data, const ChainConfig& cfg, const CalibratedPriors& calib)
    : data_(data), cfg_(cfg), calib_(calib), dp_(DpState::make(1, BaseMeasure{}, 1.0)) {
  validate_inputs(data_);
  center_ = calib_.center;
  bounds_c_ = CensoringBounds{data_.bounds.a - center_, data_.bounds.b - center_};

  ForestOptions fopts = cfg_.forest;
  fopts.m = cfg_.tree_count();
  fopts.mode = cfg_.mode;
  fopts.sparse = (cfg_.mode == TreeMode::kSoft);
  // The leaf prior must span the latent outcome, whose range is hidden by
  // censoring; widen the observed range to a 99% central latent interval
  // implied by the calibrated scale estimate.
  double width = observed_range(data_);
  if (data_.bounds.censors())
    width = std::max(width, 2.0 * normal_quantile(0.995) * calib_.sigma_hat);
  forest_ = ForestState::make(fopts, data_.x, width);

  const Eigen::Index n = data_.n();
  y_star_.resize(n);
  sigma_ = calib_.sigma_hat;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = data_.y[static_cast<std::size_t>(i)];
    switch (o.status) {
      case CensorStatus::kInterior: y_star_[i] = o.y - center_; break;
      case CensorStatus::kAtLower: y_star_[i] = bounds_c_.a - 0.5 * sigma_; break;
      case CensorStatus::kAtUpper: y_star_[i] = bounds_c_.b + 0.5 * sigma_; break;
    }
  }

  if (cfg_.error_model == ErrorModel::kDp) {
    BaseMeasure base;
    base.nu = calib_.nu;
    base.lambda = calib_.lambda;
    base.gamma0 = 0.0;
    base.k0 = calib_.k0;
    base.k_s = calib_.k_s;
    dp_ = DpState::make(static_cast<int>(n), base, sigma_);
  }
  refresh_error_values();
}

void TobitChain::refresh_error_values() {
  const Eigen::Index n = data_.n();
  err_.gamma.resize(n);
  err_.sigma.resize(n);
  if (cfg_.error_model == ErrorModel::kHomoskedastic) {
    err_.gamma.setZero();
    err_.sigma.setConstant(sigma_);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      err_.gamma[i] = dp_.gamma_of(static_cast<int>(i));
      err_.sigma[i] = dp_.sigma_of(static_cast<int>(i));
    }
  }
}

void TobitChain::set_outcomes(const std::vector<ObservedOutcome>& y) {
  if (y.size() != data_.y.size()) throw std::invalid_argument("set_outcomes: size mismatch");
  data_.y = y;
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    const auto& o = data_.y[static_cast<std::size_t>(i)];
    switch (o.status) {
      case CensorStatus::kInterior:
        y_star_[i] = o.y - center_;
        break;
      case CensorStatus::kAtLower:
        if (y_star_[i] > bounds_c_.a) y_star_[i] = bounds_c_.a - 0.5 * sigma_;
        break;
      case CensorStatus::kAtUpper:
        if (y_star_[i] < bounds_c_.b) y_star_[i] = bounds_c_.b + 0.5 * sigma_;
        break;
    }
  }
}

void TobitChain::step(RngStream& rng) {
  const Eigen::Index n = data_.n();

  // 1. latent outcomes
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = data_.y[static_cast<std::size_t>(i)];
    if (o.status == CensorStatus::kInterior) {
      y_star_[i] = o.y - center_;
      continue;
    }
    const ObservedOutcome centered{o.y - center_, o.status};
    y_star_[i] = draw_latent(rng, centered, forest_.fitted[i], err_.gamma[i], err_.sigma[i],
                             bounds_c_);
  }

  // 2. trees
  backfit_sweep(rng, forest_, data_.x, y_star_, err_);
  if (forest_.opts.sparse) {
    const auto counts = count_split_vars(forest_, static_cast<int>(data_.p()));
    update_split_probs(rng, forest_, counts);
    update_sparsity(rng, forest_);
  }
  if (forest_.opts.mode == TreeMode::kSoft) update_bandwidths(rng, forest_, data_.x, y_star_, err_);

  // 3. error model
  if (cfg_.error_model == ErrorModel::kHomoskedastic) {
    const Eigen::VectorXd resid = y_star_ - forest_.fitted;
    sigma_ = std::sqrt(draw_sigma2(rng, resid, calib_.nu, calib_.lambda));
  } else {
    const Eigen::VectorXd u = y_star_ - forest_.fitted;
    dp_sweep(rng, dp_, u);
  }
  refresh_error_values();
}

Eigen::VectorXd TobitChain::fitted_original() const {
  return (forest_.fitted.array() + center_).matrix();
}

Eigen::VectorXd TobitChain::predict_original(const Eigen::MatrixXd& x) const {
  return (forest_.predict(x).array() + center_).matrix();
}

PosteriorDraws run_chain(const Dataset& data, const ChainConfig& cfg,
                         const CalibratedPriors& calib, const Eigen::MatrixXd& test_x) {
  if (cfg.burn_in < 0 || cfg.draws < 1 || cfg.thin < 1)
    throw std::invalid_argument("run_chain: bad iteration counts");
  if (test_x.rows() > 0 && test_x.cols() != data.x.cols())
    throw std::invalid_argument("run_chain: test covariate dimension mismatch");

  TobitChain chain(data, cfg, calib);
  RngStream rng(cfg.seed, cfg.stream_id);

  PosteriorDraws out;
  out.error_model = cfg.error_model;
  out.mode = cfg.mode;
  out.bounds = data.bounds;
  out.center = calib.center;
  out.config = cfg;
  out.calib = calib;
  if (cfg.error_model == ErrorModel::kDp) out.base = chain.dp_state().base;

  const int total = cfg.burn_in + cfg.draws;
  for (int it = 0; it < total; ++it) {
    chain.step(rng);
    if (it < cfg.burn_in || (it - cfg.burn_in) % cfg.thin != 0) continue;

    out.f_train.push_back(chain.fitted_original());
    out.f_test.push_back(test_x.rows() > 0 ? chain.predict_original(test_x)
                                           : Eigen::VectorXd());
    if (cfg.error_model == ErrorModel::kHomoskedastic) {
      out.sigma.push_back(chain.sigma());
    } else {
      const auto& dp = chain.dp_state();
      const Eigen::Index n = data.n();
      Eigen::VectorXd g(n), s(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        g[i] = dp.gamma_of(static_cast<int>(i));
        s[i] = dp.sigma_of(static_cast<int>(i));
      }
      out.gamma_train.push_back(std::move(g));
      out.sigma_train.push_back(std::move(s));
      out.dp_diag.push_back({dp.cluster_count(), dp.alpha_dp, dp.largest_share()});
      std::vector<std::pair<double, double>> oos(static_cast<std::size_t>(test_x.rows()));
      for (auto& pr : oos) pr = draw_oos_error(rng, dp);
      out.oos_test.push_back(std::move(oos));
      if (cfg.keep_forests) {
        out.dp_clusters.push_back(dp.clusters);
        out.dp_alpha.push_back(dp.alpha_dp);
      }
    }
    if (cfg.keep_forests) out.forests.push_back(chain.forest().trees);
  }
  return out;
}

PosteriorDraws fit_tobart(const Dataset& data, const ChainConfig& cfg,
                          const Eigen::MatrixXd& test_x) {
  const auto cal_opts = default_calibration(cfg.error_model == ErrorModel::kDp);
  const CalibratedPriors calib = calibrate(data, cal_opts);
  return run_chain(data, cfg, calib, test_x);
}

}  // namespace tobart
