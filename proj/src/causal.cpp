#include "tobart/causal.hpp"

#include <cmath>
#include <stdexcept>

#include "tobart/predict.hpp"
#include "tobart/stats.hpp"

namespace tobart {

CateResult estimate_cate(const CausalDataset& data, const ChainConfig& cfg, double level) {
  const Eigen::Index n = data.n();
  if (static_cast<Eigen::Index>(data.t.size()) != n || static_cast<Eigen::Index>(data.y.size()) != n)
    throw std::invalid_argument("estimate_cate: field length mismatch");
  int treated = 0;
  for (int t : data.t) {
    if (t != 0 && t != 1) throw std::invalid_argument("estimate_cate: treatment must be 0/1");
    treated += t;
  }
  if (treated == 0 || treated == static_cast<int>(data.t.size()))
    throw std::invalid_argument("estimate_cate: both treatment arms must be nonempty");

  // treatment appended as the last covariate
  Dataset fit_data;
  fit_data.x.resize(n, data.x.cols() + 1);
  fit_data.x.leftCols(data.x.cols()) = data.x;
  for (Eigen::Index i = 0; i < n; ++i)
    fit_data.x(i, data.x.cols()) = static_cast<double>(data.t[static_cast<std::size_t>(i)]);
  fit_data.y = data.y;
  fit_data.bounds = data.bounds;

  Eigen::MatrixXd test_x(2 * n, fit_data.x.cols());
  test_x.topRows(n) = fit_data.x;
  test_x.bottomRows(n) = fit_data.x;
  test_x.col(fit_data.x.cols() - 1).head(n).setOnes();
  test_x.col(fit_data.x.cols() - 1).tail(n).setZero();

  const PosteriorDraws draws = fit_tobart(fit_data, cfg, test_x);

  CateResult out;
  const Eigen::Index d_count = static_cast<Eigen::Index>(draws.size());
  out.draws.tau.resize(d_count, n);
  for (Eigen::Index d = 0; d < d_count; ++d)
    out.draws.tau.row(d) =
        (draws.f_test[static_cast<std::size_t>(d)].head(n) -
         draws.f_test[static_cast<std::size_t>(d)].tail(n))
            .transpose();

  out.summary.level = level;
  out.summary.mean = out.draws.tau.colwise().mean();
  out.summary.lower.resize(n);
  out.summary.upper.resize(n);
  const double q_lo = 0.5 * (1.0 - level);
  std::vector<double> col(static_cast<std::size_t>(d_count));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < d_count; ++d) col[static_cast<std::size_t>(d)] = out.draws.tau(d, i);
    out.summary.lower[i] = empirical_quantile(col, q_lo);
    out.summary.upper[i] = empirical_quantile(col, 1.0 - q_lo);
  }
  return out;
}

double pehe(std::span<const double> estimates, std::span<const double> truth) {
  if (estimates.size() != truth.size()) throw std::invalid_argument("pehe: length mismatch");
  if (estimates.empty()) throw std::invalid_argument("pehe: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(estimates.size());
}

std::pair<double, double> interval_metrics(const CateDraws& draws,
                                           std::span<const double> truth, double level) {
  const Eigen::Index n = draws.rows();
  if (static_cast<Eigen::Index>(truth.size()) != n)
    throw std::invalid_argument("interval_metrics: truth length mismatch");
  const double q_lo = 0.5 * (1.0 - level);
  std::vector<double> col(static_cast<std::size_t>(draws.draw_count()));
  double covered = 0.0, length = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < draws.draw_count(); ++d)
      col[static_cast<std::size_t>(d)] = draws.tau(d, i);
    const double lo = empirical_quantile(col, q_lo);
    const double hi = empirical_quantile(col, 1.0 - q_lo);
    if (truth[static_cast<std::size_t>(i)] >= lo && truth[static_cast<std::size_t>(i)] <= hi)
      covered += 1.0;
    length += hi - lo;
  }
  return {covered / static_cast<double>(n), length / static_cast<double>(n)};
}

namespace {

double mills_diff_ratio(double loc, double sigma, const CensoringBounds& bounds) {
  const double za = (bounds.a - loc) / sigma;
  const double zb = (bounds.b - loc) / sigma;
  const double mass = (za + zb > 0.0) ? std_normal_sf(za) - std_normal_sf(zb)
                                      : std_normal_cdf(zb) - std_normal_cdf(za);
  if (!(mass > 0.0))
    throw std::domain_error("naive_uncensored_bias: degenerate conditioning, no interior mass");
  const double pa = std::isinf(za) ? 0.0 : std_normal_pdf(za);
  const double pb = std::isinf(zb) ? 0.0 : std_normal_pdf(zb);
  return (pa - pb) / mass;
}

}  // namespace

double naive_uncensored_bias(double mu, double tau, double sigma, const CensoringBounds& bounds) {
  if (!(sigma > 0.0)) throw std::domain_error("naive_uncensored_bias: sigma must be > 0");
  return tau + sigma * (mills_diff_ratio(mu + tau, sigma, bounds) -
                        mills_diff_ratio(mu, sigma, bounds));
}

double naive_fulldata_bias(double mu, double tau, double sigma, const CensoringBounds& bounds) {
  if (!(sigma > 0.0)) throw std::domain_error("naive_fulldata_bias: sigma must be > 0");
  const double za_t = (bounds.a - mu - tau) / sigma;
  const double zb_t = (bounds.b - mu - tau) / sigma;
  const double za_0 = (bounds.a - mu) / sigma;
  const double zb_0 = (bounds.b - mu) / sigma;
  const auto mass = [](double za, double zb) {
    return (za + zb > 0.0) ? std_normal_sf(za) - std_normal_sf(zb)
                           : std_normal_cdf(zb) - std_normal_cdf(za);
  };
  const auto pdf0 = [](double z) { return std::isinf(z) ? 0.0 : std_normal_pdf(z); };

  double e = tau * mass(za_t, zb_t) + mu * (mass(za_t, zb_t) - mass(za_0, zb_0)) +
             sigma * (pdf0(za_t) - pdf0(zb_t) - pdf0(za_0) + pdf0(zb_0));
  if (std::isfinite(bounds.a)) e += bounds.a * (std_normal_cdf(za_t) - std_normal_cdf(za_0));
  if (std::isfinite(bounds.b)) e += bounds.b * (std_normal_cdf(zb_0) - std_normal_cdf(zb_t));
  return e;
}

}  // namespace tobart
