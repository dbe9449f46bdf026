#include "tobart/predict.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tobart/stats.hpp"

namespace tobart {

namespace {

// Interior normal mass Phi(zb) - Phi(za) without cancellation in the tails.
double interior_mass(double za, double zb) {
  if (za + zb > 0.0) return std_normal_sf(za) - std_normal_sf(zb);
  return std_normal_cdf(zb) - std_normal_cdf(za);
}

double pdf_or_zero(double z) { return std::isinf(z) ? 0.0 : std_normal_pdf(z); }

}  // namespace

double censored_expectation(double f, double gamma, double sigma,
                            const CensoringBounds& bounds) {
  if (!(sigma > 0.0)) throw std::domain_error("censored_expectation: sigma must be > 0");
  if (!bounds.valid()) throw std::domain_error("censored_expectation: invalid bounds");
  const double loc = f + gamma;
  const double za = (bounds.a - loc) / sigma;
  const double zb = (bounds.b - loc) / sigma;
  double e = loc * interior_mass(za, zb) + sigma * (pdf_or_zero(za) - pdf_or_zero(zb));
  if (std::isfinite(bounds.a)) e += bounds.a * std_normal_cdf(za);
  if (std::isfinite(bounds.b)) e += bounds.b * std_normal_sf(zb);
  return e;
}

double truncated_expectation(double f, double gamma, double sigma,
                             const CensoringBounds& bounds) {
  if (!(sigma > 0.0)) throw std::domain_error("truncated_expectation: sigma must be > 0");
  if (!bounds.valid()) throw std::domain_error("truncated_expectation: invalid bounds");
  const double loc = f + gamma;
  const double za = (bounds.a - loc) / sigma;
  const double zb = (bounds.b - loc) / sigma;
  const double mass = interior_mass(za, zb);
  if (!(mass > 1e-300))
    throw std::domain_error("truncated_expectation: degenerate conditioning, no interior mass");
  return loc + sigma * (pdf_or_zero(za) - pdf_or_zero(zb)) / mass;
}

std::pair<double, double> censoring_probs(double f, double gamma, double sigma,
                                          const CensoringBounds& bounds) {
  if (!(sigma > 0.0)) throw std::domain_error("censoring_probs: sigma must be > 0");
  const double loc = f + gamma;
  const double p_below = std::isfinite(bounds.a) ? std_normal_cdf((bounds.a - loc) / sigma) : 0.0;
  const double p_above = std::isfinite(bounds.b) ? std_normal_sf((bounds.b - loc) / sigma) : 0.0;
  return {p_below, p_above};
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

std::vector<PredictionRecord> posterior_predict(const PosteriorDraws& draws,
                                                const CensoringBounds& bounds, double level,
                                                RngStream& rng) {
  const std::size_t d_count = draws.size();
  if (d_count == 0) throw std::invalid_argument("posterior_predict: zero retained draws");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("posterior_predict: bad level");
  const Eigen::Index n_rows = draws.f_test.front().size();
  const bool dp = draws.error_model == ErrorModel::kDp;

  std::vector<PredictionRecord> out(static_cast<std::size_t>(n_rows));
  std::vector<double> latent_sim(d_count), outcome_sim(d_count);
  const double q_lo = 0.5 * (1.0 - level);
  const double q_hi = 1.0 - q_lo;

  for (Eigen::Index i = 0; i < n_rows; ++i) {
    PredictionRecord rec;
    rec.row = static_cast<int>(i);
    rec.level = level;
    double sum_f = 0.0, sum_e = 0.0, sum_pb = 0.0, sum_pa = 0.0;
    for (std::size_t d = 0; d < d_count; ++d) {
      const double f = draws.f_test[d][i];
      double g = 0.0, s = 0.0;
      if (dp) {
        const auto& pr = draws.oos_test[d][static_cast<std::size_t>(i)];
        g = pr.first;
        s = pr.second;
      } else {
        s = draws.sigma[d];
      }
      sum_f += f;
      sum_e += censored_expectation(f, g, s, bounds);
      const auto [pb, pa] = censoring_probs(f, g, s, bounds);
      sum_pb += pb;
      sum_pa += pa;
      const double y_star = f + g + s * rng.normal();
      latent_sim[d] = y_star;
      outcome_sim[d] = bounds.censor(y_star);
    }
    const double inv_d = 1.0 / static_cast<double>(d_count);
    rec.latent_mean = sum_f * inv_d;
    rec.outcome_mean = sum_e * inv_d;
    rec.p_below = sum_pb * inv_d;
    rec.p_above = sum_pa * inv_d;
    rec.latent_lower = empirical_quantile(latent_sim, q_lo);
    rec.latent_upper = empirical_quantile(latent_sim, q_hi);
    rec.outcome_lower = empirical_quantile(outcome_sim, q_lo);
    rec.outcome_upper = empirical_quantile(outcome_sim, q_hi);
    out[static_cast<std::size_t>(i)] = rec;
  }
  return out;
}

}  // namespace tobart
