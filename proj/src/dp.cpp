#include "tobart/dp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tobart/stats.hpp"

namespace tobart {

namespace {
// Gamma(2,2) prior on the concentration parameter.
constexpr double kC1 = 2.0;
constexpr double kC2 = 2.0;
constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_density(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * kLog2Pi - std::log(sigma) - 0.5 * z * z;
}

// Draw (gamma, sigma) from the base measure.
std::pair<double, double> draw_g0(RngStream& rng, const BaseMeasure& base) {
  const double sigma2 = base.nu * base.lambda / rng.chi_square(base.nu);
  const double sigma = std::sqrt(sigma2);
  const double gamma = base.gamma0 + sigma / std::sqrt(base.k0) * rng.normal();
  return {gamma, sigma};
}

}  // namespace

DpState DpState::make(int n, const BaseMeasure& base, double sigma_init) {
  if (n < 1) throw std::invalid_argument("DpState: need at least one observation");
  DpState s;
  s.base = base;
  s.assignment.assign(static_cast<std::size_t>(n), 0);
  s.clusters.push_back(DpCluster{base.gamma0, sigma_init, n});
  s.alpha_dp = 1.0;
  return s;
}

double DpState::largest_share() const {
  int largest = 0;
  for (const auto& c : clusters) largest = std::max(largest, c.size);
  return static_cast<double>(largest) / static_cast<double>(n());
}

bool DpState::valid() const {
  std::vector<int> sizes(clusters.size(), 0);
  for (int a : assignment) {
    if (a < 0 || a >= cluster_count()) return false;
    ++sizes[static_cast<std::size_t>(a)];
  }
  for (std::size_t j = 0; j < clusters.size(); ++j)
    if (sizes[j] != clusters[j].size || clusters[j].size == 0) return false;
  return true;
}

std::vector<double> assignment_probabilities(const DpState& state, double u_i) {
  const BaseMeasure& base = state.base;
  const int k = state.cluster_count();
  // log weights: q_0 = alpha t_nu(u | gamma0, lambda (1 + 1/k0)),
  //              q_r = n_r N(u | gamma_r, sigma_r^2); log-sum-exp normalized
  std::vector<double> log_q(static_cast<std::size_t>(k) + 1);
  log_q[0] = std::log(state.alpha_dp) +
             log_t_density(u_i, base.nu, base.gamma0, base.lambda * (1.0 + 1.0 / base.k0));
  for (int r = 0; r < k; ++r) {
    const DpCluster& c = state.clusters[r];
    log_q[static_cast<std::size_t>(r) + 1] =
        std::log(static_cast<double>(c.size)) + log_normal_density(u_i, c.gamma, c.sigma);
  }
  const double max_lq = *std::max_element(log_q.begin(), log_q.end());
  std::vector<double> q(log_q.size());
  double total = 0.0;
  for (std::size_t r = 0; r < q.size(); ++r) {
    q[r] = std::exp(log_q[r] - max_lq);
    total += q[r];
  }
  for (auto& v : q) v /= total;
  return q;
}

void assign_observation(RngStream& rng, int i, double u_i, DpState& state) {
  const BaseMeasure& base = state.base;
  // detach i from its cluster, deleting the cluster if it empties
  {
    const int j = state.assignment[i];
    if (--state.clusters[j].size == 0) {
      const int last = state.cluster_count() - 1;
      if (j != last) {
        state.clusters[j] = state.clusters[last];
        for (auto& a : state.assignment)
          if (a == last) a = j;
      }
      state.clusters.pop_back();
    }
    state.assignment[i] = -1;
  }

  const std::vector<double> q = assignment_probabilities(state, u_i);
  const std::size_t pick = rng.categorical(q);

  if (pick == 0) {
    // new cluster from the single-observation conjugate posterior
    const double dev = u_i - base.gamma0;
    const double sigma2 = sample_inverse_gamma(
        rng, 0.5 * (base.nu + 1.0),
        0.5 * base.nu * base.lambda + dev * dev / (2.0 * (1.0 + 1.0 / base.k0)));
    const double sigma = std::sqrt(sigma2);
    const double gamma =
        base.gamma0 + dev / (base.k0 + 1.0) + sigma / std::sqrt(base.k0 + 1.0) * rng.normal();
    state.assignment[i] = state.cluster_count();
    state.clusters.push_back(DpCluster{gamma, sigma, 1});
  } else {
    const int r = static_cast<int>(pick) - 1;
    state.assignment[i] = r;
    ++state.clusters[r].size;
  }
}

void remix_clusters(RngStream& rng, DpState& state, const Eigen::VectorXd& u) {
  const BaseMeasure& base = state.base;
  const int k = state.cluster_count();
  std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < state.n(); ++i) sum[state.assignment[i]] += u[i];
  std::vector<double> ssq(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < state.n(); ++i) {
    const int j = state.assignment[i];
    const double d = u[i] - sum[j] / state.clusters[j].size;
    ssq[j] += d * d;
  }
  for (int j = 0; j < k; ++j) {
    DpCluster& c = state.clusters[j];
    const double nj = static_cast<double>(c.size);
    const double ubar = sum[j] / nj;
    const double dev = ubar - base.gamma0;
    const double scale = 0.5 * base.nu * base.lambda + 0.5 * ssq[j] +
                         0.5 * (nj * base.k0 / (base.k0 + nj)) * dev * dev;
    const double sigma2 = sample_inverse_gamma(rng, 0.5 * (base.nu + nj), scale);
    c.sigma = std::sqrt(sigma2);
    const double post_mean = base.gamma0 + nj * dev / (base.k0 + nj);
    c.gamma = post_mean + c.sigma / std::sqrt(base.k0 + nj) * rng.normal();
  }
}

double alpha_mixing_probability(double k, double n, double kappa) {
  const double odds = (kC1 + k - 1.0) / (n * (kC2 - std::log(kappa)));
  return odds / (1.0 + odds);
}

void draw_alpha(RngStream& rng, DpState& state) {
  const double n = static_cast<double>(state.n());
  const double k = static_cast<double>(state.cluster_count());
  const double kappa = rng.beta(state.alpha_dp + 1.0, n);
  const double rate = kC2 - std::log(kappa);
  const double p_kappa = alpha_mixing_probability(k, n, kappa);
  const double shape = (rng.uniform() < p_kappa) ? kC1 + k : kC1 + k - 1.0;
  state.alpha_dp = rng.gamma(shape) / rate;
}

std::pair<double, double> draw_oos_error(RngStream& rng, const std::vector<DpCluster>& clusters,
                                         double alpha_dp, const BaseMeasure& base) {
  double n = 0.0;
  for (const auto& c : clusters) n += c.size;
  const double u = rng.uniform() * (alpha_dp + n);
  if (u < alpha_dp || clusters.empty()) return draw_g0(rng, base);
  double acc = alpha_dp;
  for (const auto& c : clusters) {
    acc += c.size;
    if (u < acc) return {c.gamma, c.sigma};
  }
  return {clusters.back().gamma, clusters.back().sigma};
}

std::pair<double, double> draw_oos_error(RngStream& rng, const DpState& state) {
  return draw_oos_error(rng, state.clusters, state.alpha_dp, state.base);
}

void dp_sweep(RngStream& rng, DpState& state, const Eigen::VectorXd& u) {
  for (int i = 0; i < state.n(); ++i) assign_observation(rng, i, u[i], state);
  remix_clusters(rng, state, u);
  draw_alpha(rng, state);
}

}  // namespace tobart
