#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "tobart/rng.hpp"

namespace tobart {

// Normal-inverse-chi-square base measure of the error mixture:
// sigma^2 ~ nu*lambda/chisq_nu, gamma | sigma ~ N(gamma0, sigma^2/k0).
struct BaseMeasure {
  double nu = 10.0;
  double lambda = 1.0;
  double gamma0 = 0.0;
  double k0 = 1.0;
  double k_s = 10.0;
};

struct DpCluster {
  double gamma = 0.0;
  double sigma = 1.0;
  int size = 0;
};

// Dirichlet-process mixture state over per-observation error parameters.
// Every observation's (gamma_i, sigma_i) equals its cluster's values; the
// cluster list carries no empty clusters.
struct DpState {
  std::vector<int> assignment;      // cluster index per observation
  std::vector<DpCluster> clusters;  // compact
  double alpha_dp = 1.0;
  BaseMeasure base;

  static DpState make(int n, const BaseMeasure& base, double sigma_init);

  int n() const { return static_cast<int>(assignment.size()); }
  int cluster_count() const { return static_cast<int>(clusters.size()); }
  double gamma_of(int i) const { return clusters[assignment[i]].gamma; }
  double sigma_of(int i) const { return clusters[assignment[i]].sigma; }
  double largest_share() const;
  bool valid() const;
};

// Polya-urn reassignment of observation i given its residual u_i. The
// observation is first detached (its cluster deleted if emptied), then either
// joins an existing cluster or opens a new one with conjugate G0 draws.
void assign_observation(RngStream& rng, int i, double u_i, DpState& state);

// Normalized assignment probabilities for a residual against the current
// cluster list: index 0 is the new-cluster weight alpha t_nu(...), index r+1
// is n_r N(u | gamma_r, sigma_r^2). Computed in log space.
std::vector<double> assignment_probabilities(const DpState& state, double u_i);

// Escobar-West mixing probability p_kappa given the auxiliary draw kappa:
// odds p/(1-p) = (c1 + k - 1) / (n (c2 - log kappa)) with c1 = c2 = 2.
double alpha_mixing_probability(double k, double n, double kappa);

// Within-cluster remix: redraw each cluster's (gamma*, sigma*) from the
// conjugate posterior given its members' residuals.
void remix_clusters(RngStream& rng, DpState& state, const Eigen::VectorXd& u);

// Escobar-West auxiliary-variable draw of the concentration parameter under
// the Gamma(2,2) prior.
void draw_alpha(RngStream& rng, DpState& state);

// Out-of-sample error parameters: copy a training observation's pair with
// probability 1/(alpha+n) each, or draw fresh from G0 with the remaining
// alpha/(alpha+n).
std::pair<double, double> draw_oos_error(RngStream& rng, const DpState& state);
std::pair<double, double> draw_oos_error(RngStream& rng, const std::vector<DpCluster>& clusters,
                                         double alpha_dp, const BaseMeasure& base);

// One full error-model pass: reassign every observation, remix, draw alpha.
void dp_sweep(RngStream& rng, DpState& state, const Eigen::VectorXd& u);

}  // namespace tobart
