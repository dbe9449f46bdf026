#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "tobart/rng.hpp"
#include "tobart/tree.hpp"

namespace tobart {

enum class TreeMode { kHard, kSoft };
enum class MoveKind { kGrow, kPrune, kChange };

// Sufficient statistics of one leaf for the marginalized leaf likelihood:
// weighted sums over the observations routed to it.
struct LeafStats {
  double n = 0.0;
  double sum_log_sigma = 0.0;
  double sum_prec = 0.0;      // sum 1/sigma_i^2
  double sum_r_prec = 0.0;    // sum R_i/sigma_i^2
  double sum_r2_prec = 0.0;   // sum R_i^2/sigma_i^2

  void add(double r, double sigma_i) {
    const double w = 1.0 / (sigma_i * sigma_i);
    n += 1.0;
    sum_log_sigma += std::log(sigma_i);
    sum_prec += w;
    sum_r_prec += r * w;
    sum_r2_prec += r * r * w;
  }
};

// Probability that a node at the given depth splits: alpha (1+d)^(-beta).
double split_prior_prob(int depth, double alpha_tree, double beta_tree);

// Log of the integrated leaf likelihood with the leaf mean marginalized out
// under mu ~ N(0, sigma_mu^2).
double leaf_log_marginal(const LeafStats& stats, double sigma_mu);

struct ForestOptions {
  int m = 200;
  TreeMode mode = TreeMode::kHard;
  double alpha_tree = 0.95;
  double beta_tree = 2.0;
  double kappa = 2.0;
  int min_leaf = 5;
  double p_grow = 0.3;
  double p_prune = 0.3;
  double p_change = 0.4;
  bool sparse = false;                // Dirichlet split-probability updates
  double bandwidth_prior_mean = 0.1;  // soft gating; scaled by covariate range
  double bandwidth_step = 0.3;        // random-walk scale on log tau
};

// Sum-of-trees state for one chain. `fitted` caches the forest prediction at
// the training rows; it is maintained incrementally and recomputed from
// scratch at the end of every sweep.
struct ForestState {
  ForestOptions opts;
  std::vector<Tree> trees;
  std::vector<double> tree_bandwidth;  // shared per-tree gating bandwidth
  Eigen::VectorXd fitted;
  double sigma_mu = 1.0;
  std::vector<double> split_probs;  // s, length p, sums to 1
  double a_sparse = 1.0;
  double bandwidth_prior = 0.1;  // exponential prior mean, resolved at make()

  static ForestState make(const ForestOptions& opts, const Eigen::MatrixXd& x,
                          double outcome_range);

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  double predict_row(const Eigen::RowVectorXd& x) const;
};

struct Proposal {
  Tree tree;
  double log_proposal_ratio = 0.0;  // log q(T'->T) - log q(T->T')
  double log_prior_ratio = 0.0;     // log p(T') - log p(T)
  MoveKind kind = MoveKind::kGrow;
  bool valid = true;  // false: drawn variable had no usable cutpoint
};

// One MH topology proposal. Empty optional means no legal move of this kind
// exists (caller resamples the kind among the available ones).
std::optional<Proposal> propose(RngStream& rng, const Tree& tree, MoveKind kind,
                                const std::vector<double>& split_probs,
                                const Eigen::MatrixXd& x,
                                const std::vector<std::vector<int>>& leaf_members,
                                const ForestOptions& opts, double bandwidth);

// Gibbs draw of all leaf means given routing and per-observation residuals
// (hard mode; soft mode draws are handled inside the sweep).
void draw_leaf_params(RngStream& rng, Tree& tree,
                      const std::vector<std::vector<int>>& leaf_members,
                      const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma_obs,
                      double sigma_mu);

// Per-observation error inputs for a sweep: residual location shift gamma_i
// and scale sigma_i (homoskedastic mode passes constants).
struct ErrorValues {
  Eigen::VectorXd gamma;
  Eigen::VectorXd sigma;
};

// One full backfitting sweep over all m trees (Gibbs scan); updates trees,
// leaf values and the fitted cache in place.
void backfit_sweep(RngStream& rng, ForestState& forest, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y_star, const ErrorValues& err);

// Number of internal nodes splitting on each variable, across all trees.
std::vector<int> count_split_vars(const ForestState& forest, int p);

// Conjugate Dirichlet update of the splitting probabilities s.
void update_split_probs(RngStream& rng, ForestState& forest, const std::vector<int>& counts);

// Grid Gibbs step for the Dirichlet sparsity mass a with a Beta(0.5,1) prior
// on the transform a/(a+p).
void update_sparsity(RngStream& rng, ForestState& forest, int grid_size = 100);

// Random-walk MH on each tree's shared log-bandwidth against the soft
// marginal likelihood, followed by a conditional leaf redraw (soft mode).
void update_bandwidths(RngStream& rng, ForestState& forest, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y_star, const ErrorValues& err);

// Routing of observations to leaves (leaf order = tree.leaves()).
std::vector<std::vector<int>> route_members(const Tree& tree, const Eigen::MatrixXd& x);

// Marginal log-likelihood of the whole tree given residuals. Hard mode sums
// leaf_log_marginal over leaves; soft mode integrates the leaf vector out of
// the dense gating model.
double tree_log_marginal(const Tree& tree, const Eigen::MatrixXd& x,
                         const std::vector<std::vector<int>>& leaf_members,
                         const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma_obs,
                         double sigma_mu, TreeMode mode);

// Gating weight matrix (rows x leaves) of a soft tree.
Eigen::MatrixXd soft_weight_matrix(const Tree& tree, const Eigen::MatrixXd& x);

}  // namespace tobart
