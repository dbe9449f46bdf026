#include "tobart/forest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tobart/stats.hpp"

namespace tobart {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

double split_prior_prob(int depth, double alpha_tree, double beta_tree) {
  if (!(alpha_tree > 0.0 && alpha_tree < 1.0) || beta_tree < 0.0)
    throw std::domain_error("split_prior_prob: need 0 < alpha < 1, beta >= 0");
  return alpha_tree * std::pow(1.0 + static_cast<double>(depth), -beta_tree);
}

double leaf_log_marginal(const LeafStats& stats, double sigma_mu) {
  if (stats.n <= 0.0) throw std::domain_error("leaf_log_marginal: empty leaf");
  const double sm2 = sigma_mu * sigma_mu;
  return -0.5 * stats.n * kLog2Pi - stats.sum_log_sigma -
         0.5 * std::log1p(sm2 * stats.sum_prec) - 0.5 * stats.sum_r2_prec +
         0.5 * stats.sum_r_prec * stats.sum_r_prec / (1.0 / sm2 + stats.sum_prec);
}

ForestState ForestState::make(const ForestOptions& opts, const Eigen::MatrixXd& x,
                              double outcome_range) {
  if (opts.m < 1) throw std::invalid_argument("forest: need at least one tree");
  if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("forest: empty design matrix");
  ForestState f;
  f.opts = opts;
  f.trees.assign(static_cast<std::size_t>(opts.m), Tree{});
  f.fitted = Eigen::VectorXd::Zero(x.rows());
  // Leaf prior scaled so the sum-of-trees prior spans the outcome range,
  // matching the usual 0.5/(kappa sqrt(m)) rule on a range-one outcome.
  f.sigma_mu = outcome_range * 0.5 / (opts.kappa * std::sqrt(static_cast<double>(opts.m)));
  const int p = static_cast<int>(x.cols());
  f.split_probs.assign(p, 1.0 / p);
  f.a_sparse = static_cast<double>(p);
  double mean_range = 0.0;
  for (int j = 0; j < p; ++j) mean_range += x.col(j).maxCoeff() - x.col(j).minCoeff();
  mean_range /= p;
  f.bandwidth_prior = opts.bandwidth_prior_mean * std::max(mean_range, 1e-12);
  f.tree_bandwidth.assign(static_cast<std::size_t>(opts.m), f.bandwidth_prior);
  return f;
}

Eigen::VectorXd ForestState::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (const auto& tree : trees) {
    if (opts.mode == TreeMode::kHard) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += hard_predict(tree, x.row(i));
    } else {
      for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += soft_predict(tree, x.row(i));
    }
  }
  return out;
}

double ForestState::predict_row(const Eigen::RowVectorXd& x) const {
  double s = 0.0;
  for (const auto& tree : trees)
    s += (opts.mode == TreeMode::kHard) ? hard_predict(tree, x) : soft_predict(tree, x);
  return s;
}

std::vector<std::vector<int>> route_members(const Tree& tree, const Eigen::MatrixXd& x) {
  const auto leaves = tree.leaves();
  std::vector<int> pos(static_cast<std::size_t>(tree.size()), -1);
  for (std::size_t k = 0; k < leaves.size(); ++k) pos[leaves[k]] = static_cast<int>(k);
  std::vector<std::vector<int>> members(leaves.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    members[pos[tree.route(x.row(i))]].push_back(static_cast<int>(i));
  return members;
}

Eigen::MatrixXd soft_weight_matrix(const Tree& tree, const Eigen::MatrixXd& x) {
  const auto leaves = tree.leaves();
  Eigen::MatrixXd omega(x.rows(), static_cast<Eigen::Index>(leaves.size()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto w = soft_weights(tree, x.row(i));
    for (std::size_t k = 0; k < w.size(); ++k) omega(i, static_cast<Eigen::Index>(k)) = w[k];
  }
  return omega;
}

namespace {

// Soft-tree marginal likelihood: r = Omega mu + eps with mu ~ N(0, sm^2 I),
// eps_i ~ N(0, sigma_i^2), mu integrated out by the Woodbury identity.
struct SoftMarginal {
  double log_lik;
  Eigen::LLT<Eigen::MatrixXd> llt;  // factor of M = A + I/sm^2
  Eigen::VectorXd b;                // Omega' W r
};

SoftMarginal soft_marginal(const Tree& tree, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma_obs,
                           double sigma_mu) {
  const Eigen::MatrixXd omega = soft_weight_matrix(tree, x);
  const Eigen::Index n = x.rows();
  const Eigen::Index L = omega.cols();
  Eigen::VectorXd w(n);
  double base = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = 1.0 / (sigma_obs[i] * sigma_obs[i]);
    base += kLog2Pi + 2.0 * std::log(sigma_obs[i]) + w[i] * resid[i] * resid[i];
  }
  const Eigen::MatrixXd ow = omega.transpose() * w.asDiagonal();
  Eigen::MatrixXd m = ow * omega;
  const double sm2 = sigma_mu * sigma_mu;
  m.diagonal().array() += 1.0 / sm2;
  SoftMarginal out;
  out.b = ow * resid;
  out.llt.compute(m);
  double logdet_m = 0.0;
  for (Eigen::Index k = 0; k < L; ++k) logdet_m += std::log(out.llt.matrixL()(k, k));
  logdet_m *= 2.0;
  const Eigen::VectorXd mb = out.llt.solve(out.b);
  out.log_lik = -0.5 * base - 0.5 * (L * std::log(sm2) + logdet_m) + 0.5 * out.b.dot(mb);
  return out;
}

void draw_soft_leaf_params(RngStream& rng, Tree& tree, const SoftMarginal& sm) {
  const auto leaves = tree.leaves();
  const Eigen::Index L = static_cast<Eigen::Index>(leaves.size());
  const Eigen::VectorXd mean = sm.llt.solve(sm.b);
  Eigen::VectorXd z(L);
  for (Eigen::Index k = 0; k < L; ++k) z[k] = rng.normal();
  // M = L L', draw mean + L'^{-1} z
  const Eigen::VectorXd noise = sm.llt.matrixU().solve(z);
  for (Eigen::Index k = 0; k < L; ++k) tree.node(leaves[k]).mu = mean[k] + noise[k];
}

// Sorted distinct values of covariate `var` over the given observations.
std::vector<double> distinct_values(const Eigen::MatrixXd& x, int var,
                                    const std::vector<int>& rows) {
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (int i : rows) vals.push_back(x(i, var));
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

int count_growable(const std::vector<std::vector<int>>& members, int min_leaf) {
  int c = 0;
  for (const auto& m : members)
    if (static_cast<int>(m.size()) >= 2 * min_leaf) ++c;
  return c;
}

// Kind-probability mass over the moves available in a given tree state.
double kind_mass(bool grow_ok, bool nog_ok, const ForestOptions& opts) {
  double mass = 0.0;
  if (grow_ok) mass += opts.p_grow;
  if (nog_ok) mass += opts.p_prune + opts.p_change;
  return mass;
}

}  // namespace

std::optional<Proposal> propose(RngStream& rng, const Tree& tree, MoveKind kind,
                                const std::vector<double>& split_probs,
                                const Eigen::MatrixXd& x,
                                const std::vector<std::vector<int>>& leaf_members,
                                const ForestOptions& opts, double bandwidth) {
  const auto leaves = tree.leaves();
  const auto nogs = tree.nogs();
  const int n_growable = count_growable(leaf_members, opts.min_leaf);
  const bool grow_ok = n_growable > 0;
  const bool nog_ok = !nogs.empty();
  const double mass_cur = kind_mass(grow_ok, nog_ok, opts);

  switch (kind) {
    case MoveKind::kGrow: {
      if (!grow_ok) return std::nullopt;
      // pick a growable leaf uniformly
      std::vector<int> candidates;
      for (std::size_t k = 0; k < leaves.size(); ++k)
        if (static_cast<int>(leaf_members[k].size()) >= 2 * opts.min_leaf)
          candidates.push_back(static_cast<int>(k));
      const int pick = candidates[rng.uniform_index(candidates.size())];
      const int leaf = leaves[pick];
      const int var = static_cast<int>(rng.categorical(split_probs));
      const auto vals = distinct_values(x, var, leaf_members[pick]);
      Proposal prop;
      prop.kind = kind;
      if (vals.size() < 2) {  // drawn variable is constant in this leaf
        prop.tree = tree;
        prop.valid = false;
        return prop;
      }
      const std::size_t ci = rng.uniform_index(vals.size() - 1);
      const double cut = vals[ci];

      Tree grown = tree;
      grown.grow(leaf, var, cut, bandwidth);
      prop.tree = std::move(grown);

      const int depth = tree.depth(leaf);
      const double ps = split_prior_prob(depth, opts.alpha_tree, opts.beta_tree);
      const double ps_child = split_prior_prob(depth + 1, opts.alpha_tree, opts.beta_tree);
      const double log_rule = std::log(split_probs[var]) -
                              std::log(static_cast<double>(vals.size() - 1));
      prop.log_prior_ratio = std::log(ps) + 2.0 * std::log1p(-ps_child) + log_rule -
                             std::log1p(-ps);

      // forward draw density
      const double log_q_fwd = std::log(opts.p_grow / mass_cur) -
                               std::log(static_cast<double>(n_growable)) + log_rule;
      // reverse: a PRUNE that removes the new split
      int left_count = 0;
      for (int i : leaf_members[pick])
        if (x(i, var) <= cut) ++left_count;
      const int right_count = static_cast<int>(leaf_members[pick].size()) - left_count;
      int growable_new = n_growable;
      if (static_cast<int>(leaf_members[pick].size()) >= 2 * opts.min_leaf) --growable_new;
      if (left_count >= 2 * opts.min_leaf) ++growable_new;
      if (right_count >= 2 * opts.min_leaf) ++growable_new;
      int nogs_new = static_cast<int>(nogs.size()) + 1;
      const int parent = tree.node(leaf).parent;
      if (parent >= 0 && tree.node(tree.node(parent).left).is_leaf() &&
          tree.node(tree.node(parent).right).is_leaf())
        --nogs_new;  // the parent stops being childless-only
      const double mass_new = kind_mass(growable_new > 0, true, opts);
      const double log_q_rev = std::log(opts.p_prune / mass_new) -
                               std::log(static_cast<double>(nogs_new));
      prop.log_proposal_ratio = log_q_rev - log_q_fwd;
      return prop;
    }

    case MoveKind::kPrune: {
      if (!nog_ok) return std::nullopt;
      const int nog = nogs[rng.uniform_index(nogs.size())];
      const TreeNode& nd = tree.node(nog);
      const int var = nd.var;
      const double cut = nd.split;

      // members of the collapsed leaf = union of the two child leaves
      std::vector<int> pos(static_cast<std::size_t>(tree.size()), -1);
      for (std::size_t k = 0; k < leaves.size(); ++k) pos[leaves[k]] = static_cast<int>(k);
      std::vector<int> merged = leaf_members[pos[nd.left]];
      merged.insert(merged.end(), leaf_members[pos[nd.right]].begin(),
                    leaf_members[pos[nd.right]].end());

      Proposal prop;
      prop.kind = kind;
      Tree pruned = tree;
      pruned.prune(nog);
      prop.tree = std::move(pruned);

      const int depth = tree.depth(nog);
      const double ps = split_prior_prob(depth, opts.alpha_tree, opts.beta_tree);
      const double ps_child = split_prior_prob(depth + 1, opts.alpha_tree, opts.beta_tree);
      const auto vals = distinct_values(x, var, merged);
      const double log_rule = std::log(split_probs[var]) -
                              std::log(static_cast<double>(vals.size() - 1));
      prop.log_prior_ratio = std::log1p(-ps) -
                             (std::log(ps) + 2.0 * std::log1p(-ps_child) + log_rule);

      const double log_q_fwd = std::log(opts.p_prune / mass_cur) -
                               std::log(static_cast<double>(nogs.size()));
      // reverse: GROW at the merged leaf reproducing (var, cut)
      int growable_new = n_growable;
      if (static_cast<int>(leaf_members[pos[nd.left]].size()) >= 2 * opts.min_leaf)
        --growable_new;
      if (static_cast<int>(leaf_members[pos[nd.right]].size()) >= 2 * opts.min_leaf)
        --growable_new;
      ++growable_new;  // merged leaf has >= 2*min_leaf members by construction
      const auto nogs_after = prop.tree.nogs();
      const double mass_new = kind_mass(growable_new > 0, !nogs_after.empty(), opts);
      const double log_q_rev = std::log(opts.p_grow / mass_new) -
                               std::log(static_cast<double>(growable_new)) + log_rule;
      prop.log_proposal_ratio = log_q_rev - log_q_fwd;
      return prop;
    }

    case MoveKind::kChange: {
      if (!nog_ok) return std::nullopt;
      const int nog = nogs[rng.uniform_index(nogs.size())];
      const TreeNode& nd = tree.node(nog);
      std::vector<int> pos(static_cast<std::size_t>(tree.size()), -1);
      for (std::size_t k = 0; k < leaves.size(); ++k) pos[leaves[k]] = static_cast<int>(k);
      std::vector<int> members = leaf_members[pos[nd.left]];
      members.insert(members.end(), leaf_members[pos[nd.right]].begin(),
                     leaf_members[pos[nd.right]].end());

      const int new_var = static_cast<int>(rng.categorical(split_probs));
      const auto new_vals = distinct_values(x, new_var, members);
      Proposal prop;
      prop.kind = kind;
      if (new_vals.size() < 2) {
        prop.tree = tree;
        prop.valid = false;
        return prop;
      }
      const double new_cut = new_vals[rng.uniform_index(new_vals.size() - 1)];
      Tree changed = tree;
      changed.node(nog).var = new_var;
      changed.node(nog).split = new_cut;
      prop.tree = std::move(changed);

      const auto old_vals = distinct_values(x, nd.var, members);
      const double log_rule_new = std::log(split_probs[new_var]) -
                                  std::log(static_cast<double>(new_vals.size() - 1));
      const double log_rule_old = std::log(split_probs[nd.var]) -
                                  std::log(static_cast<double>(old_vals.size() - 1));
      prop.log_prior_ratio = log_rule_new - log_rule_old;
      prop.log_proposal_ratio = log_rule_old - log_rule_new;
      return prop;
    }
  }
  return std::nullopt;
}

void draw_leaf_params(RngStream& rng, Tree& tree,
                      const std::vector<std::vector<int>>& leaf_members,
                      const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma_obs,
                      double sigma_mu) {
  const auto leaves = tree.leaves();
  const double prior_prec = 1.0 / (sigma_mu * sigma_mu);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    if (leaf_members[k].empty()) throw std::logic_error("draw_leaf_params: empty leaf");
    double sum_prec = 0.0, sum_r_prec = 0.0;
    for (int i : leaf_members[k]) {
      const double w = 1.0 / (sigma_obs[i] * sigma_obs[i]);
      sum_prec += w;
      sum_r_prec += resid[i] * w;
    }
    const double post_var = 1.0 / (prior_prec + sum_prec);
    const double post_mean = post_var * sum_r_prec;
    tree.node(leaves[k]).mu = post_mean + std::sqrt(post_var) * rng.normal();
  }
}

double tree_log_marginal(const Tree& tree, const Eigen::MatrixXd& x,
                         const std::vector<std::vector<int>>& leaf_members,
                         const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma_obs,
                         double sigma_mu, TreeMode mode) {
  if (mode == TreeMode::kSoft)
    return soft_marginal(tree, x, resid, sigma_obs, sigma_mu).log_lik;
  double total = 0.0;
  for (const auto& rows : leaf_members) {
    LeafStats stats;
    for (int i : rows) stats.add(resid[i], sigma_obs[i]);
    total += leaf_log_marginal(stats, sigma_mu);
  }
  return total;
}

namespace {

Eigen::VectorXd tree_fit(const Tree& tree, const Eigen::MatrixXd& x, TreeMode mode) {
  Eigen::VectorXd g(x.rows());
  if (mode == TreeMode::kHard) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) g[i] = hard_predict(tree, x.row(i));
  } else {
    for (Eigen::Index i = 0; i < x.rows(); ++i) g[i] = soft_predict(tree, x.row(i));
  }
  return g;
}

bool min_leaf_ok(const std::vector<std::vector<int>>& members, int min_leaf) {
  for (const auto& m : members)
    if (static_cast<int>(m.size()) < min_leaf) return false;
  return true;
}

}  // namespace

void backfit_sweep(RngStream& rng, ForestState& forest, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y_star, const ErrorValues& err) {
  const int m = static_cast<int>(forest.trees.size());
  const ForestOptions& opts = forest.opts;
  for (int k = 0; k < m; ++k) {
    Tree& tree = forest.trees[k];
    const Eigen::VectorXd g_old = tree_fit(tree, x, opts.mode);
    // partial residuals against the other m-1 trees
    const Eigen::VectorXd resid = y_star - err.gamma - (forest.fitted - g_old);
    auto members = route_members(tree, x);

    const bool grow_ok = count_growable(members, opts.min_leaf) > 0;
    const bool nog_ok = !tree.nogs().empty();
    double w[3] = {grow_ok ? opts.p_grow : 0.0, nog_ok ? opts.p_prune : 0.0,
                   nog_ok ? opts.p_change : 0.0};
    if (w[0] + w[1] + w[2] > 0.0) {
      // sample a move kind among the available ones
      const auto kind = static_cast<MoveKind>(rng.categorical(std::span<const double>(w, 3)));
      auto prop = propose(rng, tree, kind, forest.split_probs, x, members, opts,
                          forest.tree_bandwidth[k]);
      if (prop && prop->valid) {
        auto new_members = route_members(prop->tree, x);
        if (min_leaf_ok(new_members, opts.min_leaf)) {
          const double ll_old =
              tree_log_marginal(tree, x, members, resid, err.sigma, forest.sigma_mu, opts.mode);
          const double ll_new = tree_log_marginal(prop->tree, x, new_members, resid, err.sigma,
                                                  forest.sigma_mu, opts.mode);
          const double log_alpha =
              prop->log_proposal_ratio + prop->log_prior_ratio + ll_new - ll_old;
          if (std::log(rng.uniform_pos()) < log_alpha) {
            tree = std::move(prop->tree);
            members = std::move(new_members);
          }
        }
      }
    }

    if (opts.mode == TreeMode::kHard) {
      draw_leaf_params(rng, tree, members, resid, err.sigma, forest.sigma_mu);
    } else {
      const auto sm = soft_marginal(tree, x, resid, err.sigma, forest.sigma_mu);
      draw_soft_leaf_params(rng, tree, sm);
    }
    forest.fitted += tree_fit(tree, x, opts.mode) - g_old;
  }
  // guard against incremental drift
  forest.fitted = forest.predict(x);
}

std::vector<int> count_split_vars(const ForestState& forest, int p) {
  std::vector<int> counts(static_cast<std::size_t>(p), 0);
  for (const auto& tree : forest.trees)
    for (int i : tree.internal_nodes()) ++counts[static_cast<std::size_t>(tree.node(i).var)];
  return counts;
}

void update_split_probs(RngStream& rng, ForestState& forest, const std::vector<int>& counts) {
  const std::size_t p = forest.split_probs.size();
  std::vector<double> weights(p);
  for (std::size_t j = 0; j < p; ++j)
    weights[j] = forest.a_sparse / static_cast<double>(p) + counts[j];
  forest.split_probs = sample_dirichlet(rng, weights);
}

void update_sparsity(RngStream& rng, ForestState& forest, int grid_size) {
  if (grid_size <= 1) return;  // degenerate grid: keep current value
  const double p = static_cast<double>(forest.split_probs.size());
  double sum_log_s = 0.0;
  for (double s : forest.split_probs) sum_log_s += std::log(std::max(s, 1e-300));
  std::vector<double> log_w(static_cast<std::size_t>(grid_size));
  std::vector<double> a_grid(static_cast<std::size_t>(grid_size));
  for (int g = 0; g < grid_size; ++g) {
    const double rho = (g + 1.0) / (grid_size + 1.0);
    const double a = rho * p / (1.0 - rho);
    a_grid[g] = a;
    // Beta(0.5, 1) prior on rho plus the Dirichlet(a/p,...,a/p) likelihood of s
    log_w[g] = -0.5 * std::log(rho) + std::lgamma(a) - p * std::lgamma(a / p) +
               (a / p - 1.0) * sum_log_s;
  }
  const double max_lw = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  for (std::size_t g = 0; g < w.size(); ++g) w[g] = std::exp(log_w[g] - max_lw);
  forest.a_sparse = a_grid[rng.categorical(w)];
}

void update_bandwidths(RngStream& rng, ForestState& forest, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y_star, const ErrorValues& err) {
  if (forest.opts.mode != TreeMode::kSoft)
    throw std::logic_error("update_bandwidths: forest is not in soft mode");
  const double rate = 1.0 / forest.bandwidth_prior;
  for (std::size_t k = 0; k < forest.trees.size(); ++k) {
    Tree& tree = forest.trees[k];
    const Eigen::VectorXd g_old = tree_fit(tree, x, TreeMode::kSoft);
    const Eigen::VectorXd resid = y_star - err.gamma - (forest.fitted - g_old);

    const double tau = forest.tree_bandwidth[k];
    const double tau_new = tau * std::exp(forest.opts.bandwidth_step * rng.normal());
    if (tau_new != tau) {
      Tree cand = tree;
      for (int i = 0; i < cand.size(); ++i)
        if (!cand.node(i).is_leaf()) cand.node(i).bandwidth = tau_new;
      const double ll_old = soft_marginal(tree, x, resid, err.sigma, forest.sigma_mu).log_lik;
      const double ll_new = soft_marginal(cand, x, resid, err.sigma, forest.sigma_mu).log_lik;
      // exponential prior plus the log-scale proposal Jacobian
      const double log_alpha = ll_new - ll_old - rate * (tau_new - tau) +
                               std::log(tau_new) - std::log(tau);
      if (std::log(rng.uniform_pos()) < log_alpha) {
        tree = std::move(cand);
        forest.tree_bandwidth[k] = tau_new;
      }
    }
    // conditional leaf redraw under the (possibly) new gating
    const auto sm = soft_marginal(tree, x, resid, err.sigma, forest.sigma_mu);
    draw_soft_leaf_params(rng, tree, sm);
    forest.fitted += tree_fit(tree, x, TreeMode::kSoft) - g_old;
  }
}

}  // namespace tobart
