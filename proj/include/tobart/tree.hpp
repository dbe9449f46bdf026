#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace tobart {

// One node of a binary regression tree. Internal nodes carry a split rule
// {x[var] <= split -> left, x[var] > split -> right} plus a gating bandwidth
// for soft prediction; leaves carry the scalar mu.
struct TreeNode {
  int var = -1;  // -1 marks a leaf
  double split = 0.0;
  double bandwidth = 1.0;
  double mu = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;

  bool is_leaf() const { return var < 0; }
};

// Arena-backed tree; node 0 is the root and the arena has no holes.
class Tree {
 public:
  Tree() : nodes_(1) {}

  // Rebuild from a raw arena (deserialization); validates reachability.
  static Tree from_nodes(std::vector<TreeNode> nodes);

  const TreeNode& node(int i) const { return nodes_[i]; }
  TreeNode& node(int i) { return nodes_[i]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  bool is_stump() const { return nodes_.size() == 1; }

  int depth(int i) const {
    int d = 0;
    while (nodes_[i].parent >= 0) {
      i = nodes_[i].parent;
      ++d;
    }
    return d;
  }

  // Leaf indices in depth-first (left before right) order; this is the
  // canonical leaf ordering used by soft weights and parameter draws.
  std::vector<int> leaves() const;

  // Internal nodes whose children are both leaves.
  std::vector<int> nogs() const;

  std::vector<int> internal_nodes() const;

  // Split the given leaf; returns {left, right} child indices.
  std::pair<int, int> grow(int leaf, int var, double split, double bandwidth);

  // Collapse a no-grandchild internal node back to a leaf (children removed,
  // arena recompacted).
  void prune(int nog);

  // Route one covariate row to its leaf index.
  int route(const Eigen::RowVectorXd& x) const;

  bool structurally_valid() const;

 private:
  std::vector<TreeNode> nodes_;
};

// Leaf value of the unique leaf whose path rules x satisfies.
double hard_predict(const Tree& tree, const Eigen::RowVectorXd& x);

// Per-leaf logistic gating weights (leaves() order); each in (0,1), sum 1.
std::vector<double> soft_weights(const Tree& tree, const Eigen::RowVectorXd& x);

double soft_predict(const Tree& tree, const Eigen::RowVectorXd& x);

}  // namespace tobart
