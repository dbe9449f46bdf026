#include "tobart/tree.hpp"

#include <cmath>
#include <stdexcept>

namespace tobart {

Tree Tree::from_nodes(std::vector<TreeNode> nodes) {
  if (nodes.empty()) throw std::invalid_argument("Tree::from_nodes: empty arena");
  Tree tree;
  tree.nodes_ = std::move(nodes);
  if (!tree.structurally_valid())
    throw std::invalid_argument("Tree::from_nodes: malformed tree");
  return tree;
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (nodes_[i].is_leaf()) {
      out.push_back(i);
    } else {
      // push right first so left is visited first
      stack.push_back(nodes_[i].right);
      stack.push_back(nodes_[i].left);
    }
  }
  return out;
}

std::vector<int> Tree::nogs() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const TreeNode& nd = nodes_[i];
    if (!nd.is_leaf() && nodes_[nd.left].is_leaf() && nodes_[nd.right].is_leaf())
      out.push_back(i);
  }
  return out;
}

std::vector<int> Tree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::pair<int, int> Tree::grow(int leaf, int var, double split, double bandwidth) {
  if (!nodes_[leaf].is_leaf()) throw std::logic_error("grow: node is not a leaf");
  const int l = size();
  const int r = l + 1;
  nodes_.push_back(TreeNode{});
  nodes_.push_back(TreeNode{});
  nodes_[l].parent = leaf;
  nodes_[r].parent = leaf;
  nodes_[leaf].var = var;
  nodes_[leaf].split = split;
  nodes_[leaf].bandwidth = bandwidth;
  nodes_[leaf].left = l;
  nodes_[leaf].right = r;
  return {l, r};
}

void Tree::prune(int nog) {
  const TreeNode& nd = nodes_[nog];
  if (nd.is_leaf() || !nodes_[nd.left].is_leaf() || !nodes_[nd.right].is_leaf())
    throw std::logic_error("prune: node has grandchildren or is a leaf");
  const int l = nd.left;
  const int r = nd.right;
  nodes_[nog].var = -1;
  nodes_[nog].left = -1;
  nodes_[nog].right = -1;
  // Swap-remove the two freed slots, highest index first.
  int victims[2] = {std::max(l, r), std::min(l, r)};
  for (int v : victims) {
    const int last = size() - 1;
    if (v != last) {
      nodes_[v] = nodes_[last];
      // re-point the moved node's family
      const TreeNode& moved = nodes_[v];
      if (moved.parent >= 0) {
        if (nodes_[moved.parent].left == last) nodes_[moved.parent].left = v;
        if (nodes_[moved.parent].right == last) nodes_[moved.parent].right = v;
      }
      if (!moved.is_leaf()) {
        nodes_[moved.left].parent = v;
        nodes_[moved.right].parent = v;
      }
    }
    nodes_.pop_back();
  }
}

int Tree::route(const Eigen::RowVectorXd& x) const {
  int i = 0;
  while (!nodes_[i].is_leaf())
    i = (x[nodes_[i].var] <= nodes_[i].split) ? nodes_[i].left : nodes_[i].right;
  return i;
}

bool Tree::structurally_valid() const {
  // every node reachable from the root exactly once; parents consistent
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<int> stack{0};
  std::size_t count = 0;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (i < 0 || i >= size() || seen[i]) return false;
    seen[i] = true;
    ++count;
    const TreeNode& nd = nodes_[i];
    if (!nd.is_leaf()) {
      if (nd.left < 0 || nd.right < 0) return false;
      if (nodes_[nd.left].parent != i || nodes_[nd.right].parent != i) return false;
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
  }
  return count == nodes_.size() && nodes_[0].parent == -1;
}

double hard_predict(const Tree& tree, const Eigen::RowVectorXd& x) {
  return tree.node(tree.route(x)).mu;
}

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void accumulate_weights(const Tree& tree, int node, double w,
                        const Eigen::RowVectorXd& x, std::vector<double>& out) {
  const TreeNode& nd = tree.node(node);
  if (nd.is_leaf()) {
    out.push_back(w);
    return;
  }
  if (!(nd.bandwidth > 0.0)) throw std::domain_error("soft_weights: bandwidth must be > 0");
  const double z = logistic((x[nd.var] - nd.split) / nd.bandwidth);
  accumulate_weights(tree, nd.left, w * (1.0 - z), x, out);
  accumulate_weights(tree, nd.right, w * z, x, out);
}

}  // namespace

std::vector<double> soft_weights(const Tree& tree, const Eigen::RowVectorXd& x) {
  std::vector<double> out;
  out.reserve(8);
  accumulate_weights(tree, 0, 1.0, x, out);
  return out;
}

double soft_predict(const Tree& tree, const Eigen::RowVectorXd& x) {
  const auto leaves = tree.leaves();
  const auto w = soft_weights(tree, x);
  double s = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) s += w[i] * tree.node(leaves[i]).mu;
  return s;
}

}  // namespace tobart
