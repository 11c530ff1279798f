#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/random.hpp"
#include "fptgrf/scores.hpp"
#include "fptgrf/splitting.hpp"

namespace fptgrf {

struct TreeConfig {
  SplitConstraints constraints;
  SplitFlavor flavor = SplitFlavor::fpt;
  SolverKind parent_solver = SolverKind::exact;
  bool honesty = true;
  OneStepScaling one_step_scaling = OneStepScaling::line_search;

  void validate() const {
    constraints.validate();
    if (flavor == SplitFlavor::grad && parent_solver != SolverKind::exact)
      throw ConfigError("the grad flavor requires the exact parent solver");
  }

  friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct SplitNode {
  std::size_t feature = 0;
  double threshold = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  friend bool operator==(const SplitNode&, const SplitNode&) = default;
};

struct LeafNode {
  std::size_t leaf = 0;
  friend bool operator==(const LeafNode&, const LeafNode&) = default;
};

using TreeNode = std::variant<SplitNode, LeafNode>;

// Node 0 is the root; nodes are numbered in breadth-first creation order and
// leaves in the order they were finalized.
struct Tree {
  std::size_t num_features = 0;
  std::vector<TreeNode> nodes;
  std::vector<IndexSet> leaf_members;  // populate-phase samples per leaf
  IndexSet build_indices;
  IndexSet subsample_indices;

  std::size_t num_leaves() const { return leaf_members.size(); }

  // Routes x down the tree: left iff x[feature] <= threshold.
  std::size_t leaf_for(std::span<const double> x) const {
    if (x.size() != num_features) throw DataError("query dimension does not match the tree");
    std::size_t id = 0;
    while (true) {
      const auto& node = nodes[id];
      if (const auto* leaf = std::get_if<LeafNode>(&node)) return leaf->leaf;
      const auto& split = std::get<SplitNode>(node);
      id = x[split.feature] <= split.threshold ? split.left : split.right;
    }
  }

  std::size_t leaf_for_row(const Matrix& x, std::size_t row) const {
    std::size_t id = 0;
    const auto r = static_cast<Eigen::Index>(row);
    while (true) {
      const auto& node = nodes[id];
      if (const auto* leaf = std::get_if<LeafNode>(&node)) return leaf->leaf;
      const auto& split = std::get<SplitNode>(node);
      id = x(r, static_cast<Eigen::Index>(split.feature)) <= split.threshold ? split.left : split.right;
    }
  }

  bool same_structure(const Tree& other) const {
    return num_features == other.num_features && nodes == other.nodes;
  }
};

inline std::size_t leaf_for(const Tree& tree, std::span<const double> x) { return tree.leaf_for(x); }

inline std::size_t leaf_for(const Tree& tree, const Vector& x) {
  return tree.leaf_for(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

namespace detail {

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (std::size_t r = 0; r < rows.size(); ++r)
      out(static_cast<Eigen::Index>(r), j) = x(static_cast<Eigen::Index>(rows[r]), j);
  return out;
}

// Labels a node, runs CART and maps the children back to dataset indices.
template <class Labeler>
std::optional<SplitResult> split_node(const Dataset& data, std::span<const std::size_t> node,
                                      const SplitConstraints& constraints, Labeler& label, Rng& rng) {
  if (node.size() < 2 * constraints.min_child_size(node.size())) return std::nullopt;
  std::optional<RowMatrix> rho = label(node);
  if (!rho) return std::nullopt;
  auto split = cart_split(gather_rows(data.x(), node), *rho, constraints, rng);
  if (!split) return std::nullopt;
  std::vector<std::size_t> left, right;
  left.reserve(split->left.size());
  right.reserve(split->right.size());
  for (std::size_t pos : split->left) left.push_back(node[pos]);
  for (std::size_t pos : split->right) right.push_back(node[pos]);
  split->left = IndexSet(std::move(left));
  split->right = IndexSet(std::move(right));
  return split;
}

}  // namespace detail

// Labeling step of the tree algorithm: fits the parent and returns its
// pseudo-outcomes, or nullopt when the node must stay a leaf.
class GrfLabeler {
 public:
  GrfLabeler(const Dataset& data, const TreeConfig& config) : data_(data), config_(config) {}

  std::optional<RowMatrix> operator()(std::span<const std::size_t> node) const {
    if (data_.kind() == ModelKind::mean) {
      RowMatrix rho = detail::fpt_rho_mean(data_, node, detail::node_mean_y(data_, node));
      if (config_.flavor == SplitFlavor::grad)
        rho = detail::apply_inverse_jacobian(rho, Matrix::Constant(1, 1, -1.0), false);
      return rho;
    }
    const auto c = detail::center(data_, node);
    if (config_.parent_solver == SolverKind::one_step) {
      const ParentFit fit = detail::one_step_fit(c, config_.one_step_scaling);
      RowMatrix rho = detail::fpt_rho(c, fit.theta);
      // One-step fits leave sum(rho) != 0; recentre so CART sees the same
      // split ordering as the fixed-point criterion.
      rho.rowwise() -= rho.colwise().mean();
      return rho;
    }
    const Matrix g = detail::gram(c.wc);
    const bool flagged = detail::near_singular(g);
    const ParentFit fit = detail::exact_fit(c, g, flagged);
    RowMatrix rho = detail::fpt_rho(c, fit.theta);
    if (config_.flavor == SplitFlavor::fpt) return rho;
    if (jacobian_unusable(g, flagged)) return std::nullopt;
    const Matrix a = -g / static_cast<double>(node.size());
    return detail::apply_inverse_jacobian(rho, a, flagged);
  }

 private:
  // One-hot regressors always leave the direction (1,...,1) in the null space
  // of the centered Gram matrix. That structural direction is filled with the
  // mean eigenvalue before judging the conditioning of hte nodes.
  bool jacobian_unusable(const Matrix& g, bool flagged) const {
    if (data_.kind() != ModelKind::hte) return flagged;
    const auto K = g.rows();
    const double fill = g.trace() / static_cast<double>(K * K);
    return detail::near_singular(g + Matrix::Constant(K, K, fill));
  }

  const Dataset& data_;
  TreeConfig config_;
};

// Breadth-first tree growth over a FIFO queue: pop a node, label it, CART
// split the labels, enqueue both children or finalize a leaf.
template <class Labeler>
Tree grow_tree(const Dataset& data, const IndexSet& build, const SplitConstraints& constraints,
               Labeler&& label, Rng& rng) {
  constraints.validate();
  if (build.size() < constraints.min_node_size || build.empty())
    throw ConfigError("build set is smaller than min_node_size");
  if (!build.within(data.size())) throw DataError("build index outside the dataset");

  Tree tree;
  tree.num_features = data.num_features();
  tree.build_indices = build;
  tree.subsample_indices = build;
  tree.nodes.emplace_back(LeafNode{});

  std::deque<std::pair<std::size_t, std::vector<std::size_t>>> queue;
  queue.emplace_back(0, build.values());
  std::size_t leaves = 0;
  while (!queue.empty()) {
    auto [id, members] = std::move(queue.front());
    queue.pop_front();
    auto split = detail::split_node(data, members, constraints, label, rng);
    if (!split) {
      tree.nodes[id] = LeafNode{leaves++};
      continue;
    }
    const std::size_t left_id = tree.nodes.size();
    tree.nodes[id] = SplitNode{split->feature, split->threshold, left_id, left_id + 1};
    tree.nodes.emplace_back(LeafNode{});
    tree.nodes.emplace_back(LeafNode{});
    queue.emplace_back(left_id, split->left.values());
    queue.emplace_back(left_id + 1, split->right.values());
  }
  tree.leaf_members.assign(leaves, IndexSet{});
  return tree;
}

inline Tree train_tree(const Dataset& data, const IndexSet& build, const TreeConfig& config, Rng& rng) {
  config.validate();
  return grow_tree(data, build, config.constraints, GrfLabeler(data, config), rng);
}

// Root split only (a depth-one tree over the given samples).
inline std::optional<SplitResult> fit_stump(const Dataset& data, const IndexSet& samples,
                                            const TreeConfig& config, Rng& rng) {
  config.validate();
  GrfLabeler label(data, config);
  return detail::split_node(data, samples.span(), config.constraints, label, rng);
}

// Routes every populate sample into its leaf; structure is untouched.
inline Tree populate_leaves(Tree tree, const Dataset& data, const IndexSet& populate) {
  if (!populate.within(data.size())) throw DataError("populate index outside the dataset");
  std::vector<std::vector<std::size_t>> members(tree.num_leaves());
  for (std::size_t i : populate) members[tree.leaf_for_row(data.x(), i)].push_back(i);
  for (std::size_t l = 0; l < members.size(); ++l) tree.leaf_members[l] = IndexSet(std::move(members[l]));
  return tree;
}

}  // namespace fptgrf
