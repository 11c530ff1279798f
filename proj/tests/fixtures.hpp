#pragma once

#include "fptgrf/fptgrf.hpp"

namespace fixture {

using namespace fptgrf;

// Twenty two-dimensional points; samples labelled 5, 10, 11, 14 and 16
// (1-based) sit at the coordinates of the honest-weights walkthrough, the
// rest lie far to the right.
inline Dataset demo_dataset() {
  Matrix x(20, 2);
  for (Eigen::Index i = 0; i < 20; ++i) x.row(i) << 5.0 + static_cast<double>(i), static_cast<double>(i);
  auto put = [&](int label, double a, double b) { x.row(label - 1) << a, b; };
  put(5, 1, 0);
  put(10, 2, -2);
  put(11, 0, 1);
  put(14, 1, -2);
  put(16, 2, 2);
  Vector y = Vector::LinSpaced(20, 1, 20);
  return Dataset(x, RowMatrix(20, 0), y, ModelKind::mean);
}

// Root: X1 <= 3; left child: X2 <= -1. Leaves R1 (left-left), R2
// (left-right) and R3 (root right).
inline Tree demo_tree() {
  Tree t;
  t.num_features = 2;
  t.nodes = {SplitNode{0, 3.0, 1, 2}, SplitNode{1, -1.0, 3, 4}, LeafNode{2}, LeafNode{0}, LeafNode{1}};
  t.leaf_members.assign(3, IndexSet{});
  return t;
}

inline constexpr std::size_t kR1 = 0, kR2 = 1, kR3 = 2;

// Populate set {5, 10, 11, 14, 16} in 0-based indices.
inline IndexSet demo_populate() { return IndexSet{4, 9, 10, 13, 15}; }

}  // namespace fixture
