#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/random.hpp"
#include "fptgrf/scores.hpp"

namespace fptgrf {

struct SplitConstraints {
  std::size_t min_node_size = 5;
  double omega = 0.05;     // minimum child fraction of the parent
  std::size_t mtry = 0;    // candidate features per node; 0 = all
  double min_gain = 0.0;   // required SSE decrease

  void validate() const {
    if (min_node_size < 1) throw ConfigError("min_node_size must be at least 1");
    if (!(omega > 0.0 && omega <= 0.5)) throw ConfigError("omega must lie in (0, 0.5]");
    if (!(min_gain >= 0.0)) throw ConfigError("min_gain must be non-negative");
  }

  // Each child must hold at least max(min_node_size, ceil(omega * n_parent)).
  std::size_t min_child_size(std::size_t n_parent) const {
    const double frac = std::ceil(omega * static_cast<double>(n_parent) - 1e-9);
    return std::max(min_node_size, static_cast<std::size_t>(std::max(frac, 0.0)));
  }

  friend bool operator==(const SplitConstraints&, const SplitConstraints&) = default;
};

// Chosen axis-aligned split. left/right are row positions within the parent
// (cart_split) or dataset indices (tree-level helpers).
struct SplitResult {
  std::size_t feature = 0;
  double threshold = 0;
  double criterion = 0;  // max-form value n1|rho1|^2 + n2|rho2|^2
  IndexSet left;
  IndexSet right;
};

namespace detail {

inline constexpr double kTieTolerance = 1e-12;
inline constexpr double kGainFloor = 1e-12;

inline void require_children(const IndexSet& left, const IndexSet& right, Eigen::Index rows) {
  if (left.empty() || right.empty()) throw DataError("split child is empty");
  if (!left.within(static_cast<std::size_t>(rows)) || !right.within(static_cast<std::size_t>(rows)))
    throw DataError("split child index outside the pseudo-outcome rows");
}

inline Vector row_mean(const RowMatrix& rho, const IndexSet& rows) {
  Vector mean = Vector::Zero(rho.cols());
  for (std::size_t r : rows) mean += rho.row(static_cast<Eigen::Index>(r)).transpose();
  return mean / static_cast<double>(rows.size());
}

inline double within_ss(const RowMatrix& rho, const IndexSet& rows) {
  const Vector mean = row_mean(rho, rows);
  double ss = 0;
  for (std::size_t r : rows) ss += (rho.row(static_cast<Eigen::Index>(r)).transpose() - mean).squaredNorm();
  return ss;
}

inline std::vector<std::size_t> candidate_features(std::size_t p, std::size_t mtry, Rng& rng) {
  std::vector<std::size_t> features(p);
  std::iota(features.begin(), features.end(), std::size_t{0});
  if (mtry == 0 || mtry >= p) return features;
  for (std::size_t k = 0; k < mtry; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, p - 1);
    std::swap(features[k], features[pick(rng)]);
  }
  features.resize(mtry);
  std::sort(features.begin(), features.end());
  return features;
}

}  // namespace detail

// Sum of within-child squared deviations.
inline double criterion_min_form(const RowMatrix& rho, const IndexSet& left, const IndexSet& right) {
  detail::require_children(left, right, rho.rows());
  return detail::within_ss(rho, left) + detail::within_ss(rho, right);
}

// n1 |mean1|^2 + n2 |mean2|^2; maximized exactly where the min-form is minimized.
inline double criterion_max_form(const RowMatrix& rho, const IndexSet& left, const IndexSet& right) {
  detail::require_children(left, right, rho.rows());
  return static_cast<double>(left.size()) * detail::row_mean(rho, left).squaredNorm() +
         static_cast<double>(right.size()) * detail::row_mean(rho, right).squaredNorm();
}

// (n1 n2 / n_P^2) |theta1 - theta2|^2.
inline double delta_tilde(const Vector& theta_left, const Vector& theta_right, std::size_t n_left,
                          std::size_t n_right, std::size_t n_parent) {
  if (n_left < 1 || n_right < 1 || n_left + n_right != n_parent)
    throw ConfigError("child sizes must be positive and sum to the parent size");
  if (theta_left.size() != theta_right.size()) throw ConfigError("child estimates differ in length");
  const double np = static_cast<double>(n_parent);
  return static_cast<double>(n_left) * static_cast<double>(n_right) / (np * np) *
         (theta_left - theta_right).squaredNorm();
}

// Parent estimate plus the child mean of the pseudo-outcomes. For mean
// regression the parent estimate is the intercept nu.
inline Vector child_estimate(const ParentFit& fit, const RowMatrix& rho, const IndexSet& child) {
  if (child.empty()) throw DataError("child is empty");
  if (!child.within(static_cast<std::size_t>(rho.rows()))) throw DataError("child index out of range");
  const Vector base = fit.theta.size() == 0 ? Vector::Constant(1, fit.nu) : fit.theta;
  if (base.size() != rho.cols()) throw ConfigError("pseudo-outcome width does not match the fit");
  return base + detail::row_mean(rho, child);
}

// Multivariate CART split on pseudo-outcomes. Candidate thresholds are the
// midpoints of consecutive distinct sorted values; the left child takes
// x <= threshold. Criterion values come from running prefix sums of the
// column-centered rho, which leaves the argmax unchanged. Ties within 1e-12
// (relative) resolve to the lowest feature, then the lowest threshold.
inline std::optional<SplitResult> cart_split(const Matrix& x_node, const RowMatrix& rho,
                                             const SplitConstraints& constraints, Rng& rng) {
  if (x_node.rows() != rho.rows())
    throw DataError("pseudo-outcome row count does not match the parent size");
  const auto n = static_cast<std::size_t>(rho.rows());
  const auto K = static_cast<std::size_t>(rho.cols());
  const std::size_t min_child = constraints.min_child_size(n);
  const auto features = detail::candidate_features(static_cast<std::size_t>(x_node.cols()), constraints.mtry, rng);
  if (n < 2 * min_child || K == 0 || features.empty()) return std::nullopt;

  const Eigen::RowVectorXd mu = rho.colwise().mean();
  const RowMatrix rc = rho.rowwise() - mu;
  const double raw_ss = rho.squaredNorm();
  const double parent_sse = rc.squaredNorm();
  if (!(parent_sse > 0.0)) return std::nullopt;
  const Vector total = rc.colwise().sum().transpose();

  std::vector<std::pair<double, std::uint32_t>> sorted(n);
  std::vector<double> left_sum(K);
  const double* rows = rc.data();

  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_feature = 0;
  std::size_t best_cut = 0;
  double best_threshold = 0;
  std::vector<std::uint32_t> best_order;

  for (std::size_t j : features) {
    const auto col = x_node.col(static_cast<Eigen::Index>(j));
    for (std::size_t r = 0; r < n; ++r) sorted[r] = {col(static_cast<Eigen::Index>(r)), static_cast<std::uint32_t>(r)};
    std::sort(sorted.begin(), sorted.end());
    std::fill(left_sum.begin(), left_sum.end(), 0.0);
    bool feature_improved = false;
    for (std::size_t m = 1; m < n; ++m) {
      const double* row = rows + static_cast<std::size_t>(sorted[m - 1].second) * K;
      for (std::size_t k = 0; k < K; ++k) left_sum[k] += row[k];
      if (m < min_child) continue;
      if (n - m < min_child) break;
      const double a = sorted[m - 1].first;
      const double b = sorted[m].first;
      if (!(a < b)) continue;
      double ls = 0, rs = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const double right_k = total(static_cast<Eigen::Index>(k)) - left_sum[k];
        ls += left_sum[k] * left_sum[k];
        rs += right_k * right_k;
      }
      const double value = ls / static_cast<double>(m) + rs / static_cast<double>(n - m);
      if (!found || value > best + detail::kTieTolerance * std::abs(best)) {
        found = true;
        feature_improved = true;
        best = value;
        best_feature = j;
        best_cut = m;
        double mid = a + (b - a) / 2;
        if (!(mid < b)) mid = a;
        best_threshold = mid;
      }
    }
    if (feature_improved) {
      best_order.resize(n);
      for (std::size_t r = 0; r < n; ++r) best_order[r] = sorted[r].second;
    }
  }
  if (!found) return std::nullopt;

  std::vector<std::size_t> left(best_order.begin(), best_order.begin() + static_cast<std::ptrdiff_t>(best_cut));
  std::vector<std::size_t> right(best_order.begin() + static_cast<std::ptrdiff_t>(best_cut), best_order.end());
  SplitResult result;
  result.feature = best_feature;
  result.threshold = best_threshold;
  result.left = IndexSet(std::move(left));
  result.right = IndexSet(std::move(right));

  // Direct recomputation guards against prefix-sum accumulation error.
  const double decrease = parent_sse - criterion_min_form(rc, result.left, result.right);
  if (!(decrease > std::max(constraints.min_gain, detail::kGainFloor * raw_ss))) return std::nullopt;
  result.criterion = criterion_max_form(rho, result.left, result.right);
  return result;
}

inline std::optional<SplitResult> cart_split(const Matrix& x_node, const PseudoOutcomes& rho,
                                             const SplitConstraints& constraints, Rng& rng) {
  return cart_split(x_node, rho.rho, constraints, rng);
}

}  // namespace fptgrf
