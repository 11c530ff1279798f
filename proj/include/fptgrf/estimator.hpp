#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "fptgrf/csv.hpp"
#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/forest.hpp"
#include "fptgrf/scores.hpp"

namespace fptgrf {

struct Estimate {
  Vector theta;  // empty for mean regression
  double nu = 0;
  std::size_t contributing = 0;
};

// Root of the alpha-weighted score: weighted least squares of Y on (1, W),
// ridged like the exact parent solve when the weighted Gram matrix is
// near-singular.
inline Estimate solve_weighted(const Dataset& data, const WeightVector& alpha) {
  if (alpha.entries.empty()) throw DataError("weight vector has empty support");
  const double total = alpha.sum();
  if (!(std::abs(total - 1.0) <= 1e-10)) throw DataError("weights do not sum to one");
  for (const auto& [i, a] : alpha.entries) {
    if (i >= data.size()) throw DataError("weight index outside the dataset");
    if (!(a >= 0.0)) throw DataError("negative weight");
  }

  Estimate est;
  est.contributing = alpha.contributing;
  double y_bar = 0;
  for (const auto& [i, a] : alpha.entries) y_bar += a * data.y()(static_cast<Eigen::Index>(i));
  if (data.kind() == ModelKind::mean) {
    est.nu = y_bar;
    return est;
  }

  const auto K = static_cast<Eigen::Index>(data.num_regressors());
  Vector w_bar = Vector::Zero(K);
  for (const auto& [i, a] : alpha.entries) w_bar += a * data.w().row(static_cast<Eigen::Index>(i)).transpose();
  Matrix g = Matrix::Zero(K, K);
  Vector b = Vector::Zero(K);
  for (const auto& [i, a] : alpha.entries) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector wc = data.w().row(r).transpose() - w_bar;
    g.selfadjointView<Eigen::Lower>().rankUpdate(wc, a);
    b += a * (data.y()(r) - y_bar) * wc;
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  const auto theta = detail::solve_psd(g, b, detail::near_singular(g));
  if (!theta) throw DegenerateSystemError("weighted Gram matrix is identically zero");
  est.theta = *theta;
  est.nu = y_bar - w_bar.dot(est.theta);
  return est;
}

inline Estimate predict(const Forest& forest, const Dataset& data, std::span<const double> x) {
  return solve_weighted(data, weights(forest, x));
}

inline Estimate predict(const Forest& forest, const Dataset& data, const Vector& x) {
  return solve_weighted(data, weights(forest, x));
}

inline Estimate predict_oob(const Forest& forest, const Dataset& data, std::size_t i) {
  return solve_weighted(data, oob_weights(forest, data, i));
}

// One estimate per row of `queries`, in row order.
inline std::vector<Estimate> predict_batch(const Forest& forest, const Dataset& data, const Matrix& queries,
                                           std::size_t threads = 0) {
  if (static_cast<std::size_t>(queries.cols()) != data.num_features())
    throw DataError("query dimension does not match the training data");
  std::vector<Estimate> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), resolve_threads(threads), [&](std::size_t q) {
    const Vector x = queries.row(static_cast<Eigen::Index>(q)).transpose();
    out[q] = predict(forest, data, x);
  });
  return out;
}

// OOB estimates for every training row.
inline std::vector<Estimate> predict_oob_all(const Forest& forest, const Dataset& data, std::size_t threads = 0) {
  std::vector<Estimate> out(data.size());
  parallel_for(out.size(), resolve_threads(threads),
               [&](std::size_t i) { out[i] = predict_oob(forest, data, i); });
  return out;
}

// CSV columns: query id, theta_1..theta_K, nu, contributing.
inline void write_estimates(std::ostream& out, const std::vector<Estimate>& estimates, std::size_t K) {
  std::vector<std::string> cells{"query"};
  for (std::size_t k = 0; k < K; ++k) cells.push_back("theta_" + std::to_string(k + 1));
  cells.push_back("nu");
  cells.push_back("contributing");
  csv::write_row(out, cells);
  for (std::size_t q = 0; q < estimates.size(); ++q) {
    const Estimate& e = estimates[q];
    if (static_cast<std::size_t>(e.theta.size()) != K) throw DataError("estimate width does not match K");
    cells.assign({std::to_string(q)});
    for (Eigen::Index k = 0; k < e.theta.size(); ++k) cells.push_back(csv::format_double(e.theta(k)));
    cells.push_back(csv::format_double(e.nu));
    cells.push_back(std::to_string(e.contributing));
    csv::write_row(out, cells);
  }
}

}  // namespace fptgrf
