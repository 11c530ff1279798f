#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"

// Parent-node machinery for the linear score
//   psi_{theta,nu}(Y, W) = [Y - W'theta - nu; (Y - W'theta - nu) W]
// and its mean-regression special case psi_theta(Y) = Y - theta. The intercept
// nu is always profiled out by centering W and Y over the node.

namespace fptgrf {

enum class SolverKind { exact, one_step };

// Normalization of the one-step parent solve. `line_search` takes the exact
// line-search step along the centered gradient (recovers OLS when K = 1);
// `literal` additionally divides the gradient by the node size.
enum class OneStepScaling { line_search, literal };

enum class SplitFlavor { fpt, grad };

inline std::string_view to_string(SolverKind s) { return s == SolverKind::exact ? "exact" : "one_step"; }
inline std::string_view to_string(SplitFlavor f) { return f == SplitFlavor::fpt ? "fpt" : "grad"; }

inline SolverKind parse_solver(std::string_view s) {
  if (s == "exact") return SolverKind::exact;
  if (s == "one_step") return SolverKind::one_step;
  throw ConfigError("unknown parent solver '" + std::string(s) + "'");
}

inline SplitFlavor parse_flavor(std::string_view s) {
  if (s == "fpt") return SplitFlavor::fpt;
  if (s == "grad") return SplitFlavor::grad;
  throw ConfigError("unknown split flavor '" + std::string(s) + "'");
}

// Local solution over a parent node.
struct ParentFit {
  Vector theta;   // empty for mean regression
  double nu = 0;  // intercept; equals y_mean for mean regression
  Vector w_mean;
  double y_mean = 0;
  SolverKind solver = SolverKind::exact;
  std::size_t node_size = 0;
};

// Derivative of the node-averaged score with respect to theta (nu profiled out).
struct Jacobian {
  Matrix matrix;
  bool cond_flag = false;
};

struct PseudoOutcomes {
  RowMatrix rho;  // one row per node sample, in node order
  SplitFlavor flavor = SplitFlavor::fpt;
};

namespace detail {

inline constexpr double kSingularRatio = 1e-10;
inline constexpr double kRidgeScale = 1e-10;

using NodeView = std::span<const std::size_t>;

// W and Y of a node centered at the given means; rows follow node order.
struct CenteredNode {
  Vector w_mean;
  double y_mean = 0;
  RowMatrix wc;
  Vector yc;
};

inline void require_nonempty(NodeView node) {
  if (node.empty()) throw DataError("parent node is empty");
}

inline CenteredNode center_at(const Dataset& data, NodeView node, const Vector& w_mean, double y_mean) {
  const auto n = static_cast<Eigen::Index>(node.size());
  const auto K = static_cast<Eigen::Index>(data.num_regressors());
  CenteredNode c;
  c.w_mean = w_mean;
  c.y_mean = y_mean;
  c.wc.resize(n, K);
  c.yc.resize(n);
  const auto& w = data.w();
  const auto& y = data.y();
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(node[static_cast<std::size_t>(r)]);
    c.wc.row(r) = w.row(i) - w_mean.transpose();
    c.yc(r) = y(i) - y_mean;
  }
  return c;
}

inline CenteredNode center(const Dataset& data, NodeView node) {
  require_nonempty(node);
  const auto K = static_cast<Eigen::Index>(data.num_regressors());
  Vector w_mean = Vector::Zero(K);
  double y_sum = 0;
  for (std::size_t i : node) {
    const auto r = static_cast<Eigen::Index>(i);
    w_mean += data.w().row(r).transpose();
    y_sum += data.y()(r);
  }
  const double n = static_cast<double>(node.size());
  w_mean /= n;
  return center_at(data, node, w_mean, y_sum / n);
}

inline double node_mean_y(const Dataset& data, NodeView node) {
  double sum = 0;
  for (std::size_t i : node) sum += data.y()(static_cast<Eigen::Index>(i));
  return sum / static_cast<double>(node.size());
}

// Centered Gram matrix Wc' Wc (full symmetric storage).
inline Matrix gram(const RowMatrix& wc) {
  const auto K = wc.cols();
  Matrix g = Matrix::Zero(K, K);
  g.selfadjointView<Eigen::Lower>().rankUpdate(wc.transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// Smallest/largest singular value ratio below kSingularRatio (or all zero).
inline bool near_singular(const Matrix& sym) {
  if (sym.rows() == 1) return !(std::abs(sym(0, 0)) > 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  const Vector mags = es.eigenvalues().cwiseAbs();
  const double hi = mags.maxCoeff();
  return !(hi > 0.0) || mags.minCoeff() < kSingularRatio * hi;
}

// kRidgeScale * trace(|A|) / K.
inline double ridge_epsilon(const Matrix& sym) {
  return kRidgeScale * sym.diagonal().cwiseAbs().sum() / static_cast<double>(sym.rows());
}

// Solves (G + lambda I) x = b for a symmetric PSD G, with lambda > 0 only
// when G is flagged. Returns nullopt when G is identically zero.
inline std::optional<Vector> solve_psd(const Matrix& g, const Vector& b, bool flagged) {
  Matrix m = g;
  if (flagged) {
    const double eps = ridge_epsilon(g);
    if (!(eps > 0.0)) return std::nullopt;
    m.diagonal().array() += eps;
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) {
    Vector x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  Eigen::LDLT<Matrix> ldlt(m);
  Vector x = ldlt.solve(b);
  if (x.allFinite()) return x;
  return std::nullopt;
}

inline ParentFit exact_fit(const CenteredNode& c, const Matrix& g, bool flagged) {
  ParentFit fit;
  fit.solver = SolverKind::exact;
  fit.node_size = static_cast<std::size_t>(c.yc.size());
  fit.w_mean = c.w_mean;
  fit.y_mean = c.y_mean;
  const Vector b = c.wc.transpose() * c.yc;
  auto theta = solve_psd(g, b, flagged);
  fit.theta = theta ? *theta : Vector::Zero(g.rows());
  fit.nu = c.y_mean - c.w_mean.dot(fit.theta);
  return fit;
}

inline ParentFit one_step_fit(const CenteredNode& c, OneStepScaling scaling) {
  ParentFit fit;
  fit.solver = SolverKind::one_step;
  fit.node_size = static_cast<std::size_t>(c.yc.size());
  fit.w_mean = c.w_mean;
  fit.y_mean = c.y_mean;
  Vector g = c.wc.transpose() * c.yc;
  const Vector wg = c.wc * g;
  const double denom = wg.squaredNorm();
  if (!(denom > 0.0)) {
    fit.theta = Vector::Zero(g.size());
  } else {
    const double gamma = g.squaredNorm() / denom;
    if (scaling == OneStepScaling::literal) g /= static_cast<double>(fit.node_size);
    fit.theta = gamma * g;
  }
  fit.nu = c.y_mean - c.w_mean.dot(fit.theta);
  return fit;
}

// rho_i = -(W_i - Wbar)(Y_i - Ybar - (W_i - Wbar)'theta).
inline RowMatrix fpt_rho(const CenteredNode& c, const Vector& theta) {
  const Vector resid = c.yc - c.wc * theta;
  RowMatrix rho = c.wc.array().colwise() * (-resid.array());
  return rho;
}

// Mean regression: rho_i = -(Y_i - Ybar).
inline RowMatrix fpt_rho_mean(const Dataset& data, NodeView node, double y_mean) {
  RowMatrix rho(static_cast<Eigen::Index>(node.size()), 1);
  for (std::size_t r = 0; r < node.size(); ++r)
    rho(static_cast<Eigen::Index>(r), 0) = -(data.y()(static_cast<Eigen::Index>(node[r])) - y_mean);
  return rho;
}

// Applies A^{-1} to every row of rho, ridging A when flagged.
inline RowMatrix apply_inverse_jacobian(const RowMatrix& rho, const Matrix& a, bool flagged) {
  Matrix m = a;
  if (flagged) {
    double eps = ridge_epsilon(a);
    if (!(eps > 0.0)) eps = kRidgeScale;
    m.diagonal().array() -= eps;
  }
  // -m is positive definite for a Jacobian of this score family.
  const Matrix neg = -m;
  Eigen::LLT<Matrix> llt(neg);
  if (llt.info() == Eigen::Success) {
    RowMatrix out = -(llt.solve(rho.transpose())).transpose();
    if (out.allFinite()) return out;
  }
  Eigen::FullPivLU<Matrix> lu(m);
  RowMatrix out = lu.solve(rho.transpose()).transpose();
  return out;
}

}  // namespace detail

// Exact local solution: OLS of centered Y on centered W, with a ridge of
// 1e-10 * trace(G)/K added when the centered Gram matrix G is near-singular.
inline ParentFit solve_parent_exact(const Dataset& data, std::span<const std::size_t> node) {
  detail::require_nonempty(node);
  if (data.kind() == ModelKind::mean) {
    ParentFit fit;
    fit.y_mean = detail::node_mean_y(data, node);
    fit.nu = fit.y_mean;
    fit.node_size = node.size();
    return fit;
  }
  const auto c = detail::center(data, node);
  const Matrix g = detail::gram(c.wc);
  return detail::exact_fit(c, g, detail::near_singular(g));
}

// One gradient step from the origin with exact line search:
// theta = gamma * g, g = sum (W_i - Wbar)(Y_i - Ybar),
// gamma = |g|^2 / |Wc g|^2. Costs O(n_P K).
inline ParentFit solve_parent_one_step(const Dataset& data, std::span<const std::size_t> node,
                                       OneStepScaling scaling = OneStepScaling::line_search) {
  detail::require_nonempty(node);
  if (data.kind() == ModelKind::mean)
    throw ConfigError("one-step parent solve applies to vcm/hte models only");
  return detail::one_step_fit(detail::center(data, node), scaling);
}

// A_P = -(1/n_P) sum (W_i - Wbar)(W_i - Wbar)'. For mean regression A_P = [-1].
inline Jacobian build_jacobian(const Dataset& data, std::span<const std::size_t> node) {
  detail::require_nonempty(node);
  Jacobian jac;
  if (data.kind() == ModelKind::mean) {
    jac.matrix = Matrix::Constant(1, 1, -1.0);
    return jac;
  }
  const auto c = detail::center(data, node);
  jac.matrix = -detail::gram(c.wc) / static_cast<double>(node.size());
  jac.cond_flag = detail::near_singular(jac.matrix);
  return jac;
}

inline PseudoOutcomes fpt_pseudo_outcomes(const Dataset& data, std::span<const std::size_t> node,
                                          const ParentFit& fit) {
  detail::require_nonempty(node);
  PseudoOutcomes out;
  out.flavor = SplitFlavor::fpt;
  if (data.kind() == ModelKind::mean) {
    out.rho = detail::fpt_rho_mean(data, node, fit.y_mean);
  } else {
    out.rho = detail::fpt_rho(detail::center_at(data, node, fit.w_mean, fit.y_mean), fit.theta);
  }
  return out;
}

// rho_grad_i = A_P^{-1} rho_fpt_i.
inline PseudoOutcomes grad_pseudo_outcomes(const Dataset& data, std::span<const std::size_t> node,
                                           const ParentFit& fit, const Jacobian& jac) {
  PseudoOutcomes fpt = fpt_pseudo_outcomes(data, node, fit);
  if (jac.matrix.rows() != fpt.rho.cols() || jac.matrix.cols() != fpt.rho.cols())
    throw ConfigError("jacobian dimension does not match the pseudo-outcomes");
  PseudoOutcomes out;
  out.flavor = SplitFlavor::grad;
  out.rho = detail::apply_inverse_jacobian(fpt.rho, jac.matrix, jac.cond_flag);
  return out;
}

}  // namespace fptgrf
