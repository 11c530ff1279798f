#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/random.hpp"

namespace fptgrf {

enum class Family { vcm, hte };

inline std::string_view to_string(Family f) { return f == Family::vcm ? "vcm" : "hte"; }

inline Family parse_family(std::string_view s) {
  if (s == "vcm") return Family::vcm;
  if (s == "hte") return Family::hte;
  throw ConfigError("unknown family '" + std::string(s) + "'");
}

struct SimSpec {
  Family family = Family::vcm;
  int setting = 1;
  std::size_t n = 1000;
  std::size_t p = 5;
  std::size_t K = 4;
  std::uint64_t seed = 1;
  double noise_sd = 1.0;

  void validate() const {
    const int max_setting = family == Family::vcm ? 4 : 5;
    if (setting < 1 || setting > max_setting)
      throw ConfigError(std::string(to_string(family)) + " setting must lie in 1.." + std::to_string(max_setting));
    if (n < 1 || p < 1 || K < 1) throw ConfigError("n, p and K must be at least 1");
    if (family == Family::hte && K < 2 && (setting == 2 || setting == 4))
      throw ConfigError("hte settings 2 and 4 need K >= 2");
    if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be non-negative");
    const bool uses_x2 = family == Family::vcm ? setting == 2 : setting == 3;
    if (uses_x2 && p < 2) throw ConfigError("this setting uses x1 and x2; p must be at least 2");
  }
};

struct GeneratedData {
  Dataset data;
  Matrix theta_true;  // n x K
  Matrix pi_true;     // n x K for hte, empty otherwise
};

// Logistic-type helper 1 + 1/(1 + exp(-20(u - 1/3))).
inline double varsigma(double u) { return 1.0 + 1.0 / (1.0 + std::exp(-20.0 * (u - 1.0 / 3.0))); }

// Sum of 20 random Gaussian bumps over random coordinate subsets.
class RandomFunction {
 public:
  struct Term {
    double a = 0;
    std::vector<std::size_t> vars;  // z = x[vars]
    Vector mu;
    Matrix U;  // orthonormal
    Vector d;
    Matrix V;  // U diag(d) U'
  };

  RandomFunction() = default;
  RandomFunction(std::size_t p, std::vector<Term> terms) : p_(p), terms_(std::move(terms)) {}

  double operator()(std::span<const double> x) const {
    if (x.size() != p_) throw DataError("random function evaluated at a point of the wrong dimension");
    double total = 0;
    for (const Term& t : terms_) {
      Vector z(static_cast<Eigen::Index>(t.vars.size()));
      for (std::size_t j = 0; j < t.vars.size(); ++j) z(static_cast<Eigen::Index>(j)) = x[t.vars[j]];
      const Vector dz = z - t.mu;
      total += t.a * std::exp(-0.5 * dz.dot(t.V * dz));
    }
    return total;
  }

  double operator()(const Vector& x) const {
    return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  std::size_t dimension() const { return p_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  std::size_t p_ = 0;
  std::vector<Term> terms_;
};

namespace detail {

inline Matrix random_orthonormal(std::size_t m, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace detail

inline RandomFunction rfg(std::size_t p, Rng& rng, std::size_t num_terms = 20) {
  if (p < 1) throw ConfigError("random function needs p >= 1");
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> root_d(0.1, 2.0);
  std::exponential_distribution<double> expo(0.5);  // rate 0.5, mean 2
  std::vector<RandomFunction::Term> terms(num_terms);
  for (auto& t : terms) {
    t.a = coef(rng);
    const auto size = std::min(static_cast<std::size_t>(std::floor(2.5 + expo(rng))), p);
    std::vector<std::size_t> perm(p);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    t.vars.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(size));
    const auto m = static_cast<Eigen::Index>(size);
    t.mu.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) t.mu(j) = unit(rng);
    t.U = detail::random_orthonormal(size, rng);
    t.d.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double s = root_d(rng);
      t.d(j) = s * s;
    }
    t.V = t.U * t.d.asDiagonal() * t.U.transpose();
  }
  return RandomFunction(p, std::move(terms));
}

// The coefficient draws behind theta*(x) and pi(x) for one simulated design.
struct EffectModel {
  Family family = Family::vcm;
  int setting = 1;
  std::size_t p = 0;
  std::size_t K = 0;
  Matrix beta;   // K x 1, K x 2 or K x p depending on the setting
  Matrix gamma;  // K x p, hte setting 5
  std::vector<RandomFunction> functions;

  // Effect function type: 1 linear in x1, 2 product of two varsigmas,
  // 3 varsigma of a dense index, 4 random function.
  int effect_type() const {
    if (family == Family::vcm) return setting;
    static constexpr int kHte[] = {1, 1, 2, 3, 4};
    return kHte[setting - 1];
  }

  Vector theta(std::span<const double> x) const {
    if (x.size() != p) throw DataError("effect model evaluated at a point of the wrong dimension");
    Vector out(static_cast<Eigen::Index>(K));
    for (Eigen::Index k = 0; k < out.size(); ++k) {
      switch (effect_type()) {
        case 1: out(k) = beta(k, 0) * x[0]; break;
        case 2: out(k) = varsigma(beta(k, 0) * x[0]) * varsigma(beta(k, 1) * x[1]); break;
        case 3: {
          double s = 0;
          for (std::size_t j = 0; j < p; ++j) s += beta(k, static_cast<Eigen::Index>(j)) * x[j];
          out(k) = varsigma(s);
          break;
        }
        default: out(k) = functions[static_cast<std::size_t>(k)](x);
      }
    }
    return out;
  }

  // Treatment probabilities; hte only.
  Vector pi(std::span<const double> x) const {
    if (family != Family::hte) throw ConfigError("treatment probabilities exist only for hte designs");
    const auto k_dim = static_cast<Eigen::Index>(K);
    Vector out(k_dim);
    if (setting == 1 || setting == 3) {
      out.setConstant(1.0 / static_cast<double>(K));
    } else if (setting == 2 || setting == 4) {
      out.setConstant((1.0 - x[0]) / static_cast<double>(K - 1));
      out(0) = x[0];
    } else {
      Vector score(k_dim);
      for (Eigen::Index k = 0; k < k_dim; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < p; ++j) s += gamma(k, static_cast<Eigen::Index>(j)) * x[j];
        score(k) = s;
      }
      const double top = score.maxCoeff();
      out = (score.array() - top).exp().matrix();
      out /= out.sum();
    }
    return out;
  }
};

inline EffectModel draw_effect_model(Family family, int setting, std::size_t p, std::size_t K, Rng& rng) {
  EffectModel model;
  model.family = family;
  model.setting = setting;
  model.p = p;
  model.K = K;
  std::normal_distribution<double> normal;
  const auto k_dim = static_cast<Eigen::Index>(K);
  auto fill = [&](Matrix& m, Eigen::Index cols) {
    m.resize(k_dim, cols);
    for (Eigen::Index k = 0; k < k_dim; ++k)
      for (Eigen::Index j = 0; j < cols; ++j) m(k, j) = normal(rng);
  };
  switch (model.effect_type()) {
    case 1: fill(model.beta, 1); break;
    case 2: fill(model.beta, 2); break;
    case 3: fill(model.beta, static_cast<Eigen::Index>(p)); break;
    default:
      for (std::size_t k = 0; k < K; ++k) model.functions.push_back(rfg(p, rng));
  }
  if (family == Family::hte && setting == 5) fill(model.gamma, static_cast<Eigen::Index>(p));
  return model;
}

inline EffectModel draw_effect_model(const SimSpec& spec, Rng& rng) {
  spec.validate();
  return draw_effect_model(spec.family, spec.setting, spec.p, spec.K, rng);
}

// One Multinomial(1, probs) draw, returned as the arm index.
inline std::size_t draw_arm(const Vector& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    cum += probs(k);
    if (u < cum) return static_cast<std::size_t>(k);
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

// n fresh samples from a fixed effect model: X ~ U[0,1]^p, W normal (vcm) or
// one-hot multinomial (hte), Y = W'theta*(X) + noise_sd * N(0,1).
inline GeneratedData sample_from(const EffectModel& model, std::size_t n, double noise_sd, Rng& rng) {
  if (n < 1) throw ConfigError("n must be at least 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto p = static_cast<Eigen::Index>(model.p);
  const auto K = static_cast<Eigen::Index>(model.K);
  Matrix x(rows, p);
  RowMatrix w(rows, K);
  Vector y(rows);
  Matrix theta(rows, K);
  Matrix pi;
  if (model.family == Family::hte) pi.resize(rows, K);
  std::vector<double> xi(model.p);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      xi[static_cast<std::size_t>(j)] = unit(rng);
      x(i, j) = xi[static_cast<std::size_t>(j)];
    }
    theta.row(i) = model.theta(xi).transpose();
    if (model.family == Family::vcm) {
      for (Eigen::Index k = 0; k < K; ++k) w(i, k) = normal(rng);
    } else {
      const Vector probs = model.pi(xi);
      pi.row(i) = probs.transpose();
      w.row(i).setZero();
      w(i, static_cast<Eigen::Index>(draw_arm(probs, rng))) = 1.0;
    }
    y(i) = w.row(i).dot(theta.row(i)) + noise_sd * normal(rng);
  }
  const ModelKind kind = model.family == Family::vcm ? ModelKind::vcm : ModelKind::hte;
  return {Dataset(std::move(x), std::move(w), std::move(y), kind), std::move(theta), std::move(pi)};
}

inline GeneratedData generate(const SimSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0}));
  const EffectModel model = draw_effect_model(spec, rng);
  Rng sample_rng(derive_seed(spec.seed, {1}));
  return sample_from(model, spec.n, spec.noise_sd, sample_rng);
}

// Y = 1(x > 0.5) w1 + w2 + eps.
inline double stability_outcome(double x, double w1, double w2, double eps) {
  return (x > 0.5 ? w1 : 0.0) + w2 + eps;
}

// Scalar X ~ U(0,1); (W1, W2) standard normal with correlation corr via the
// Cholesky factor of the 2x2 correlation matrix.
inline GeneratedData generate_stability(std::size_t n, double corr, Rng& rng, double noise_sd = 1.0) {
  if (!(corr >= 0.0 && corr < 1.0)) throw ConfigError("corr must lie in [0, 1)");
  if (n < 1) throw ConfigError("n must be at least 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const auto rows = static_cast<Eigen::Index>(n);
  const double tail = std::sqrt(1.0 - corr * corr);
  Matrix x(rows, 1);
  RowMatrix w(rows, 2);
  Vector y(rows);
  Matrix theta(rows, 2);
  for (Eigen::Index i = 0; i < rows; ++i) {
    x(i, 0) = unit(rng);
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    w(i, 0) = z1;
    w(i, 1) = corr * z1 + tail * z2;
    theta(i, 0) = x(i, 0) > 0.5 ? 1.0 : 0.0;
    theta(i, 1) = 1.0;
    y(i) = stability_outcome(x(i, 0), w(i, 0), w(i, 1), noise_sd * normal(rng));
  }
  return {Dataset(std::move(x), std::move(w), std::move(y), ModelKind::vcm), std::move(theta), Matrix()};
}

}  // namespace fptgrf
