#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fptgrf/csv.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/random.hpp"

namespace fptgrf {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Which score function the dataset is meant for.
enum class ModelKind { mean, vcm, hte };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::mean: return "mean";
    case ModelKind::vcm: return "vcm";
    case ModelKind::hte: return "hte";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "mean") return ModelKind::mean;
  if (s == "vcm") return ModelKind::vcm;
  if (s == "hte") return ModelKind::hte;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

// Sorted list of distinct sample indices.
class IndexSet {
 public:
  IndexSet() = default;

  // Sorts the input; throws if it contains duplicates.
  explicit IndexSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
      throw DataError("index set contains duplicate indices");
  }

  IndexSet(std::initializer_list<std::size_t> indices)
      : IndexSet(std::vector<std::size_t>(indices)) {}

  static IndexSet range(std::size_t n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    IndexSet out;
    out.indices_ = std::move(all);
    return out;
  }

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::size_t operator[](std::size_t k) const { return indices_[k]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }
  const std::vector<std::size_t>& values() const { return indices_; }
  std::span<const std::size_t> span() const { return indices_; }
  operator std::span<const std::size_t>() const { return indices_; }

  bool contains(std::size_t i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  // True when every index lies in [0, n).
  bool within(std::size_t n) const { return indices_.empty() || indices_.back() < n; }

  bool disjoint_from(const IndexSet& other) const {
    auto a = indices_.begin();
    auto b = other.indices_.begin();
    while (a != indices_.end() && b != other.indices_.end()) {
      if (*a == *b) return false;
      if (*a < *b) ++a; else ++b;
    }
    return true;
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

// Build/populate halves of a tree's subsample.
struct HonestPartition {
  IndexSet build;
  IndexSet populate;
};

// Immutable table of covariates X (n x p), regressors W (n x K) and outcomes Y.
class Dataset {
 public:
  Dataset(Matrix x, RowMatrix w, Vector y, ModelKind kind)
      : x_(std::move(x)), w_(std::move(w)), y_(std::move(y)), kind_(kind) {
    validate();
  }

  const Matrix& x() const { return x_; }
  const RowMatrix& w() const { return w_; }
  const Vector& y() const { return y_; }
  ModelKind kind() const { return kind_; }

  std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  std::size_t num_features() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t num_regressors() const { return static_cast<std::size_t>(w_.cols()); }

  // Covariate row i as a dense vector.
  Vector covariates(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)).transpose(); }

  // Same data under another score-model tag (revalidated).
  Dataset with_kind(ModelKind kind) const { return Dataset(x_, w_, y_, kind); }

 private:
  void validate() const {
    const auto n = y_.size();
    if (n < 1) throw DataError("dataset must contain at least one row");
    if (x_.rows() != n) throw DataError("X row count does not match Y");
    if (x_.cols() < 1) throw DataError("dataset needs at least one covariate column");
    if (w_.rows() != n && !(w_.cols() == 0 && w_.rows() == 0))
      throw DataError("W row count does not match Y");
    if (kind_ != ModelKind::mean && w_.cols() < 1)
      throw DataError("vcm/hte datasets need at least one regressor column");
    if (!x_.allFinite() || !w_.allFinite() || !y_.allFinite())
      throw DataError("dataset contains NaN or infinite entries");
    if (kind_ == ModelKind::hte) {
      for (Eigen::Index i = 0; i < n; ++i) {
        int ones = 0;
        for (Eigen::Index k = 0; k < w_.cols(); ++k) {
          const double v = w_(i, k);
          if (v == 1.0) ++ones;
          else if (v != 0.0) ones = 2;
        }
        if (ones != 1)
          throw DataError("hte row " + std::to_string(i) + " of W is not one-hot");
      }
    }
  }

  Matrix x_;
  RowMatrix w_;
  Vector y_;
  ModelKind kind_;
};

// Draws floor(fraction * n) distinct indices uniformly without replacement.
inline IndexSet subsample(std::size_t n, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("sample fraction must lie in (0, 1]");
  const auto s = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (s < 1) throw ConfigError("sample fraction too small: subsample would be empty");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (s < n) {
    // Partial Fisher-Yates: the first s slots hold a uniform sample.
    for (std::size_t k = 0; k < s; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    pool.resize(s);
  }
  return IndexSet(std::move(pool));
}

// Splits a subsample into build (floor(s/2)) and populate (ceil(s/2)) halves.
inline HonestPartition honest_partition(const IndexSet& sample, Rng& rng) {
  if (sample.size() < 2)
    throw ConfigError("honest partition needs a subsample of at least two indices");
  std::vector<std::size_t> shuffled = sample.values();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::size_t half = shuffled.size() / 2;
  std::vector<std::size_t> build(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> populate(shuffled.begin() + static_cast<std::ptrdiff_t>(half), shuffled.end());
  return {IndexSet(std::move(build)), IndexSet(std::move(populate))};
}

// ---------------------------------------------------------------------------
// CSV ingestion

// Column selection for load_dataset. Each entry is a header name or a 0-based
// position; without a header only positions are accepted.
struct CsvSchema {
  std::vector<std::string> x_cols;
  std::vector<std::string> w_cols;
  std::string y_col;
  ModelKind kind = ModelKind::vcm;
  bool header = true;
};

namespace detail {

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::size_t resolve_column(const csv::Table& table, const std::string& ref) {
  if (auto pos = table.find(ref)) return *pos;
  if (all_digits(ref)) {
    const std::size_t pos = std::stoul(ref);
    if (pos < table.num_columns()) return pos;
  }
  throw DataError("missing column '" + ref + "'");
}

}  // namespace detail

inline Dataset dataset_from_table(const csv::Table& table, const CsvSchema& schema) {
  if (schema.x_cols.empty()) throw ConfigError("schema names no covariate columns");
  if (schema.y_col.empty()) throw ConfigError("schema names no outcome column");
  std::vector<std::size_t> xc, wc;
  for (const auto& c : schema.x_cols) xc.push_back(detail::resolve_column(table, c));
  for (const auto& c : schema.w_cols) wc.push_back(detail::resolve_column(table, c));
  const std::size_t yc = detail::resolve_column(table, schema.y_col);

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw DataError("csv contains no data rows");
  Matrix x(n, static_cast<Eigen::Index>(xc.size()));
  RowMatrix w(n, static_cast<Eigen::Index>(wc.size()));
  Vector y(n);
  auto cell = [&](Eigen::Index i, std::size_t j) {
    const auto& raw = table.rows[static_cast<std::size_t>(i)][j];
    auto v = csv::parse_double(raw);
    if (!v) throw DataError("non-numeric cell '" + raw + "' at row " + std::to_string(i));
    if (!std::isfinite(*v)) throw DataError("non-finite cell at row " + std::to_string(i));
    return *v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < xc.size(); ++j) x(i, static_cast<Eigen::Index>(j)) = cell(i, xc[j]);
    for (std::size_t k = 0; k < wc.size(); ++k) w(i, static_cast<Eigen::Index>(k)) = cell(i, wc[k]);
    y(i) = cell(i, yc);
  }
  return Dataset(std::move(x), std::move(w), std::move(y), schema.kind);
}

inline Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
  return dataset_from_table(csv::read_file(path, schema.header), schema);
}

// Writes x1..xp, w1..wK, y with round-trip exact numbers.
inline void write_dataset(std::ostream& out, const Dataset& data) {
  std::vector<std::string> cells;
  for (std::size_t j = 0; j < data.num_features(); ++j) cells.push_back("x" + std::to_string(j + 1));
  for (std::size_t k = 0; k < data.num_regressors(); ++k) cells.push_back("w" + std::to_string(k + 1));
  cells.push_back("y");
  csv::write_row(out, cells);
  for (std::size_t i = 0; i < data.size(); ++i) {
    cells.clear();
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < data.x().cols(); ++j) cells.push_back(csv::format_double(data.x()(r, j)));
    for (Eigen::Index k = 0; k < data.w().cols(); ++k) cells.push_back(csv::format_double(data.w()(r, k)));
    cells.push_back(csv::format_double(data.y()(r)));
    csv::write_row(out, cells);
  }
}

// Schema matching the layout produced by write_dataset.
inline CsvSchema default_schema(std::size_t p, std::size_t K, ModelKind kind) {
  CsvSchema schema;
  for (std::size_t j = 0; j < p; ++j) schema.x_cols.push_back("x" + std::to_string(j + 1));
  for (std::size_t k = 0; k < K; ++k) schema.w_cols.push_back("w" + std::to_string(k + 1));
  schema.y_col = "y";
  schema.kind = kind;
  return schema;
}

}  // namespace fptgrf
