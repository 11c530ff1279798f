#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/random.hpp"
#include "fptgrf/tree.hpp"

namespace fptgrf {

struct ForestConfig {
  std::size_t num_trees = 2000;
  double sample_fraction = 0.5;
  TreeConfig tree;
  std::uint64_t seed = 42;

  void validate() const {
    if (num_trees < 1) throw ConfigError("num_trees must be at least 1");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
      throw ConfigError("sample_fraction must lie in (0, 1]");
    tree.validate();
  }

  // A full-sample design cannot be split honestly.
  bool honest() const { return tree.honesty && sample_fraction < 1.0; }

  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

struct Forest {
  std::vector<Tree> trees;
  ForestConfig config;
  std::size_t n_train = 0;
};

// Sparse alpha over training indices, sorted by index.
struct WeightVector {
  std::vector<std::pair<std::size_t, double>> entries;
  std::size_t contributing = 0;

  double sum() const {
    double s = 0;
    for (const auto& e : entries) s += e.second;
    return s;
  }

  double at(std::size_t i) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), i,
                               [](const auto& e, std::size_t k) { return e.first < k; });
    return it != entries.end() && it->first == i ? it->second : 0.0;
  }
};

// Worker count: explicit value, else FPTGRF_THREADS, else hardware concurrency.
inline std::size_t resolve_threads(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FPTGRF_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("FPTGRF_THREADS is not a positive integer: ") + env);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, count) on up to `threads` workers. The first
// exception is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::min(std::max<std::size_t>(threads, 1), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

// One tree of the forest, drawn entirely from its own derived seed.
inline Tree train_forest_tree(const Dataset& data, const ForestConfig& config, std::size_t b) {
  Rng rng(tree_seed(config.seed, b));
  const IndexSet sample = subsample(data.size(), config.sample_fraction, rng);
  if (config.honest()) {
    const HonestPartition part = honest_partition(sample, rng);
    Tree tree = train_tree(data, part.build, config.tree, rng);
    tree.subsample_indices = sample;
    return populate_leaves(std::move(tree), data, part.populate);
  }
  Tree tree = train_tree(data, sample, config.tree, rng);
  return populate_leaves(std::move(tree), data, sample);
}

inline Forest train_forest(const Dataset& data, const ForestConfig& config, std::size_t threads = 0) {
  config.validate();
  Forest forest;
  forest.config = config;
  forest.n_train = data.size();
  forest.trees.resize(config.num_trees);
  parallel_for(config.num_trees, resolve_threads(threads),
               [&](std::size_t b) { forest.trees[b] = train_forest_tree(data, config, b); });
  return forest;
}

namespace detail {

template <class Include>
WeightVector accumulate_weights(const Forest& forest, std::span<const double> x, Include include) {
  WeightVector out;
  std::vector<std::pair<std::size_t, double>> raw;
  for (std::size_t b = 0; b < forest.trees.size(); ++b) {
    if (!include(b)) continue;
    const Tree& tree = forest.trees[b];
    const IndexSet& leaf = tree.leaf_members[tree.leaf_for(x)];
    if (leaf.empty()) continue;
    ++out.contributing;
    const double w = 1.0 / static_cast<double>(leaf.size());
    for (std::size_t i : leaf) raw.emplace_back(i, w);
  }
  if (out.contributing == 0) return out;
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double scale = 1.0 / static_cast<double>(out.contributing);
  for (std::size_t k = 0; k < raw.size();) {
    const std::size_t i = raw[k].first;
    double s = 0;
    for (; k < raw.size() && raw[k].first == i; ++k) s += raw[k].second;
    out.entries.emplace_back(i, s * scale);
  }
  return out;
}

inline std::span<const double> as_span(const Vector& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}

}  // namespace detail

// alpha_i(x): average over trees with a nonempty leaf at x of 1(i in leaf)/|leaf|.
inline WeightVector weights(const Forest& forest, std::span<const double> x) {
  WeightVector out = detail::accumulate_weights(forest, x, [](std::size_t) { return true; });
  if (out.contributing == 0) throw UnidentifiedPointError();
  return out;
}

inline WeightVector weights(const Forest& forest, const Vector& x) { return weights(forest, detail::as_span(x)); }

// Weights at X_i using only trees whose subsample excludes i.
inline WeightVector oob_weights(const Forest& forest, const Dataset& data, std::size_t i) {
  if (i >= data.size()) throw DataError("training index out of range");
  std::size_t eligible = 0;
  for (const Tree& t : forest.trees) eligible += t.subsample_indices.contains(i) ? 0 : 1;
  if (eligible == 0) throw NoOutOfBagTreesError(i);
  const Vector x = data.covariates(i);
  WeightVector out = detail::accumulate_weights(
      forest, detail::as_span(x), [&](std::size_t b) { return !forest.trees[b].subsample_indices.contains(i); });
  if (out.contributing == 0) throw UnidentifiedPointError();
  return out;
}

}  // namespace fptgrf
