#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/forest.hpp"
#include "fptgrf/random.hpp"
#include "fptgrf/tree.hpp"

namespace fptgrf {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

namespace detail {

template <class T>
T require(const Json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("json document lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("json field '") + key + "': " + e.what());
  }
}

inline Json index_array(const IndexSet& s) { return Json(s.values()); }

inline IndexSet index_set(const Json& j, const char* key) {
  return IndexSet(require<std::vector<std::size_t>>(j, key));
}

}  // namespace detail

inline Json to_json(const SplitConstraints& c) {
  return {{"min_node_size", c.min_node_size}, {"omega", c.omega}, {"mtry", c.mtry}, {"min_gain", c.min_gain}};
}

inline SplitConstraints constraints_from_json(const Json& j) {
  SplitConstraints c;
  c.min_node_size = j.value("min_node_size", c.min_node_size);
  c.omega = j.value("omega", c.omega);
  c.mtry = j.value("mtry", c.mtry);
  c.min_gain = j.value("min_gain", c.min_gain);
  return c;
}

inline Json to_json(const TreeConfig& c) {
  return {{"constraints", to_json(c.constraints)},
          {"flavor", to_string(c.flavor)},
          {"parent_solver", to_string(c.parent_solver)},
          {"honesty", c.honesty},
          {"one_step_scaling", c.one_step_scaling == OneStepScaling::literal ? "literal" : "line_search"}};
}

inline TreeConfig tree_config_from_json(const Json& j) {
  TreeConfig c;
  if (j.contains("constraints")) c.constraints = constraints_from_json(j.at("constraints"));
  if (j.contains("flavor")) c.flavor = parse_flavor(j.at("flavor").get<std::string>());
  if (j.contains("parent_solver")) c.parent_solver = parse_solver(j.at("parent_solver").get<std::string>());
  c.honesty = j.value("honesty", c.honesty);
  if (j.contains("one_step_scaling")) {
    const auto s = j.at("one_step_scaling").get<std::string>();
    if (s == "literal") c.one_step_scaling = OneStepScaling::literal;
    else if (s == "line_search") c.one_step_scaling = OneStepScaling::line_search;
    else throw ConfigError("unknown one_step_scaling '" + s + "'");
  }
  return c;
}

inline Json to_json(const ForestConfig& c) {
  return {{"num_trees", c.num_trees},
          {"sample_fraction", c.sample_fraction},
          {"seed", c.seed},
          {"tree", to_json(c.tree)}};
}

inline ForestConfig forest_config_from_json(const Json& j) {
  ForestConfig c;
  c.num_trees = j.value("num_trees", c.num_trees);
  c.sample_fraction = j.value("sample_fraction", c.sample_fraction);
  c.seed = j.value("seed", c.seed);
  if (j.contains("tree")) c.tree = tree_config_from_json(j.at("tree"));
  return c;
}

inline Json to_json(const Tree& tree) {
  Json nodes = Json::array();
  for (const auto& node : tree.nodes) {
    if (const auto* leaf = std::get_if<LeafNode>(&node)) {
      nodes.push_back({{"leaf", leaf->leaf}});
    } else {
      const auto& s = std::get<SplitNode>(node);
      nodes.push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"left", s.left}, {"right", s.right}});
    }
  }
  Json leaves = Json::array();
  for (const auto& members : tree.leaf_members) leaves.push_back(detail::index_array(members));
  return {{"version", kFormatVersion},
          {"num_features", tree.num_features},
          {"nodes", std::move(nodes)},
          {"leaf_members", std::move(leaves)},
          {"build_indices", detail::index_array(tree.build_indices)},
          {"subsample_indices", detail::index_array(tree.subsample_indices)}};
}

inline Tree tree_from_json(const Json& j) {
  Tree tree;
  tree.num_features = detail::require<std::size_t>(j, "num_features");
  if (!j.contains("nodes") || !j.at("nodes").is_array()) throw DataError("tree document lacks a node array");
  for (const Json& node : j.at("nodes")) {
    if (node.contains("leaf")) {
      tree.nodes.emplace_back(LeafNode{detail::require<std::size_t>(node, "leaf")});
    } else {
      tree.nodes.emplace_back(SplitNode{detail::require<std::size_t>(node, "feature"),
                                        detail::require<double>(node, "threshold"),
                                        detail::require<std::size_t>(node, "left"),
                                        detail::require<std::size_t>(node, "right")});
    }
  }
  for (const Json& members : j.at("leaf_members"))
    tree.leaf_members.emplace_back(members.get<std::vector<std::size_t>>());
  tree.build_indices = detail::index_set(j, "build_indices");
  tree.subsample_indices = detail::index_set(j, "subsample_indices");

  // Structural checks: children after their parent and in range, leaf ids
  // in range, features in range.
  if (tree.nodes.empty()) throw DataError("tree has no nodes");
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    if (const auto* leaf = std::get_if<LeafNode>(&tree.nodes[id])) {
      if (leaf->leaf >= tree.leaf_members.size()) throw DataError("leaf id out of range");
    } else {
      const auto& s = std::get<SplitNode>(tree.nodes[id]);
      if (s.left >= tree.nodes.size() || s.right >= tree.nodes.size() || s.feature >= tree.num_features)
        throw DataError("split node refers outside the tree");
      if (s.left <= id || s.right <= id) throw DataError("split node refers to an earlier node");
    }
  }
  return tree;
}

// Manifest with config and per-tree seeds followed by the tree documents.
inline Json to_json(const Forest& forest) {
  Json seeds = Json::array();
  Json trees = Json::array();
  for (std::size_t b = 0; b < forest.trees.size(); ++b) {
    seeds.push_back(tree_seed(forest.config.seed, b));
    trees.push_back(to_json(forest.trees[b]));
  }
  return {{"version", kFormatVersion},
          {"n_train", forest.n_train},
          {"config", to_json(forest.config)},
          {"tree_seeds", std::move(seeds)},
          {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const Json& j) {
  if (j.value("version", 0) != kFormatVersion) throw DataError("unsupported forest format version");
  Forest forest;
  forest.n_train = detail::require<std::size_t>(j, "n_train");
  forest.config = forest_config_from_json(j.at("config"));
  for (const Json& t : j.at("trees")) forest.trees.push_back(tree_from_json(t));
  for (const Tree& t : forest.trees)
    if (!t.subsample_indices.within(forest.n_train)) throw DataError("tree subsample outside the training set");
  return forest;
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace fptgrf
