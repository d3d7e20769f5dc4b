#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace relapse::models {

struct ForestConfig {
  std::size_t n_trees = 11;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_leaf = 2;
  std::size_t features_per_split = 0;  // 0 = floor(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;  // fraction of positive training samples in the node
};

// Nodes are stored in preorder; x[feature] <= threshold goes left.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
  std::size_t depth() const;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  ForestConfig config;

  // Fraction of trees whose leaf votes positive (leaf fraction >= 0.5).
  double predict_proba(std::span<const double> x) const;
};

// Single CART tree on the rows selected by `sample` (repeats allowed).
DecisionTree build_tree(std::span<const std::vector<double>> x, std::span<const int> y,
                        std::span<const std::size_t> sample, const ForestConfig& config, std::uint64_t seed);

RandomForest train_forest(std::span<const std::vector<double>> x, std::span<const int> y, const ForestConfig& config);

// Header lines (`# key: value`) followed by one `tree <index> <node_count>`
// block per tree with preorder `feature,threshold,left,right,leaf_value` rows.
void write_forest(std::ostream& out, const RandomForest& forest, const std::string& normalizer_digest);
RandomForest read_forest(std::istream& in);

}  // namespace relapse::models
