#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "auditfair/encode.hpp"

namespace auditfair {

struct ForestParams {
  int n_estimators = 50;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int feature_subset = 0;  // features tried per node; 0 means ceil(sqrt(d))
  uint64_t seed = 0;
  int n_threads = 1;

  void validate() const;
};

// Flat node. feature < 0 marks a leaf; posterior is then the fraction of
// positive samples that reached it. For internal nodes, x[feature] <=
// threshold goes left.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double posterior = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict_row(std::span<const double> row) const {
    int id = 0;
    while (!nodes[id].is_leaf())
      id = row[static_cast<size_t>(nodes[id].feature)] <= nodes[id].threshold ? nodes[id].left
                                                                              : nodes[id].right;
    return nodes[id].posterior;
  }
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestParams params;
  size_t n_features = 0;
  // per tree, per TRAINING row: 1 when the row entered the tree's bootstrap.
  // Kept in memory for out-of-bag prediction; not serialized.
  std::vector<std::vector<uint8_t>> inbag;
};

// Bagged Gini trees: each tree trains on a same-size bootstrap sample, tries
// a random feature subset per node, splits at midpoints between consecutive
// unique values, and grows until min_samples_split / min_samples_leaf bind or
// no split strictly reduces weighted impurity. Each tree draws from its own
// RNG stream (seed, tree index), so results are independent of thread count.
ForestModel fit_forest(const FeatureMatrix& x, std::span<const uint8_t> y, ForestParams params);

// Mean leaf posterior across trees, per row.
std::vector<double> predict_proba(const ForestModel& model, const FeatureMatrix& x);

// Out-of-bag prediction for the model's own training rows: row i is averaged
// over the trees whose bootstrap did not contain it. x must be row-aligned
// with the training matrix (the label column may differ, e.g. a treatment
// toggle). Rows that are in-bag everywhere fall back to the full forest.
std::vector<double> predict_proba_oob(const ForestModel& model, const FeatureMatrix& x);

// Structured text serialization (topology + thresholds + posteriors).
void save_forest(const ForestModel& model, std::ostream& out);
void save_forest(const ForestModel& model, const std::string& path);
ForestModel load_forest(std::istream& in);
ForestModel load_forest_file(const std::string& path);

}  // namespace auditfair
