#include "auditfair/forest.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "auditfair/rng.hpp"

namespace auditfair {

void ForestParams::validate() const {
  if (n_estimators < 1) raise(Errc::InvalidConfig, "n_estimators must be >= 1");
  if (min_samples_split < 2) raise(Errc::InvalidConfig, "min_samples_split must be >= 2");
  if (min_samples_leaf < 1) raise(Errc::InvalidConfig, "min_samples_leaf must be >= 1");
  if (feature_subset < 0) raise(Errc::InvalidConfig, "feature_subset must be >= 0");
}

namespace {

constexpr double kMinGain = 1e-12;

// Per-feature value vocabulary. Training values are mapped to bin indices
// (positions in the sorted unique-value list) once up front, so a node can
// score every candidate threshold of a feature in one counting pass instead
// of sorting its rows.
struct BinnedData {
  size_t n_rows = 0;
  size_t n_features = 0;
  std::vector<std::vector<double>> values;  // per feature, sorted unique
  std::vector<std::vector<uint32_t>> bins;  // per feature, bin index per row

  void build(const FeatureMatrix& x) {
    n_rows = x.rows;
    n_features = x.cols;
    values.resize(n_features);
    bins.resize(n_features);
    std::vector<double> col(n_rows);
    for (size_t f = 0; f < n_features; ++f) {
      for (size_t r = 0; r < n_rows; ++r) col[r] = x.at(r, f);
      std::vector<double> uniq = col;
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      values[f] = uniq;
      auto& b = bins[f];
      b.resize(n_rows);
      for (size_t r = 0; r < n_rows; ++r) {
        b[r] = static_cast<uint32_t>(
            std::lower_bound(uniq.begin(), uniq.end(), col[r]) - uniq.begin());
      }
    }
  }
};

struct BinCount {
  uint32_t total = 0;
  uint32_t positive = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, std::span<const uint8_t> y, const ForestParams& params,
              size_t mtry, uint64_t tree_index)
      : data_(data),
        y_(y),
        params_(params),
        mtry_(mtry),
        rng_(rng_stream(params.seed, "tree", tree_index)) {
    hist_.resize(data_.n_features);
    for (size_t f = 0; f < data_.n_features; ++f) hist_[f].resize(data_.values[f].size());
  }

  Tree build(std::vector<uint8_t>& inbag) {
    // bootstrap: n draws with replacement
    const size_t n = data_.n_rows;
    rows_.resize(n);
    inbag.assign(n, 0);
    for (size_t i = 0; i < n; ++i) {
      rows_[i] = static_cast<uint32_t>(rng_.below(n));
      inbag[rows_[i]] = 1;
    }

    Tree tree;
    grow(tree, 0, n);
    return tree;
  }

 private:
  static double impurity_terms(double pos, double total) {
    // total * gini = total - (pos^2 + neg^2) / total
    const double neg = total - pos;
    return total - (pos * pos + neg * neg) / total;
  }

  int grow(Tree& tree, size_t begin, size_t end) {
    const size_t n_node = end - begin;
    size_t n_pos = 0;
    for (size_t i = begin; i < end; ++i) n_pos += y_[rows_[i]];

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[node_id].posterior = static_cast<double>(n_pos) / static_cast<double>(n_node);

    if (n_node < static_cast<size_t>(params_.min_samples_split) || n_pos == 0 || n_pos == n_node)
      return node_id;

    // candidate features, evaluated in ascending index order so equal gains
    // resolve to the lowest feature index
    std::vector<size_t> features = rng_.sample_distinct(data_.n_features, mtry_);
    std::sort(features.begin(), features.end());

    const double parent_imp = impurity_terms(static_cast<double>(n_pos), static_cast<double>(n_node));
    double best_gain = kMinGain;
    int best_feature = -1;
    uint32_t best_bin = 0;

    for (size_t f : features) {
      auto& hist = hist_[f];
      const auto& fbins = data_.bins[f];
      const size_t n_bins = hist.size();
      if (n_bins < 2) continue;
      std::fill(hist.begin(), hist.end(), BinCount{});
      uint32_t lo_bin = static_cast<uint32_t>(n_bins), hi_bin = 0;
      for (size_t i = begin; i < end; ++i) {
        const uint32_t b = fbins[rows_[i]];
        ++hist[b].total;
        hist[b].positive += y_[rows_[i]];
        lo_bin = std::min(lo_bin, b);
        hi_bin = std::max(hi_bin, b);
      }
      if (lo_bin == hi_bin) continue;  // constant within node

      double left_total = 0, left_pos = 0;
      for (uint32_t b = lo_bin; b < hi_bin; ++b) {
        left_total += hist[b].total;
        left_pos += hist[b].positive;
        if (left_total == 0) continue;
        const double right_total = static_cast<double>(n_node) - left_total;
        if (left_total < params_.min_samples_leaf || right_total < params_.min_samples_leaf)
          continue;
        const double right_pos = static_cast<double>(n_pos) - left_pos;
        const double child_imp =
            impurity_terms(left_pos, left_total) + impurity_terms(right_pos, right_total);
        const double gain = (parent_imp - child_imp) / static_cast<double>(n_node);
        if (gain > best_gain) {  // strict: first (lowest feature, lowest threshold) wins ties
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }

    if (best_feature < 0) return node_id;  // no strictly impurity-reducing split

    const auto& vals = data_.values[static_cast<size_t>(best_feature)];
    const double threshold = 0.5 * (vals[best_bin] + vals[best_bin + 1]);

    const auto& fbins = data_.bins[static_cast<size_t>(best_feature)];
    auto mid_it = std::stable_partition(
        rows_.begin() + static_cast<ptrdiff_t>(begin), rows_.begin() + static_cast<ptrdiff_t>(end),
        [&](uint32_t r) { return fbins[r] <= best_bin; });
    const size_t mid = static_cast<size_t>(mid_it - rows_.begin());
    assert(mid > begin && mid < end);

    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = threshold;
    const int left = grow(tree, begin, mid);
    tree.nodes[node_id].left = left;
    const int right = grow(tree, mid, end);
    tree.nodes[node_id].right = right;
    return node_id;
  }

  const BinnedData& data_;
  std::span<const uint8_t> y_;
  const ForestParams& params_;
  size_t mtry_;
  Rng rng_;
  std::vector<uint32_t> rows_;
  std::vector<std::vector<BinCount>> hist_;
};

}  // namespace

ForestModel fit_forest(const FeatureMatrix& x, std::span<const uint8_t> y, ForestParams params) {
  params.validate();
  if (x.rows != y.size())
    raise(Errc::ShapeMismatch, "feature rows (" + std::to_string(x.rows) + ") != labels (" +
                                   std::to_string(y.size()) + ")");
  if (x.rows < 2) raise(Errc::EmptyTrainingSet, "need at least 2 training rows");
  if (x.cols == 0) raise(Errc::ShapeMismatch, "no feature columns");

  BinnedData binned;
  binned.build(x);

  const size_t mtry = params.feature_subset > 0
                          ? std::min<size_t>(static_cast<size_t>(params.feature_subset), x.cols)
                          : static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols))));

  ForestModel model;
  model.params = params;
  model.n_features = x.cols;
  model.trees.resize(static_cast<size_t>(params.n_estimators));
  model.inbag.resize(model.trees.size());

  auto build_range = [&](size_t first, size_t last) {
    for (size_t t = first; t < last; ++t) {
      TreeBuilder builder(binned, y, params, mtry, t);
      model.trees[t] = builder.build(model.inbag[t]);
    }
  };

  const size_t n_trees = model.trees.size();
  size_t n_threads = params.n_threads > 0 ? static_cast<size_t>(params.n_threads)
                                          : std::max<size_t>(1, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, n_trees);
  if (n_threads <= 1) {
    build_range(0, n_trees);
  } else {
    std::vector<std::thread> workers;
    for (size_t w = 0; w < n_threads; ++w) {
      const size_t first = n_trees * w / n_threads;
      const size_t last = n_trees * (w + 1) / n_threads;
      workers.emplace_back(build_range, first, last);
    }
    for (auto& t : workers) t.join();
  }
  return model;
}

std::vector<double> predict_proba(const ForestModel& model, const FeatureMatrix& x) {
  if (x.cols != model.n_features)
    raise(Errc::ShapeMismatch, "model expects " + std::to_string(model.n_features) +
                                   " features, got " + std::to_string(x.cols));
  std::vector<double> out(x.rows, 0.0);
  const double inv = 1.0 / static_cast<double>(model.trees.size());
  for (size_t r = 0; r < x.rows; ++r) {
    double acc = 0;
    auto row = x.row(r);
    for (const Tree& t : model.trees) acc += t.predict_row(row);
    out[r] = acc * inv;
  }
  return out;
}

std::vector<double> predict_proba_oob(const ForestModel& model, const FeatureMatrix& x) {
  if (x.cols != model.n_features)
    raise(Errc::ShapeMismatch, "model expects " + std::to_string(model.n_features) +
                                   " features, got " + std::to_string(x.cols));
  if (model.inbag.size() != model.trees.size() ||
      (!model.inbag.empty() && model.inbag.front().size() != x.rows))
    raise(Errc::ShapeMismatch,
          "out-of-bag prediction needs the model's own training rows (no in-bag record of "
          "this shape)");

  std::vector<double> out(x.rows, 0.0);
  for (size_t r = 0; r < x.rows; ++r) {
    double acc = 0;
    size_t used = 0;
    auto row = x.row(r);
    for (size_t t = 0; t < model.trees.size(); ++t) {
      if (model.inbag[t][r]) continue;
      acc += model.trees[t].predict_row(row);
      ++used;
    }
    if (used == 0) {  // in every bootstrap; fall back to the full forest
      for (const Tree& tree : model.trees) acc += tree.predict_row(row);
      used = model.trees.size();
    }
    out[r] = acc / static_cast<double>(used);
  }
  return out;
}

// --------------------------------------------------------------------------
// serialization: line-oriented text, documented in the README
// --------------------------------------------------------------------------

void save_forest(const ForestModel& model, std::ostream& out) {
  out.precision(17);
  out << "auditfair-forest 1\n";
  out << "n_features " << model.n_features << "\n";
  out << "params " << model.params.n_estimators << " " << model.params.min_samples_split << " "
      << model.params.min_samples_leaf << " " << model.params.feature_subset << " "
      << model.params.seed << "\n";
  out << "n_trees " << model.trees.size() << "\n";
  for (size_t t = 0; t < model.trees.size(); ++t) {
    const Tree& tree = model.trees[t];
    out << "tree " << t << " " << tree.nodes.size() << "\n";
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf())
        out << "leaf " << n.posterior << "\n";
      else
        out << "node " << n.feature << " " << n.threshold << " " << n.left << " " << n.right
            << "\n";
    }
  }
}

void save_forest(const ForestModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  save_forest(model, out);
}

ForestModel load_forest(std::istream& in) {
  auto fail = [](const std::string& what) -> void { raise(Errc::InvalidValue, "forest file: " + what); };

  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "auditfair-forest" || version != 1)
    fail("bad header");

  ForestModel model;
  std::string key;
  size_t n_trees = 0;
  if (!(in >> key >> model.n_features) || key != "n_features") fail("expected n_features");
  if (!(in >> key >> model.params.n_estimators >> model.params.min_samples_split >>
        model.params.min_samples_leaf >> model.params.feature_subset >> model.params.seed) ||
      key != "params")
    fail("expected params");
  if (!(in >> key >> n_trees) || key != "n_trees") fail("expected n_trees");

  model.trees.resize(n_trees);
  for (size_t t = 0; t < n_trees; ++t) {
    size_t index = 0, n_nodes = 0;
    if (!(in >> key >> index >> n_nodes) || key != "tree" || index != t) fail("expected tree");
    Tree& tree = model.trees[t];
    tree.nodes.resize(n_nodes);
    for (size_t i = 0; i < n_nodes; ++i) {
      if (!(in >> key)) fail("truncated tree");
      TreeNode& n = tree.nodes[i];
      if (key == "leaf") {
        if (!(in >> n.posterior)) fail("bad leaf");
      } else if (key == "node") {
        if (!(in >> n.feature >> n.threshold >> n.left >> n.right)) fail("bad node");
      } else {
        fail("unexpected token '" + key + "'");
      }
    }
  }
  return model;
}

ForestModel load_forest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open '" + path + "'");
  return load_forest(in);
}

}  // namespace auditfair
