#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "auditfair/forest.hpp"
#include "auditfair/rng.hpp"

using namespace auditfair;

namespace {

FeatureMatrix matrix_of(std::vector<std::vector<double>> rows) {
  FeatureMatrix x;
  x.rows = rows.size();
  x.cols = rows[0].size();
  for (size_t c = 0; c < x.cols; ++c) x.columns.push_back("f" + std::to_string(c));
  for (const auto& r : rows) x.values.insert(x.values.end(), r.begin(), r.end());
  return x;
}

// y = 1 iff x0 > 0.5
std::pair<FeatureMatrix, std::vector<uint8_t>> separable_1d(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  std::vector<uint8_t> y;
  for (size_t i = 0; i < n; ++i) {
    const double v = rng.unit();
    rows.push_back({v});
    y.push_back(v > 0.5);
  }
  return {matrix_of(std::move(rows)), std::move(y)};
}

std::pair<FeatureMatrix, std::vector<uint8_t>> xor_data() {
  std::vector<std::vector<double>> rows;
  std::vector<uint8_t> y;
  for (int rep = 0; rep < 50; ++rep) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        rows.push_back({double(a), double(b)});
        y.push_back(a ^ b);
      }
    }
  }
  return {matrix_of(std::move(rows)), std::move(y)};
}

double training_accuracy(const ForestModel& model, const FeatureMatrix& x,
                         const std::vector<uint8_t>& y) {
  auto p = predict_proba(model, x);
  size_t hits = 0;
  for (size_t i = 0; i < y.size(); ++i) hits += (p[i] >= 0.5) == (y[i] == 1);
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("axis-aligned separable data is learned exactly") {
  auto [x, y] = separable_1d(200, 3);
  ForestParams params;
  params.seed = 1;
  ForestModel model = fit_forest(x, y, params);
  CHECK(training_accuracy(model, x, y) == 1.0);
}

TEST_CASE("xor is learned with unrestricted depth") {
  auto [x, y] = xor_data();
  ForestParams params;
  params.seed = 2;
  ForestModel model = fit_forest(x, y, params);
  CHECK(training_accuracy(model, x, y) == 1.0);
}

TEST_CASE("single-class labels produce constant predictions") {
  auto [x, y] = separable_1d(100, 5);
  std::fill(y.begin(), y.end(), 0);
  ForestParams params;
  params.seed = 3;
  ForestModel model = fit_forest(x, y, params);
  for (double p : predict_proba(model, x)) CHECK(p == 0.0);

  std::fill(y.begin(), y.end(), 1);
  ForestModel ones = fit_forest(x, y, params);
  for (double p : predict_proba(ones, x)) CHECK(p == 1.0);  // pure positive leaves
}

TEST_CASE("prediction is the mean of per-tree posteriors") {
  // hand-built model: two single-leaf trees with posteriors 0.2 and 0.6
  ForestModel model;
  model.n_features = 1;
  model.trees.resize(2);
  model.trees[0].nodes.push_back({-1, 0, -1, -1, 0.2});
  model.trees[1].nodes.push_back({-1, 0, -1, -1, 0.6});
  FeatureMatrix x = matrix_of({{0.3}});
  CHECK(predict_proba(model, x)[0] == doctest::Approx(0.4));
}

TEST_CASE("training rows score confidently on separable data") {
  // rows near the class boundary are uncertain because bootstrap thresholds
  // wobble around 0.5, so the confidence claim applies off the margin
  for (uint64_t seed : {1, 2, 3}) {
    auto [x, y] = separable_1d(200, 40 + seed);
    ForestParams params;
    params.seed = seed;
    ForestModel model = fit_forest(x, y, params);
    auto p = predict_proba(model, x);
    double mean_conf = 0;
    for (size_t i = 0; i < y.size(); ++i) {
      const double conf = y[i] ? p[i] : 1.0 - p[i];
      mean_conf += conf;
      if (std::abs(x.at(i, 0) - 0.5) > 0.05) CHECK(conf >= 0.9);
    }
    CHECK(mean_conf / static_cast<double>(y.size()) >= 0.9);
  }
}

TEST_CASE("identical seeds give bit-identical predictions, threads do not matter") {
  auto [x, y] = separable_1d(300, 9);
  ForestParams params;
  params.seed = 11;
  params.n_threads = 1;
  ForestModel a = fit_forest(x, y, params);
  params.n_threads = 4;
  ForestModel b = fit_forest(x, y, params);
  auto pa = predict_proba(a, x), pb = predict_proba(b, x);
  CHECK(pa == pb);

  params.seed = 12;
  ForestModel c = fit_forest(x, y, params);
  CHECK(pa != predict_proba(c, x));
}

TEST_CASE("row permutation leaves the prediction distribution unchanged") {
  // weaker assertable form: average prediction over 20 seeds on a fixed grid
  // is statistically indistinguishable between original and permuted rows
  auto [x, y] = separable_1d(300, 21);
  std::vector<size_t> perm(x.rows);
  Rng rng(5);
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  FeatureMatrix xp = x.select_rows(perm);
  std::vector<uint8_t> yp(y.size());
  for (size_t i = 0; i < perm.size(); ++i) yp[i] = y[perm[i]];

  FeatureMatrix grid = matrix_of({{0.05}, {0.2}, {0.35}, {0.45}, {0.55}, {0.65}, {0.8}, {0.95}});
  std::vector<double> mean_orig(grid.rows, 0), mean_perm(grid.rows, 0);
  const int n_seeds = 20;
  for (int s = 0; s < n_seeds; ++s) {
    ForestParams params;
    params.seed = static_cast<uint64_t>(100 + s);
    auto po = predict_proba(fit_forest(x, y, params), grid);
    auto pp = predict_proba(fit_forest(xp, yp, params), grid);
    for (size_t g = 0; g < grid.rows; ++g) {
      mean_orig[g] += po[g] / n_seeds;
      mean_perm[g] += pp[g] / n_seeds;
    }
  }
  for (size_t g = 0; g < grid.rows; ++g) CHECK(std::abs(mean_orig[g] - mean_perm[g]) < 0.06);
}

TEST_CASE("conflicting duplicate rows terminate at the mixture posterior") {
  std::vector<std::vector<double>> rows(50, {1.0, 0.0});
  std::vector<uint8_t> y(50, 0);
  for (size_t i = 0; i < 25; ++i) y[i] = 1;
  FeatureMatrix x = matrix_of(std::move(rows));
  ForestParams params;
  params.seed = 4;
  ForestModel model = fit_forest(x, y, params);
  const double p = predict_proba(model, x)[0];
  CHECK(p > 0.3);
  CHECK(p < 0.7);
  for (const Tree& t : model.trees) CHECK(t.nodes.size() == 1);  // no zero-gain splits
}

TEST_CASE("min_samples_split of the full set yields a single leaf") {
  auto [x, y] = separable_1d(100, 31);
  ForestParams params;
  params.seed = 2;
  params.min_samples_split = 200;
  ForestModel model = fit_forest(x, y, params);
  const double base = static_cast<double>(std::count(y.begin(), y.end(), 1)) / 100.0;
  for (double p : predict_proba(model, x)) {
    CHECK(p > base - 0.2);
    CHECK(p < base + 0.2);  // bootstrap moves each tree's base rate a little
  }
  for (const Tree& t : model.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("predictions stay inside the unit interval") {
  Rng rng(55);
  std::vector<std::vector<double>> rows;
  std::vector<uint8_t> y;
  for (size_t i = 0; i < 400; ++i) {
    rows.push_back({rng.unit(), rng.below(3) / 2.0, rng.unit() * 10});
    y.push_back(rng.bernoulli(0.3));
  }
  FeatureMatrix x = matrix_of(std::move(rows));
  ForestParams params;
  params.seed = 8;
  ForestModel model = fit_forest(x, y, params);
  for (double p : predict_proba(model, x)) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("serialization round trip reproduces predictions") {
  auto [x, y] = separable_1d(150, 61);
  ForestParams params;
  params.seed = 13;
  ForestModel model = fit_forest(x, y, params);

  std::stringstream buffer;
  save_forest(model, buffer);
  ForestModel back = load_forest(buffer);
  CHECK(back.n_features == model.n_features);
  CHECK(back.trees.size() == model.trees.size());
  CHECK(predict_proba(back, x) == predict_proba(model, x));

  std::stringstream garbage("not a forest");
  CHECK_THROWS_AS(load_forest(garbage), Error);
}

TEST_CASE("shape errors") {
  auto [x, y] = separable_1d(50, 71);
  ForestParams params;
  y.pop_back();
  CHECK_THROWS_AS(fit_forest(x, y, params), Error);
  y.push_back(1);

  ForestModel model = fit_forest(x, y, params);
  FeatureMatrix wide = matrix_of({{0.1, 0.2}});
  try {
    predict_proba(model, wide);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ShapeMismatch);
  }

  FeatureMatrix empty;
  empty.cols = 1;
  std::vector<uint8_t> none;
  CHECK_THROWS_AS(fit_forest(empty, none, params), Error);
}
