#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "auditfair/metrics.hpp"
#include "auditfair/rng.hpp"
#include "support/oracles.hpp"

using namespace auditfair;

TEST_CASE("budget thresholding") {
  Rng rng(1);
  SUBCASE("n=100 at 16% gives exactly 16 positives") {
    std::vector<double> scores(100);
    for (auto& s : scores) s = rng.unit();
    auto pred = threshold_by_budget(scores, 0.16);
    CHECK(std::count(pred.begin(), pred.end(), 1) == 16);
  }
  SUBCASE("ties break by ascending index") {
    std::vector<double> scores(10, 0.5);
    auto pred = threshold_by_budget(scores, 0.3);
    for (size_t i = 0; i < 10; ++i) CHECK(pred[i] == (i < 3 ? 1 : 0));
  }
  SUBCASE("two scores, budget one half") {
    std::vector<double> scores = {0.9, 0.1};
    auto pred = threshold_by_budget(scores, 0.5);
    CHECK(pred[0] == 1);
    CHECK(pred[1] == 0);
  }
  SUBCASE("n=38987 at 16% gives 6238 positives") {
    std::vector<double> scores(38987);
    for (auto& s : scores) s = rng.unit();
    auto pred = threshold_by_budget(scores, 0.16);
    CHECK(std::count(pred.begin(), pred.end(), 1) == 6238);
  }
  SUBCASE("count equals round(budget * n) across random cases") {
    for (int c = 0; c < 200; ++c) {
      const size_t n = 1 + rng.below(400);
      const double budget = 0.01 + 0.98 * rng.unit();
      std::vector<double> scores(n);
      for (auto& s : scores) s = rng.below(8) / 8.0;  // heavy ties
      auto pred = threshold_by_budget(scores, budget);
      const long expect = std::min<long>(static_cast<long>(n),
                                         static_cast<long>(std::floor(budget * n + 0.5)));
      CHECK(std::count(pred.begin(), pred.end(), 1) == expect);
    }
  }
  SUBCASE("errors") {
    std::vector<double> none;
    CHECK_THROWS_AS(threshold_by_budget(none, 0.16), Error);
    std::vector<double> one = {0.5};
    CHECK_THROWS_AS(threshold_by_budget(one, 0.0), std::exception);
    CHECK_THROWS_AS(threshold_by_budget(one, 1.0), std::exception);
  }
}

TEST_CASE("confusion and FPRD on the worked example") {
  // before repair: both groups have 100 actual negatives; FP 30 vs 20
  ConfusionByGroup before;
  before.young.fp = 30;
  before.young.tn = 70;
  before.older.fp = 20;
  before.older.tn = 80;
  CHECK(compute_fprd(before) == 0.3 - 0.2);  // one ulp below decimal 0.1
  CHECK(compute_fprd(before) == doctest::Approx(0.1).epsilon(1e-12));

  // after repair: young 120 AN with 45 FP, older 80 AN with 5 FP
  ConfusionByGroup after;
  after.young.fp = 45;
  after.young.tn = 75;
  after.older.fp = 5;
  after.older.tn = 75;
  CHECK(compute_fprd(after) == 0.3125);

  ConfusionByGroup same = before;
  same.older = before.young;
  CHECK(compute_fprd(same) == 0.0);

  ConfusionByGroup no_negatives;
  no_negatives.young.tp = 5;
  no_negatives.older.fp = 1;
  no_negatives.older.tn = 1;
  CHECK_THROWS_AS(compute_fprd(no_negatives), Error);
}

TEST_CASE("worked example end to end through evaluate") {
  // Scores and labels engineered so the budget reproduces the illustrative
  // table: 85 predicted positives out of 240.
  std::vector<double> scores;
  std::vector<uint8_t> labels;
  std::vector<AgeGroup> groups;
  auto add = [&](size_t count, double score, uint8_t label, AgeGroup g) {
    for (size_t i = 0; i < count; ++i) {
      scores.push_back(score);
      labels.push_back(label);
      groups.push_back(g);
    }
  };
  // young: 30 FP, 70 TN, 15 TP, 5 FN
  add(30, 0.9, 0, AgeGroup::Young);
  add(70, 0.1, 0, AgeGroup::Young);
  add(15, 0.9, 1, AgeGroup::Young);
  add(5, 0.1, 1, AgeGroup::Young);
  // older: 20 FP, 80 TN, 20 TP
  add(20, 0.9, 0, AgeGroup::Older);
  add(80, 0.1, 0, AgeGroup::Older);
  add(20, 0.9, 1, AgeGroup::Older);
  const double budget = 85.0 / 240.0;

  EvalReport before = evaluate(scores, labels, groups, budget);
  CHECK(before.fprd == 0.3 - 0.2);
  CHECK(before.fpr_young == 0.3);
  CHECK(before.fpr_old == 0.2);

  // repair: the 20 young positives become negatives (15 of them predicted
  // positive); 15 older FPs and 5 older TNs become positives
  std::vector<uint8_t> repaired = labels;
  for (size_t i = 100; i < 120; ++i) repaired[i] = 0;      // young positives
  for (size_t i = 120; i < 135; ++i) repaired[i] = 1;      // older scored 0.9
  for (size_t i = 140; i < 145; ++i) repaired[i] = 1;      // older scored 0.1
  EvalReport after = evaluate(scores, repaired, groups, budget, LabelSource::Repaired);
  CHECK(after.fpr_young == 0.375);
  CHECK(after.fpr_old == 0.0625);
  CHECK(after.fprd == 0.3125);
  CHECK(after.label_source == LabelSource::Repaired);
}

TEST_CASE("rank AUC") {
  SUBCASE("pair enumeration example") {
    std::vector<double> scores = {0.8, 0.4, 0.6, 0.2};
    std::vector<uint8_t> labels = {1, 1, 0, 0};
    CHECK(compute_auc(scores, labels) == 0.75);
  }
  SUBCASE("perfect separation") {
    std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
    std::vector<uint8_t> labels = {1, 1, 0, 0};
    CHECK(compute_auc(scores, labels) == 1.0);
  }
  SUBCASE("all ties give half credit") {
    std::vector<double> scores(10, 0.3);
    std::vector<uint8_t> labels = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    CHECK(compute_auc(scores, labels) == 0.5);
  }
  SUBCASE("single class is an error") {
    std::vector<double> scores = {0.1, 0.2};
    std::vector<uint8_t> ones = {1, 1};
    CHECK_THROWS_AS(compute_auc(scores, ones), Error);
  }
  SUBCASE("matches O(n^2) pair counting exactly on random inputs") {
    Rng rng(77);
    for (int c = 0; c < 200; ++c) {
      const size_t n = 2 + rng.below(300);
      std::vector<double> scores(n);
      std::vector<uint8_t> labels(n);
      bool has_pos = false, has_neg = false;
      for (size_t i = 0; i < n; ++i) {
        scores[i] = rng.below(12) / 12.0;  // ties are common
        labels[i] = rng.bernoulli(0.3);
        (labels[i] ? has_pos : has_neg) = true;
      }
      if (!has_pos || !has_neg) continue;
      CHECK(compute_auc(scores, labels) == oracles::auc_pair_count(scores, labels));
    }
  }
  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(78);
    std::vector<double> scores(400);
    std::vector<uint8_t> labels(400);
    for (size_t i = 0; i < scores.size(); ++i) {
      scores[i] = rng.unit();
      labels[i] = rng.bernoulli(0.4);
    }
    const double base = compute_auc(scores, labels);
    std::vector<double> cubed(scores), shifted(scores);
    for (auto& s : cubed) s = s * s * s;
    for (auto& s : shifted) s = 5 * s + 2;
    CHECK(compute_auc(cubed, labels) == doctest::Approx(base).epsilon(1e-12));
    CHECK(compute_auc(shifted, labels) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("FPRD antisymmetry under group swap") {
  Rng rng(79);
  std::vector<double> scores(500);
  std::vector<uint8_t> labels(500);
  std::vector<AgeGroup> groups(500), swapped(500);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.unit();
    labels[i] = rng.bernoulli(0.3);
    groups[i] = rng.bernoulli(0.4) ? AgeGroup::Young : AgeGroup::Older;
    swapped[i] = groups[i] == AgeGroup::Young ? AgeGroup::Older : AgeGroup::Young;
  }
  auto pred = threshold_by_budget(scores, 0.2);
  const double fprd = compute_fprd(compute_confusion(pred, labels, groups));
  const double mirrored = compute_fprd(compute_confusion(pred, labels, swapped));
  CHECK(fprd == -mirrored);
}

TEST_CASE("separable scores with budget at prevalence give zero FPR in both groups") {
  std::vector<double> scores;
  std::vector<uint8_t> labels;
  std::vector<AgeGroup> groups;
  Rng rng(80);
  for (size_t i = 0; i < 400; ++i) {
    const bool pos = i < 100;
    scores.push_back(pos ? 0.6 + 0.4 * rng.unit() : 0.4 * rng.unit());
    labels.push_back(pos);
    groups.push_back(rng.bernoulli(0.5) ? AgeGroup::Young : AgeGroup::Older);
  }
  EvalReport rep = evaluate(scores, labels, groups, 0.25);
  CHECK(rep.auc == 1.0);
  CHECK(rep.fpr_young == 0.0);
  CHECK(rep.fpr_old == 0.0);
  CHECK(rep.fprd == 0.0);
}

TEST_CASE("random scores on random labels evaluate to chance") {
  double auc_sum = 0, fprd_sum = 0;
  const int n_seeds = 5;
  for (int s = 0; s < n_seeds; ++s) {
    Rng rng(100 + s);
    const size_t n = 10000;
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    std::vector<AgeGroup> groups(n);
    for (size_t i = 0; i < n; ++i) {
      scores[i] = rng.unit();
      labels[i] = rng.bernoulli(0.16);
      groups[i] = rng.bernoulli(0.34) ? AgeGroup::Young : AgeGroup::Older;
    }
    EvalReport rep = evaluate(scores, labels, groups, 0.16);
    CHECK(rep.auc == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(rep.fprd) < 0.03);
    auc_sum += rep.auc;
    fprd_sum += rep.fprd;
  }
  CHECK(auc_sum / n_seeds == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(fprd_sum / n_seeds) < 0.02);
}

TEST_CASE("evaluate validates input lengths") {
  std::vector<double> scores = {0.5, 0.4};
  std::vector<uint8_t> labels = {1};
  std::vector<AgeGroup> groups = {AgeGroup::Young, AgeGroup::Older};
  CHECK_THROWS_AS(evaluate(scores, labels, groups, 0.5), Error);
}

TEST_CASE("eval report serializes to flat json") {
  ConfusionByGroup c;
  c.young = {3, 2, 10, 1};
  c.older = {4, 1, 12, 2};
  EvalReport rep;
  rep.auc = 0.75;
  rep.confusion = c;
  rep.fprd = compute_fprd(c);
  rep.budget_rate = 0.16;
  const std::string j = rep.to_json();
  CHECK(j.find("\"auc\":0.75") != std::string::npos);
  CHECK(j.find("\"fp_young\":2") != std::string::npos);
  CHECK(j.find("\"label_source\":\"observed\"") != std::string::npos);
}
