#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "auditfair/data.hpp"

namespace auditfair {

struct GroupConfusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long actual_negatives() const { return fp + tn; }
  long actual_positives() const { return tp + fn; }
  long total() const { return tp + fp + tn + fn; }
};

struct ConfusionByGroup {
  GroupConfusion young;
  GroupConfusion older;
};

enum class LabelSource : uint8_t { Observed, Repaired, Latent };
const char* to_string(LabelSource s);

struct EvalReport {
  double auc = 0;
  double fpr_young = 0;
  double fpr_old = 0;
  double fprd = 0;  // fpr_young - fpr_old
  ConfusionByGroup confusion;
  double budget_rate = 0;
  LabelSource label_source = LabelSource::Observed;

  // flat JSON object (documented in the README)
  std::string to_json() const;
};

// Top round(budget_rate * n) scores are labeled positive; ties break by
// ascending record index. round() is half-away-from-zero.
std::vector<uint8_t> threshold_by_budget(std::span<const double> scores, double budget_rate);

ConfusionByGroup compute_confusion(std::span<const uint8_t> predictions,
                                   std::span<const uint8_t> labels,
                                   std::span<const AgeGroup> groups);

// FPR_young - FPR_old; positive when the classifier discriminates against
// older applicants.
double compute_fprd(const ConfusionByGroup& confusion);

// Rank-based (Mann-Whitney) AUC with half credit for score ties.
double compute_auc(std::span<const double> scores, std::span<const uint8_t> labels);

EvalReport evaluate(std::span<const double> scores, std::span<const uint8_t> labels,
                    std::span<const AgeGroup> groups, double budget_rate,
                    LabelSource label_source = LabelSource::Observed);

}  // namespace auditfair
