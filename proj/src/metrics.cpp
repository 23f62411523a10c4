#include "auditfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace auditfair {

const char* to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Observed: return "observed";
    case LabelSource::Repaired: return "repaired";
    case LabelSource::Latent: return "latent";
  }
  return "?";
}

std::vector<uint8_t> threshold_by_budget(std::span<const double> scores, double budget_rate) {
  if (scores.empty()) raise(Errc::EmptyScores, "no scores to threshold");
  if (!(budget_rate > 0.0 && budget_rate < 1.0))
    raise(Errc::InvalidConfig, "budget_rate must be in (0,1)");

  const size_t n = scores.size();
  // half-away-from-zero round of budget*n
  size_t n_positive = static_cast<size_t>(std::floor(budget_rate * static_cast<double>(n) + 0.5));
  n_positive = std::min(n_positive, n);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  std::vector<uint8_t> pred(n, 0);
  for (size_t i = 0; i < n_positive; ++i) pred[order[i]] = 1;
  return pred;
}

ConfusionByGroup compute_confusion(std::span<const uint8_t> predictions,
                                   std::span<const uint8_t> labels,
                                   std::span<const AgeGroup> groups) {
  if (predictions.size() != labels.size() || labels.size() != groups.size())
    raise(Errc::LengthMismatch, "predictions, labels and groups must have equal length");

  ConfusionByGroup c;
  for (size_t i = 0; i < labels.size(); ++i) {
    GroupConfusion& g = groups[i] == AgeGroup::Young ? c.young : c.older;
    if (labels[i]) {
      predictions[i] ? ++g.tp : ++g.fn;
    } else {
      predictions[i] ? ++g.fp : ++g.tn;
    }
  }
  return c;
}

double compute_fprd(const ConfusionByGroup& confusion) {
  const long an_y = confusion.young.actual_negatives();
  const long an_o = confusion.older.actual_negatives();
  if (an_y == 0 || an_o == 0)
    raise(Errc::UndefinedFPR, "a group has no actual negatives; FPR undefined");
  const double fpr_y = static_cast<double>(confusion.young.fp) / static_cast<double>(an_y);
  const double fpr_o = static_cast<double>(confusion.older.fp) / static_cast<double>(an_o);
  return fpr_y - fpr_o;
}

double compute_auc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size())
    raise(Errc::LengthMismatch, "scores and labels must have equal length");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (uint8_t y : labels) n_pos += y;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    raise(Errc::SingleClass, "AUC needs at least one positive and one negative label");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups; sum ranks of positives
  double rank_sum_pos = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

EvalReport evaluate(std::span<const double> scores, std::span<const uint8_t> labels,
                    std::span<const AgeGroup> groups, double budget_rate,
                    LabelSource label_source) {
  if (scores.size() != labels.size() || labels.size() != groups.size())
    raise(Errc::LengthMismatch, "scores, labels and groups must have equal length");

  EvalReport rep;
  rep.budget_rate = budget_rate;
  rep.label_source = label_source;
  std::vector<uint8_t> pred = threshold_by_budget(scores, budget_rate);
  rep.confusion = compute_confusion(pred, labels, groups);
  rep.fprd = compute_fprd(rep.confusion);
  rep.fpr_young = static_cast<double>(rep.confusion.young.fp) /
                  static_cast<double>(rep.confusion.young.actual_negatives());
  rep.fpr_old = static_cast<double>(rep.confusion.older.fp) /
                static_cast<double>(rep.confusion.older.actual_negatives());
  rep.auc = compute_auc(scores, labels);
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["auc"] = auc;
  j["fpr_young"] = fpr_young;
  j["fpr_old"] = fpr_old;
  j["fprd"] = fprd;
  j["budget_rate"] = budget_rate;
  j["label_source"] = to_string(label_source);
  j["tp_young"] = confusion.young.tp;
  j["fp_young"] = confusion.young.fp;
  j["tn_young"] = confusion.young.tn;
  j["fn_young"] = confusion.young.fn;
  j["tp_old"] = confusion.older.tp;
  j["fp_old"] = confusion.older.fp;
  j["tn_old"] = confusion.older.tn;
  j["fn_old"] = confusion.older.fn;
  return j.dump();
}

}  // namespace auditfair
