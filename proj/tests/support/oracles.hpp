#pragma once

// Test-only reference implementations. Everything here is independent of the
// library code it checks: brute-force pair counting for AUC, the exact
// stratified difference-of-means treatment-effect estimator for discrete
// covariates, and the classical distribution functions the statistical
// assertions need.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace oracles {

// O(n^2) AUC: wins + half credit for ties over all positive-negative pairs.
inline double auc_pair_count(std::span<const double> scores, std::span<const uint8_t> labels) {
  double wins = 0, ties = 0;
  size_t n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    ++n_pos;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) ties += 1;
    }
  }
  n_neg = scores.size() - n_pos;
  return (wins + 0.5 * ties) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Stratified plug-in estimator: for each exact covariate pattern, the mean
// outcome among treated minus the mean among controls.
struct StratifiedIte {
  std::map<std::vector<double>, std::pair<std::pair<double, size_t>, std::pair<double, size_t>>>
      cells;  // pattern -> ((sum1, n1), (sum0, n0))

  void add(std::vector<double> pattern, int treatment, double outcome) {
    auto& cell = cells[std::move(pattern)];
    auto& side = treatment ? cell.first : cell.second;
    side.first += outcome;
    side.second += 1;
  }

  double estimate(const std::vector<double>& pattern) const {
    const auto& cell = cells.at(pattern);
    return cell.first.first / static_cast<double>(cell.first.second) -
           cell.second.first / static_cast<double>(cell.second.second);
  }
};

// regularized lower incomplete gamma P(a, x), series + continued fraction
inline double gamma_p(double a, double x) {
  if (x <= 0) return 0;
  const double gln = std::lgamma(a);
  if (x < a + 1) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1 - a, c = 1e300, d = 1 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1) < 1e-14) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

// chi-square survival function with k degrees of freedom
inline double chi2_sf(double x, double k) { return 1.0 - gamma_p(k / 2.0, x / 2.0); }

// chi-square independence test p-value for an r x c contingency table
inline double chi2_independence_p(const std::vector<std::vector<double>>& table) {
  const size_t rows = table.size(), cols = table[0].size();
  std::vector<double> row_sum(rows, 0), col_sum(cols, 0);
  double total = 0;
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      row_sum[r] += table[r][c];
      col_sum[c] += table[r][c];
      total += table[r][c];
    }
  double stat = 0;
  size_t live_rows = 0, live_cols = 0;
  for (size_t r = 0; r < rows; ++r) live_rows += row_sum[r] > 0;
  for (size_t c = 0; c < cols; ++c) live_cols += col_sum[c] > 0;
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      if (row_sum[r] == 0 || col_sum[c] == 0) continue;
      const double expected = row_sum[r] * col_sum[c] / total;
      stat += (table[r][c] - expected) * (table[r][c] - expected) / expected;
    }
  }
  const double dof = static_cast<double>((live_rows - 1) * (live_cols - 1));
  if (dof <= 0) return 1.0;
  return chi2_sf(stat, dof);
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

struct KendallResult {
  double tau = 0;      // tau-b
  double p_one_sided = 1;  // P(T >= observed) under independence
};

// Kendall tau-b with the tie-corrected normal approximation.
inline KendallResult kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  double concordant = 0, discordant = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      const double prod = dx * dy;
      if (prod > 0) concordant += 1;
      else if (prod < 0) discordant += 1;
    }
  }
  auto tie_terms = [&](std::span<const double> v, double& t1, double& t2, double& t3) {
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    t1 = t2 = t3 = 0;
    size_t i = 0;
    while (i < sorted.size()) {
      size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      t1 += t * (t - 1) / 2;
      t2 += t * (t - 1) * (2 * t + 5);
      t3 += t * (t - 1) * (t - 2);
      i = j + 1;
    }
  };
  double tx1, tx2, tx3, ty1, ty2, ty3;
  tie_terms(x, tx1, tx2, tx3);
  tie_terms(y, ty1, ty2, ty3);

  const double n0 = static_cast<double>(n) * (n - 1) / 2;
  const double s = concordant - discordant;
  KendallResult result;
  const double denom = std::sqrt((n0 - tx1) * (n0 - ty1));
  result.tau = denom > 0 ? s / denom : 0;

  const double nn = static_cast<double>(n);
  double var = (nn * (nn - 1) * (2 * nn + 5) - tx2 - ty2) / 18.0;
  if (n > 2) var += tx3 * ty3 / (9 * nn * (nn - 1) * (nn - 2));
  var += 2 * tx1 * ty1 / (nn * (nn - 1));
  if (var <= 0) return result;
  const double z = s / std::sqrt(var);
  result.p_one_sided = normal_sf(z);
  return result;
}

}  // namespace oracles
