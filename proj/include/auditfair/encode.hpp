#pragma once

#include <span>
#include <string>
#include <vector>

#include "auditfair/data.hpp"

namespace auditfair {

// Dense row-major feature matrix.
struct FeatureMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;
  std::vector<std::string> columns;

  double at(size_t r, size_t c) const { return values[r * cols + c]; }
  double& at(size_t r, size_t c) { return values[r * cols + c]; }
  std::span<const double> row(size_t r) const { return {values.data() + r * cols, cols}; }

  size_t column_index(const std::string& name) const;
  bool has_column(const std::string& name) const;

  FeatureMatrix select_rows(std::span<const size_t> indices) const;
};

struct EncodeOptions {
  // append the binary age column (Young = 1) as the LAST column; required by
  // the twin model and used by both screening classifiers
  bool include_age = false;
  // city categories seen in less than this fraction of records fall into the
  // city_zip_other bucket
  double city_min_freq = 0.01;
};

inline constexpr const char* kAgeColumn = "age_young";

// Column layout, fixed and in this order:
//   city_zip_<category>...   (kept categories, sorted), city_zip_other
//   gender_f, gender_m
//   employment
//   occupation_admin, occupation_sales, occupation_janitor, occupation_security
//   type_y, type_m, type_o, type_b, type_bl, type_be
//   template_a, template_b, template_c
//   spanish, internship, customer_service, cpr, tech_skills
//   wpm                      ((wpm - 45) / 10, so {0, 0.5, 1})
//   grammar, college, employee_month, volunteer, skill
//   [age_young]              (only with include_age)
//
// Fit learns the city vocabulary from one dataset; transform can then be
// applied to any other dataset (folds, resampled copies) with an identical
// column space.
class FeatureEncoder {
 public:
  void fit(const Dataset& data, EncodeOptions options = {});
  FeatureMatrix transform(const Dataset& data) const;

  bool fitted() const { return fitted_; }
  const std::vector<std::string>& columns() const { return columns_; }
  const EncodeOptions& options() const { return options_; }

 private:
  bool fitted_ = false;
  EncodeOptions options_;
  std::vector<std::string> kept_cities_;  // sorted
  std::vector<std::string> columns_;
};

// One-shot fit + transform.
FeatureMatrix encode_features(const Dataset& data, EncodeOptions options = {});

}  // namespace auditfair
