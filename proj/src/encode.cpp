#include "auditfair/encode.hpp"

#include <algorithm>
#include <map>

namespace auditfair {

size_t FeatureMatrix::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) raise(Errc::InvalidConfig, "no such column '" + name + "'");
  return static_cast<size_t>(it - columns.begin());
}

bool FeatureMatrix::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const size_t> indices) const {
  FeatureMatrix out;
  out.rows = indices.size();
  out.cols = cols;
  out.columns = columns;
  out.values.resize(out.rows * cols);
  for (size_t r = 0; r < indices.size(); ++r) {
    const double* src = values.data() + indices[r] * cols;
    std::copy(src, src + cols, out.values.data() + r * cols);
  }
  return out;
}

void FeatureEncoder::fit(const Dataset& data, EncodeOptions options) {
  if (data.empty()) raise(Errc::EmptyDataset, "cannot fit encoder on an empty dataset");
  options_ = options;

  std::map<std::string, size_t> city_freq;
  for (const auto& r : data.records) ++city_freq[r.city_zip];
  kept_cities_.clear();
  const double n = static_cast<double>(data.size());
  for (const auto& [city, count] : city_freq) {
    if (static_cast<double>(count) / n >= options_.city_min_freq) kept_cities_.push_back(city);
  }
  std::sort(kept_cities_.begin(), kept_cities_.end());

  columns_.clear();
  for (const auto& c : kept_cities_) columns_.push_back("city_zip_" + c);
  columns_.push_back("city_zip_other");
  for (const char* c : {"gender_f", "gender_m", "employment", "occupation_admin",
                        "occupation_sales", "occupation_janitor", "occupation_security", "type_y",
                        "type_m", "type_o", "type_b", "type_bl", "type_be", "template_a",
                        "template_b", "template_c", "spanish", "internship", "customer_service",
                        "cpr", "tech_skills", "wpm", "grammar", "college", "employee_month",
                        "volunteer", "skill"})
    columns_.push_back(c);
  if (options_.include_age) columns_.push_back(kAgeColumn);
  fitted_ = true;
}

FeatureMatrix FeatureEncoder::transform(const Dataset& data) const {
  if (!fitted_) raise(Errc::InvalidConfig, "encoder not fitted");
  if (data.empty()) raise(Errc::EmptyDataset, "cannot encode an empty dataset");

  FeatureMatrix x;
  x.rows = data.size();
  x.cols = columns_.size();
  x.columns = columns_;
  x.values.assign(x.rows * x.cols, 0.0);

  const size_t n_city = kept_cities_.size();
  for (size_t i = 0; i < data.size(); ++i) {
    const ApplicantRecord& r = data.records[i];
    double* row = x.values.data() + i * x.cols;

    auto city = std::lower_bound(kept_cities_.begin(), kept_cities_.end(), r.city_zip);
    if (city != kept_cities_.end() && *city == r.city_zip)
      row[static_cast<size_t>(city - kept_cities_.begin())] = 1.0;
    else
      row[n_city] = 1.0;  // city_zip_other

    size_t c = n_city + 1;
    row[c + (r.gender == Gender::F ? 0 : 1)] = 1.0;
    c += 2;
    row[c++] = r.employment ? 1.0 : 0.0;
    row[c + static_cast<size_t>(r.occupation)] = 1.0;
    c += 4;
    row[c + static_cast<size_t>(r.resume_type)] = 1.0;
    c += 6;
    row[c + static_cast<size_t>(r.tmpl)] = 1.0;
    c += 3;
    row[c++] = r.spanish ? 1.0 : 0.0;
    row[c++] = r.internship ? 1.0 : 0.0;
    row[c++] = r.customer_service ? 1.0 : 0.0;
    row[c++] = r.cpr ? 1.0 : 0.0;
    row[c++] = r.tech_skills ? 1.0 : 0.0;
    row[c++] = (static_cast<double>(r.wpm) - 45.0) / 10.0;
    row[c++] = r.grammar ? 1.0 : 0.0;
    row[c++] = r.college ? 1.0 : 0.0;
    row[c++] = r.employee_month ? 1.0 : 0.0;
    row[c++] = r.volunteer ? 1.0 : 0.0;
    row[c++] = static_cast<double>(r.skill);
    if (options_.include_age) row[c++] = r.age_group == AgeGroup::Young ? 1.0 : 0.0;
  }
  return x;
}

FeatureMatrix encode_features(const Dataset& data, EncodeOptions options) {
  FeatureEncoder enc;
  enc.fit(data, options);
  return enc.transform(data);
}

}  // namespace auditfair
