#include "auditfair/causal.hpp"

#include <algorithm>
#include <fstream>

namespace auditfair {

TreatmentFrame make_treatment_frame(const Dataset& data, const FeatureEncoder& encoder) {
  if (encoder.options().include_age)
    raise(Errc::InvalidConfig, "treatment frame needs an encoder without the age column");
  TreatmentFrame frame;
  frame.x = encoder.transform(data);
  frame.treatment.reserve(data.size());
  frame.outcome.reserve(data.size());
  for (const auto& r : data.records) {
    frame.treatment.push_back(r.age_group == AgeGroup::Young ? 1 : 0);
    frame.outcome.push_back(static_cast<uint8_t>(r.callback));
  }
  return frame;
}

namespace {

// covariates plus the treatment indicator as the final column
FeatureMatrix with_treatment_column(const FeatureMatrix& x, const uint8_t* treatment,
                                    double fill_value) {
  FeatureMatrix out;
  out.rows = x.rows;
  out.cols = x.cols + 1;
  out.columns = x.columns;
  out.columns.push_back(kAgeColumn);
  out.values.resize(out.rows * out.cols);
  for (size_t r = 0; r < x.rows; ++r) {
    const double* src = x.values.data() + r * x.cols;
    double* dst = out.values.data() + r * out.cols;
    std::copy(src, src + x.cols, dst);
    dst[x.cols] = treatment ? static_cast<double>(treatment[r]) : fill_value;
  }
  return out;
}

}  // namespace

TwinModel fit_twin_model(const TreatmentFrame& train, ForestParams params) {
  if (train.size() == 0) raise(Errc::EmptyTrainingSet, "empty treatment frame");
  const size_t treated = static_cast<size_t>(
      std::count(train.treatment.begin(), train.treatment.end(), uint8_t{1}));
  if (treated == 0 || treated == train.size())
    raise(Errc::SingleArm, "both treatment arms must be present to fit a twin model");

  FeatureMatrix inputs = with_treatment_column(train.x, train.treatment.data(), 0.0);
  TwinModel twin;
  twin.covariate_cols = train.x.cols;
  twin.forest = std::make_shared<const ForestModel>(fit_forest(inputs, train.outcome, params));
  return twin;
}

ITEScores estimate_ite(const TwinModel& model, const FeatureMatrix& x, std::string provenance) {
  if (!model.forest) raise(Errc::InvalidConfig, "twin model not fitted");
  if (x.cols != model.covariate_cols)
    raise(Errc::ShapeMismatch, "twin model expects " + std::to_string(model.covariate_cols) +
                                   " covariate columns, got " + std::to_string(x.cols));

  FeatureMatrix as_young = with_treatment_column(x, nullptr, 1.0);
  FeatureMatrix as_older = with_treatment_column(x, nullptr, 0.0);
  std::vector<double> y1 = predict_proba(*model.forest, as_young);
  std::vector<double> y0 = predict_proba(*model.forest, as_older);

  ITEScores scores;
  scores.base_model = model.forest;
  scores.provenance = std::move(provenance);
  scores.tau_hat.resize(x.rows);
  for (size_t i = 0; i < x.rows; ++i) scores.tau_hat[i] = y1[i] - y0[i];
  return scores;
}

ITEScores estimate_ite_oob(const TwinModel& model, const TreatmentFrame& train_frame,
                           std::string provenance) {
  if (!model.forest) raise(Errc::InvalidConfig, "twin model not fitted");
  if (train_frame.x.cols != model.covariate_cols)
    raise(Errc::ShapeMismatch, "twin model expects " + std::to_string(model.covariate_cols) +
                                   " covariate columns, got " + std::to_string(train_frame.x.cols));

  FeatureMatrix as_young = with_treatment_column(train_frame.x, nullptr, 1.0);
  FeatureMatrix as_older = with_treatment_column(train_frame.x, nullptr, 0.0);
  std::vector<double> y1 = predict_proba_oob(*model.forest, as_young);
  std::vector<double> y0 = predict_proba_oob(*model.forest, as_older);

  ITEScores scores;
  scores.base_model = model.forest;
  scores.provenance = std::move(provenance);
  scores.tau_hat.resize(train_frame.x.rows);
  for (size_t i = 0; i < train_frame.x.rows; ++i) scores.tau_hat[i] = y1[i] - y0[i];
  return scores;
}

void write_ite_csv(const ITEScores& scores, const TreatmentFrame& frame, std::ostream& out) {
  if (scores.size() != frame.size())
    raise(Errc::LengthMismatch, "scores and frame differ in length");
  out.precision(17);
  out << "index,tau_hat,treatment,outcome\n";
  for (size_t i = 0; i < scores.size(); ++i) {
    out << i << ',' << scores.tau_hat[i] << ',' << int(frame.treatment[i]) << ','
        << int(frame.outcome[i]) << "\n";
  }
}

void write_ite_csv(const ITEScores& scores, const TreatmentFrame& frame, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  write_ite_csv(scores, frame, out);
}

}  // namespace auditfair
