#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "auditfair/forest.hpp"

namespace auditfair {

// Covariates X (no age column), binary treatment A (1 = Young) and observed
// outcome Y for one dataset.
struct TreatmentFrame {
  FeatureMatrix x;
  std::vector<uint8_t> treatment;
  std::vector<uint8_t> outcome;

  size_t size() const { return treatment.size(); }
};

// Builds the frame from a dataset with an encoder fitted WITHOUT the age
// column (the treatment indicator is kept separate and appended by the twin
// model itself).
TreatmentFrame make_treatment_frame(const Dataset& data, const FeatureEncoder& encoder);

// Random forest fitted on inputs (X, A) with outcome Y; the treatment
// indicator is an ordinary input appended as the final column.
struct TwinModel {
  std::shared_ptr<const ForestModel> forest;
  size_t covariate_cols = 0;
};

TwinModel fit_twin_model(const TreatmentFrame& train, ForestParams params);

// Per-record treatment effect estimates: tau_hat[i] is the model's callback
// probability at (x_i, A=1) minus the probability at (x_i, A=0).
struct ITEScores {
  std::vector<double> tau_hat;
  std::shared_ptr<const ForestModel> base_model;
  std::string provenance;

  size_t size() const { return tau_hat.size(); }
};

// Scores every row of x by evaluating the twin model at both treatment arms.
// x must carry the covariate columns only (no treatment column).
ITEScores estimate_ite(const TwinModel& model, const FeatureMatrix& x,
                       std::string provenance = "");

// Same as estimate_ite, but for the frame the twin was FITTED on: each row is
// scored only by the trees whose bootstrap excluded it. In-bag leaves
// memorize their own training labels, which distorts tau ordering for
// training rows; out-of-bag averaging restores the ranking that held-out rows
// see.
ITEScores estimate_ite_oob(const TwinModel& model, const TreatmentFrame& train_frame,
                           std::string provenance = "");

// CSV export (record index, tau_hat, A, Y) for audit/debug.
void write_ite_csv(const ITEScores& scores, const TreatmentFrame& frame, std::ostream& out);
void write_ite_csv(const ITEScores& scores, const TreatmentFrame& frame, const std::string& path);

}  // namespace auditfair
