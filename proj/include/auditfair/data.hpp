#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auditfair/error.hpp"

namespace auditfair {

// ---------------------------------------------------------------------------
// Applicant / dataset types
// ---------------------------------------------------------------------------

// Two-way age coding. Three-way sources (young / middle / old) collapse
// middle and old into Older at ingestion.
enum class AgeGroup : uint8_t { Young, Older };

enum class Gender : uint8_t { F, M };
enum class Occupation : uint8_t { Admin, Sales, Janitor, Security };
enum class ResumeType : uint8_t { Y, M, O, B, BL, BE };
enum class ResumeTemplate : uint8_t { A, B, C };
enum class Provenance : uint8_t { Ingested, Synthetic, Resampled };

// One resume sent in the audit. `callback` is the observed label Y;
// `latent_callback` is the pre-bias label Y* and exists only for synthetic
// data, where the generator knows it.
struct ApplicantRecord {
  std::string city_zip;
  AgeGroup age_group = AgeGroup::Young;
  Gender gender = Gender::F;
  bool employment = false;
  Occupation occupation = Occupation::Admin;
  ResumeType resume_type = ResumeType::Y;
  ResumeTemplate tmpl = ResumeTemplate::A;
  bool spanish = false;
  bool internship = false;
  bool customer_service = false;
  bool cpr = false;
  bool tech_skills = false;
  int wpm = 45;  // 45, 50 or 55
  bool grammar = false;
  bool college = false;
  bool employee_month = false;
  bool volunteer = false;
  int skill = 0;  // 0 low, 1 high
  int callback = 0;
  std::optional<int> latent_callback;

  bool operator==(const ApplicantRecord&) const = default;
};

struct GroupCounts {
  size_t young = 0;
  size_t older = 0;
  size_t young_callbacks = 0;
  size_t older_callbacks = 0;

  size_t total() const { return young + older; }
  size_t callbacks() const { return young_callbacks + older_callbacks; }
  double young_rate() const {
    return young == 0 ? 0.0 : static_cast<double>(young_callbacks) / static_cast<double>(young);
  }
  double older_rate() const {
    return older == 0 ? 0.0 : static_cast<double>(older_callbacks) / static_cast<double>(older);
  }
  // positive when Young are favored
  double gap() const { return young_rate() - older_rate(); }
};

// Ordered collection of records. Immutable by convention once built; all
// interventions copy. `trail` accumulates one line per operation applied
// (operation, parameters, seed, records affected).
struct Dataset {
  std::vector<ApplicantRecord> records;
  std::string schema_version = "audit-csv-1";
  Provenance provenance = Provenance::Ingested;
  std::vector<std::string> trail;

  size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

GroupCounts group_counts(const Dataset& data);

// New dataset holding the given rows, in the given order.
Dataset subset(const Dataset& data, std::span<const size_t> indices);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
//
// UTF-8, comma separated, header row required. Canonical column names:
//
//   city_zip, age_group, gender, employment, occupation, type, template,
//   spanish, internship, customer_service, cpr, tech_skills, wpm, grammar,
//   college, employee_month, volunteer, skill, callback [, latent_callback]
//
// Header matching is case-insensitive; spaces and hyphens are treated as
// underscores; `resume_type` is accepted as an alias for `type`. Column
// order in the file is free. `latent_callback` is optional and round-trips
// for synthetic data.

Dataset load_csv(const std::string& path);
Dataset load_csv(std::istream& in, const std::string& origin = "<stream>");

void write_csv(const Dataset& data, const std::string& path);
void write_csv(const Dataset& data, std::ostream& out);

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

// Per-feature sampling distributions. Categorical vectors are probabilities
// in declaration order of the corresponding enum; they are normalized before
// use. Covariates are always drawn independently of age.
struct FeatureMarginals {
  // alphabetical; config files round-trip through a key-sorted JSON object
  std::vector<std::pair<std::string, double>> cities = {
      {"chicago-60601", 0.3}, {"dallas-75201", 0.2}, {"miami-33101", 0.2}, {"newyork-10001", 0.3}};
  double p_female = 0.5;
  double p_employed = 0.5;
  std::vector<double> occupation = {0.25, 0.25, 0.25, 0.25};
  std::vector<double> resume_type = {1, 1, 1, 1, 1, 1};
  std::vector<double> tmpl = {1, 1, 1};
  double p_spanish = 0.5;
  double p_internship = 0.1;
  double p_customer_service = 0.5;
  double p_cpr = 0.3;
  double p_tech_skills = 0.5;
  std::vector<double> wpm = {1, 1, 1};  // over {45, 50, 55}
  double p_grammar = 0.9;
  double p_college = 0.5;
  double p_employee_month = 0.3;
  double p_volunteer = 0.4;
  double p_high_skill = 0.2;
};

// Force the generated dataset to hit these observed counts exactly. Used by
// the audit-replica benchmark, where downstream flip/deletion arithmetic
// depends on the precise totals.
struct ExactCounts {
  size_t young_total = 0;
  size_t older_total = 0;
  size_t young_callbacks = 0;
  size_t older_callbacks = 0;
};

// Configuration of the synthetic audit generator.
//
// The latent label Y* is Bernoulli(sigmoid(b + w.x)) with the intercept b
// calibrated so mean(Y*) matches base_callback_rate; covariates are drawn
// independently of age, so E[Y*|Young] = E[Y*|Older] up to sampling noise.
// Observed labels are then produced by flipping a seeded random subset:
// Young 0->1 and Older 1->0, in pairs, until the observed gap reaches
// discrimination_delta (or, with exact_counts set, until each group hits its
// target callback count). Records whose callback differs from
// latent_callback are exactly the planted biased labels.
struct SynthConfig {
  size_t n_records = 40000;
  double p_young = 0.3437;
  double base_callback_rate = 0.16;
  double discrimination_delta = 0.05;
  std::optional<ExactCounts> exact_counts;
  FeatureMarginals marginals;
  // keyed by encoded column name (see encode.hpp); missing key = weight 0
  std::map<std::string, double> qualification_weights;
  uint64_t seed = 1;

  void validate() const;

  static std::map<std::string, double> default_qualification_weights();

  // The audit study's published callback table: 13,401 Young (2,505
  // callbacks), 25,532 Older (3,587 callbacks); implied gap 0.0464.
  static SynthConfig audit_table_replica(uint64_t seed);
};

Dataset generate_synthetic(const SynthConfig& config);

// Declarative config file (JSON) mirroring SynthConfig. Keys documented in
// the README; unknown keys are rejected.
SynthConfig load_synth_config(const std::string& path);
SynthConfig parse_synth_config(const std::string& json_text);
std::string synth_config_to_json(const SynthConfig& config);

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct FoldAssignment {
  std::vector<int> fold_of;  // fold index per record, in [0, k)
  int k = 0;

  std::vector<size_t> test_indices(int fold) const;
  std::vector<size_t> train_indices(int fold) const;
};

// Stratified by (age_group, callback): per-stratum fold counts differ by at
// most one, and so do total fold sizes. Deterministic given seed.
FoldAssignment kfold_split(const Dataset& data, int k, uint64_t seed);

// ---------------------------------------------------------------------------
// small parsing/formatting helpers shared with the encoder
// ---------------------------------------------------------------------------

const char* to_string(AgeGroup g);
const char* to_string(Gender g);
const char* to_string(Occupation o);
const char* to_string(ResumeType t);
const char* to_string(ResumeTemplate t);
const char* to_string(Provenance p);

}  // namespace auditfair
