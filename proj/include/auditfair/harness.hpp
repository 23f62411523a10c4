#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auditfair/data.hpp"
#include "auditfair/forest.hpp"
#include "auditfair/metrics.hpp"
#include "auditfair/mlp.hpp"
#include "auditfair/repair.hpp"

namespace auditfair {

// The four experimental settings. BR trains and evaluates on the data as
// observed. EBR equalizes base rates on the training fold only. The ITE
// settings repair labels with Algorithm-style flips: IteTrainAndTest repairs
// both folds, EbrTrainIteTest combines EBR training data with a repaired
// test fold.
enum class Setting : uint8_t { BR, EBR, IteTrainAndTest, EbrTrainIteTest };
enum class ModelKind : uint8_t { Forest, Mlp };

const char* to_string(Setting s);
const char* to_string(ModelKind m);
Setting parse_setting(const std::string& name);
ModelKind parse_model(const std::string& name);

struct DataSource {
  std::string csv_path;               // used when synth is absent
  std::optional<SynthConfig> synth;
};

struct ExperimentConfig {
  Setting setting = Setting::BR;
  ModelKind model = ModelKind::Forest;
  int k_folds = 5;
  double budget_rate = 0.16;
  uint64_t seed = 1;
  DataSource data;
  ForestParams forest;   // also the twin-model parameters
  MlpParams mlp;
  bool parallel_folds = true;

  void validate() const;
};

struct FoldOutcome {
  int fold = 0;
  EvalReport primary;                  // labels per the setting's contract
  // same scores re-evaluated against the raw observed test labels; present
  // for the ITE-test settings, where it shows what the biased labels would
  // have reported for the identical model
  std::optional<EvalReport> observed;
  std::optional<EvalReport> latent;    // against Y*, synthetic data only
  std::optional<RepairLog> train_repair;
  std::optional<RepairLog> test_repair;
};

struct MetricAggregate {
  double fprd_mean = 0, fprd_std = 0;
  double auc_mean = 0, auc_std = 0;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<FoldOutcome> folds;
  MetricAggregate aggregate;                   // over primary per-fold reports
  std::optional<MetricAggregate> observed_aggregate;
  std::optional<MetricAggregate> latent_aggregate;
  double duration_seconds = 0;  // informational; never written to report files
  std::string x_label = "auc";
  std::optional<double> x_value;  // sweep coordinate; defaults to auc_mean
};

Dataset resolve_data(const ExperimentConfig& config);

// One setting, one seed, k-fold CV. Deterministic given (config, seed);
// folds may run in parallel without changing any result.
RunResult run_setting(const ExperimentConfig& config, const Dataset& data);
RunResult run_setting(const ExperimentConfig& config);

// Same config across several seeds (config.seed is replaced per run).
std::vector<RunResult> run_seeds(const ExperimentConfig& config, std::span<const uint64_t> seeds,
                                 const Dataset& data);

struct Rq3Result {
  std::vector<RunResult> original;  // one RunResult per requested setting
  std::vector<RunResult> doubled;
  // |FPRD(EbrTrainIteTest) - FPRD(EBR)| of the across-fold means
  double discrepancy_original = 0;
  double discrepancy_doubled = 0;
};

// Applies double_discrimination to the source data, then runs the requested
// settings on both versions.
Rq3Result run_rq3(const ExperimentConfig& base, double target_gap,
                  std::span<const Setting> settings, const Dataset& data);

struct Rq4Level {
  double disparity = 0;  // x = P(Spanish|Young) - P(Spanish|Older)
  bool skipped = false;
  std::string note;
  std::vector<RunResult> runs;  // one per setting
};

// For each disparity level x, resamples the data so the Spanish marginals
// sit symmetrically around the base marginal (p +- x/2) and runs the
// requested settings. Infeasible levels are skipped with a note.
std::vector<Rq4Level> run_rq4(const ExperimentConfig& base, std::span<const double> levels,
                              std::span<const Setting> settings, const Dataset& data);

// Writes config.json, folds.csv, aggregate.json and plot_data.csv into
// out_dir and returns the four paths. Bodies are byte-identical across reruns
// of the same configs and seeds.
std::vector<std::string> emit_reports(std::span<const RunResult> runs, const std::string& out_dir);

std::string config_to_json(const ExperimentConfig& config);

}  // namespace auditfair
