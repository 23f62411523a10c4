#include "auditfair/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "auditfair/causal.hpp"
#include "auditfair/rng.hpp"

namespace auditfair {

using nlohmann::json;

const char* to_string(Setting s) {
  switch (s) {
    case Setting::BR: return "br";
    case Setting::EBR: return "ebr";
    case Setting::IteTrainAndTest: return "ite_train_test";
    case Setting::EbrTrainIteTest: return "ebr_train_ite_test";
  }
  return "?";
}

const char* to_string(ModelKind m) { return m == ModelKind::Forest ? "forest" : "mlp"; }

Setting parse_setting(const std::string& name) {
  if (name == "br") return Setting::BR;
  if (name == "ebr") return Setting::EBR;
  if (name == "ite_train_test") return Setting::IteTrainAndTest;
  if (name == "ebr_train_ite_test") return Setting::EbrTrainIteTest;
  raise(Errc::InvalidConfig, "unknown setting '" + name +
                                 "' (expected br, ebr, ite_train_test or ebr_train_ite_test)");
}

ModelKind parse_model(const std::string& name) {
  if (name == "forest") return ModelKind::Forest;
  if (name == "mlp") return ModelKind::Mlp;
  raise(Errc::InvalidConfig, "unknown model '" + name + "' (expected forest or mlp)");
}

void ExperimentConfig::validate() const {
  if (k_folds < 2) raise(Errc::InvalidConfig, "k_folds must be >= 2");
  if (!(budget_rate > 0 && budget_rate < 1))
    raise(Errc::InvalidConfig, "budget_rate must be in (0,1)");
  if (data.csv_path.empty() && !data.synth)
    raise(Errc::InvalidConfig, "no data source: set a csv path or a synth config");
  forest.validate();
  mlp.validate();
}

Dataset resolve_data(const ExperimentConfig& config) {
  if (config.data.synth) return generate_synthetic(*config.data.synth);
  return load_csv(config.data.csv_path);
}

namespace {

uint64_t derive_seed(uint64_t seed, std::string_view name, uint64_t index) {
  return rng_stream(seed, name, index).next_u64();
}

std::vector<uint8_t> observed_labels(const Dataset& data) {
  std::vector<uint8_t> y(data.size());
  for (size_t i = 0; i < data.size(); ++i) y[i] = static_cast<uint8_t>(data.records[i].callback);
  return y;
}

std::vector<AgeGroup> age_groups(const Dataset& data) {
  std::vector<AgeGroup> g(data.size());
  for (size_t i = 0; i < data.size(); ++i) g[i] = data.records[i].age_group;
  return g;
}

std::optional<std::vector<uint8_t>> latent_labels(const Dataset& data) {
  std::vector<uint8_t> y(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    if (!data.records[i].latent_callback) return std::nullopt;
    y[i] = static_cast<uint8_t>(*data.records[i].latent_callback);
  }
  return y;
}

std::vector<double> fit_and_score(const ExperimentConfig& config, const FeatureMatrix& x_train,
                                  std::span<const uint8_t> y_train, const FeatureMatrix& x_test,
                                  int fold, bool single_thread) {
  if (config.model == ModelKind::Forest) {
    ForestParams fp = config.forest;
    fp.seed = derive_seed(config.seed, "model", static_cast<uint64_t>(fold));
    fp.n_threads = single_thread ? 1 : 0;
    ForestModel model = fit_forest(x_train, y_train, fp);
    return predict_proba(model, x_test);
  }
  MlpParams mp = config.mlp;
  mp.seed = derive_seed(config.seed, "model", static_cast<uint64_t>(fold));
  MlpModel model = fit_mlp(x_train, y_train, mp);
  return mlp_predict_proba(model, x_test);
}

FoldOutcome run_fold(const ExperimentConfig& config, const Dataset& data,
                     const FoldAssignment& folds, const FeatureEncoder& enc_model,
                     const FeatureEncoder& enc_cov, int fold, bool single_thread) {
  FoldOutcome out;
  out.fold = fold;

  const std::vector<size_t> train_idx = folds.train_indices(fold);
  const std::vector<size_t> test_idx = folds.test_indices(fold);
  Dataset train_ds = subset(data, train_idx);
  Dataset test_ds = subset(data, test_idx);

  Dataset model_train;                    // what the classifier trains on
  std::vector<uint8_t> eval_labels;       // what the test fold is scored against
  LabelSource source = LabelSource::Observed;

  const bool repair_test =
      config.setting == Setting::IteTrainAndTest || config.setting == Setting::EbrTrainIteTest;

  std::optional<TwinModel> twin;
  std::optional<TreatmentFrame> train_frame;
  if (repair_test) {
    // the twin model only ever sees the raw training fold
    train_frame = make_treatment_frame(train_ds, enc_cov);
    ForestParams tp = config.forest;
    tp.seed = derive_seed(config.seed, "twin", static_cast<uint64_t>(fold));
    tp.n_threads = single_thread ? 1 : 0;
    twin = fit_twin_model(*train_frame, tp);
  }

  switch (config.setting) {
    case Setting::BR:
      model_train = std::move(train_ds);
      break;
    case Setting::EBR:
      model_train = equalize_base_rate(train_ds, derive_seed(config.seed, "ebr", fold)).data;
      break;
    case Setting::IteTrainAndTest: {
      // training rows are scored out-of-bag so their tau ranking matches what
      // held-out rows get from the same twin
      ITEScores train_scores = estimate_ite_oob(*twin, *train_frame, "train");
      RepairResult repaired = repair_labels_ite(train_ds, train_scores);
      out.train_repair = std::move(repaired.log);
      model_train = std::move(repaired.data);
      break;
    }
    case Setting::EbrTrainIteTest:
      model_train = equalize_base_rate(train_ds, derive_seed(config.seed, "ebr", fold)).data;
      break;
  }

  std::vector<uint8_t> raw_labels = observed_labels(test_ds);
  if (repair_test) {
    ITEScores test_scores = estimate_ite(*twin, enc_cov.transform(test_ds), "test");
    RepairResult repaired = repair_labels_ite(test_ds, test_scores);
    out.test_repair = std::move(repaired.log);
    eval_labels = observed_labels(repaired.data);
    source = LabelSource::Repaired;
  } else {
    eval_labels = raw_labels;
  }

  FeatureMatrix x_train = enc_model.transform(model_train);
  const std::vector<uint8_t> y_train = observed_labels(model_train);
  FeatureMatrix x_test = enc_model.transform(test_ds);
  const std::vector<double> scores =
      fit_and_score(config, x_train, y_train, x_test, fold, single_thread);

  const std::vector<AgeGroup> groups = age_groups(test_ds);
  out.primary = evaluate(scores, eval_labels, groups, config.budget_rate, source);
  if (repair_test)
    out.observed =
        evaluate(scores, raw_labels, groups, config.budget_rate, LabelSource::Observed);
  if (auto y_star = latent_labels(test_ds))
    out.latent = evaluate(scores, *y_star, groups, config.budget_rate, LabelSource::Latent);
  return out;
}

enum class ReportView { Primary, Observed, Latent };

MetricAggregate aggregate_reports(const std::vector<FoldOutcome>& folds, ReportView view) {
  std::vector<double> fprd, auc;
  for (const auto& f : folds) {
    const EvalReport& r = view == ReportView::Latent    ? *f.latent
                          : view == ReportView::Observed ? *f.observed
                                                         : f.primary;
    fprd.push_back(r.fprd);
    auc.push_back(r.auc);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto sample_std = [&](const std::vector<double>& v, double m) {
    if (v.size() < 2) return 0.0;
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  MetricAggregate a;
  a.fprd_mean = mean(fprd);
  a.fprd_std = sample_std(fprd, a.fprd_mean);
  a.auc_mean = mean(auc);
  a.auc_std = sample_std(auc, a.auc_mean);
  return a;
}

}  // namespace

RunResult run_setting(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  FoldAssignment folds = kfold_split(data, config.k_folds, derive_seed(config.seed, "folds", 0));

  FeatureEncoder enc_model;
  enc_model.fit(data, EncodeOptions{.include_age = true});
  FeatureEncoder enc_cov;
  enc_cov.fit(data, EncodeOptions{.include_age = false});

  RunResult result;
  result.config = config;
  result.folds.resize(static_cast<size_t>(config.k_folds));

  auto fold_task = [&](int f, bool single_thread) {
    try {
      return run_fold(config, data, folds, enc_model, enc_cov, f, single_thread);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
  };

  if (config.parallel_folds && config.k_folds > 1) {
    std::vector<std::future<FoldOutcome>> futures;
    futures.reserve(static_cast<size_t>(config.k_folds));
    for (int f = 0; f < config.k_folds; ++f)
      futures.push_back(std::async(std::launch::async, fold_task, f, true));
    for (int f = 0; f < config.k_folds; ++f) result.folds[static_cast<size_t>(f)] = futures[static_cast<size_t>(f)].get();
  } else {
    for (int f = 0; f < config.k_folds; ++f) result.folds[static_cast<size_t>(f)] = fold_task(f, false);
  }

  result.aggregate = aggregate_reports(result.folds, ReportView::Primary);
  if (std::all_of(result.folds.begin(), result.folds.end(),
                  [](const FoldOutcome& f) { return f.observed.has_value(); }))
    result.observed_aggregate = aggregate_reports(result.folds, ReportView::Observed);
  if (std::all_of(result.folds.begin(), result.folds.end(),
                  [](const FoldOutcome& f) { return f.latent.has_value(); }))
    result.latent_aggregate = aggregate_reports(result.folds, ReportView::Latent);

  result.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

RunResult run_setting(const ExperimentConfig& config) {
  Dataset data = resolve_data(config);
  return run_setting(config, data);
}

std::vector<RunResult> run_seeds(const ExperimentConfig& config, std::span<const uint64_t> seeds,
                                 const Dataset& data) {
  std::vector<RunResult> out;
  out.reserve(seeds.size());
  for (uint64_t s : seeds) {
    ExperimentConfig c = config;
    c.seed = s;
    out.push_back(run_setting(c, data));
  }
  return out;
}

Rq3Result run_rq3(const ExperimentConfig& base, double target_gap,
                  std::span<const Setting> settings, const Dataset& data) {
  Rq3Result result;
  Dataset doubled =
      double_discrimination(data, target_gap, derive_seed(base.seed, "rq3-double", 0));

  auto run_all = [&](const Dataset& d) {
    std::vector<RunResult> runs;
    for (Setting s : settings) {
      ExperimentConfig c = base;
      c.setting = s;
      runs.push_back(run_setting(c, d));
    }
    return runs;
  };
  result.original = run_all(data);
  result.doubled = run_all(doubled);

  auto discrepancy = [&](const std::vector<RunResult>& runs) {
    const RunResult* ebr = nullptr;
    const RunResult* ebr_ite = nullptr;
    for (const auto& r : runs) {
      if (r.config.setting == Setting::EBR) ebr = &r;
      if (r.config.setting == Setting::EbrTrainIteTest) ebr_ite = &r;
    }
    return ebr && ebr_ite ? std::abs(ebr_ite->aggregate.fprd_mean - ebr->aggregate.fprd_mean) : 0.0;
  };
  result.discrepancy_original = discrepancy(result.original);
  result.discrepancy_doubled = discrepancy(result.doubled);
  return result;
}

std::vector<Rq4Level> run_rq4(const ExperimentConfig& base, std::span<const double> levels,
                              std::span<const Setting> settings, const Dataset& data) {
  // base marginal; targets sit symmetrically around it
  size_t spanish = 0;
  for (const auto& r : data.records) spanish += r.spanish;
  const double p_base = static_cast<double>(spanish) / static_cast<double>(data.size());

  std::vector<Rq4Level> out;
  for (size_t i = 0; i < levels.size(); ++i) {
    Rq4Level level;
    level.disparity = levels[i];
    BiasTarget target;
    target.p_spanish_young = p_base + levels[i] / 2.0;
    target.p_spanish_old = p_base - levels[i] / 2.0;

    Dataset biased;
    try {
      if (target.p_spanish_young > 1.0 || target.p_spanish_old < 0.0)
        raise(Errc::InfeasibleTarget, "targets leave [0,1] at disparity " + std::to_string(levels[i]));
      // disparity zero leaves the sample untouched rather than resampling both
      // groups onto the pooled marginal
      biased = levels[i] == 0.0
                   ? data
                   : inject_selection_bias(data, target, derive_seed(base.seed, "rq4-inject", i));
    } catch (const Error& e) {
      if (e.code() != Errc::InfeasibleTarget) throw;
      level.skipped = true;
      level.note = e.what();
      out.push_back(std::move(level));
      continue;
    }

    for (Setting s : settings) {
      ExperimentConfig c = base;
      c.setting = s;
      RunResult r = run_setting(c, biased);
      r.x_label = "spanish_disparity";
      r.x_value = levels[i];
      level.runs.push_back(std::move(r));
    }
    out.push_back(std::move(level));
  }
  return out;
}

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["setting"] = to_string(c.setting);
  j["model"] = to_string(c.model);
  j["k_folds"] = c.k_folds;
  j["budget_rate"] = c.budget_rate;
  j["seed"] = c.seed;
  if (c.data.synth)
    j["data"] = {{"synth", json::parse(synth_config_to_json(*c.data.synth))}};
  else
    j["data"] = {{"csv_path", c.data.csv_path}};
  j["forest"] = {{"n_estimators", c.forest.n_estimators},
                 {"min_samples_split", c.forest.min_samples_split},
                 {"min_samples_leaf", c.forest.min_samples_leaf},
                 {"feature_subset", c.forest.feature_subset}};
  j["mlp"] = {{"hidden", c.mlp.hidden},
              {"learning_rate", c.mlp.learning_rate},
              {"beta1", c.mlp.beta1},
              {"beta2", c.mlp.beta2},
              {"epsilon", c.mlp.epsilon},
              {"batch_size", c.mlp.batch_size},
              {"epochs", c.mlp.epochs}};
  return j;
}

void fold_row(std::ostream& os, const RunResult& run, const FoldOutcome& f, const EvalReport& r) {
  os << to_string(run.config.setting) << ',' << to_string(run.config.model) << ','
     << run.config.seed << ',' << run.x_label << ','
     << fmt(run.x_value ? *run.x_value : run.aggregate.auc_mean) << ',' << f.fold << ','
     << to_string(r.label_source) << ',' << fmt(r.auc) << ',' << fmt(r.fpr_young) << ','
     << fmt(r.fpr_old) << ',' << fmt(r.fprd) << ',' << r.confusion.young.tp << ','
     << r.confusion.young.fp << ',' << r.confusion.young.tn << ',' << r.confusion.young.fn << ','
     << r.confusion.older.tp << ',' << r.confusion.older.fp << ',' << r.confusion.older.tn << ','
     << r.confusion.older.fn << ',' << fmt(r.budget_rate) << "\n";
}

struct SummaryKey {
  std::string setting, model, x_label;
  double x_value;
  bool operator<(const SummaryKey& o) const {
    return std::tie(setting, model, x_label, x_value) <
           std::tie(o.setting, o.model, o.x_label, o.x_value);
  }
};

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::vector<std::string> emit_reports(std::span<const RunResult> runs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) raise(Errc::IoError, "cannot create directory '" + out_dir + "': " + ec.message());

  const std::string config_path = out_dir + "/config.json";
  const std::string folds_path = out_dir + "/folds.csv";
  const std::string aggregate_path = out_dir + "/aggregate.json";
  const std::string plot_path = out_dir + "/plot_data.csv";

  auto open = [](const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) raise(Errc::IoError, "cannot open '" + path + "' for writing");
    return f;
  };

  {
    json j;
    j["schema_version"] = "auditfair-report-1";
    j["runs"] = json::array();
    for (const auto& r : runs) j["runs"].push_back(config_json(r.config));
    auto f = open(config_path);
    f << j.dump(2) << "\n";
  }

  {
    auto f = open(folds_path);
    f << "setting,model,seed,x_label,x_value,fold,label_source,auc,fpr_young,fpr_old,fprd,"
         "tp_young,fp_young,tn_young,fn_young,tp_old,fp_old,tn_old,fn_old,budget_rate\n";
    for (const auto& run : runs) {
      for (const auto& fold : run.folds) {
        fold_row(f, run, fold, fold.primary);
        if (fold.observed) fold_row(f, run, fold, *fold.observed);
        if (fold.latent) fold_row(f, run, fold, *fold.latent);
      }
    }
  }

  {
    json j;
    j["schema_version"] = "auditfair-report-1";
    j["runs"] = json::array();
    for (const auto& run : runs) {
      json r;
      r["setting"] = to_string(run.config.setting);
      r["model"] = to_string(run.config.model);
      r["seed"] = run.config.seed;
      r["x_label"] = run.x_label;
      r["x_value"] = run.x_value ? *run.x_value : run.aggregate.auc_mean;
      r["n_folds"] = run.folds.size();
      r["fprd_mean"] = run.aggregate.fprd_mean;
      r["fprd_std"] = run.aggregate.fprd_std;
      r["auc_mean"] = run.aggregate.auc_mean;
      r["auc_std"] = run.aggregate.auc_std;
      if (run.observed_aggregate) {
        r["observed_fprd_mean"] = run.observed_aggregate->fprd_mean;
        r["observed_fprd_std"] = run.observed_aggregate->fprd_std;
        r["observed_auc_mean"] = run.observed_aggregate->auc_mean;
        r["observed_auc_std"] = run.observed_aggregate->auc_std;
      }
      if (run.latent_aggregate) {
        r["latent_fprd_mean"] = run.latent_aggregate->fprd_mean;
        r["latent_fprd_std"] = run.latent_aggregate->fprd_std;
        r["latent_auc_mean"] = run.latent_aggregate->auc_mean;
        r["latent_auc_std"] = run.latent_aggregate->auc_std;
      }
      size_t train_flips = 0, test_flips = 0;
      for (const auto& fold : run.folds) {
        if (fold.train_repair) train_flips += fold.train_repair->flips.size();
        if (fold.test_repair) test_flips += fold.test_repair->flips.size();
      }
      r["train_repair_flips"] = train_flips;
      r["test_repair_flips"] = test_flips;
      j["runs"].push_back(std::move(r));
    }

    // across-seed dispersion per (setting, model, x_label, x_value)
    std::map<SummaryKey, std::vector<const RunResult*>> groups;
    for (const auto& run : runs) {
      SummaryKey key{to_string(run.config.setting), to_string(run.config.model), run.x_label,
                     run.x_value ? *run.x_value : 0.0};
      groups[key].push_back(&run);
    }
    j["summary"] = json::array();
    for (const auto& [key, members] : groups) {
      auto mean_of = [&](auto get) {
        double s = 0;
        for (const RunResult* r : members) s += get(*r);
        return s / static_cast<double>(members.size());
      };
      auto std_of = [&](auto get, double m) {
        if (members.size() < 2) return 0.0;
        double s = 0;
        for (const RunResult* r : members) s += (get(*r) - m) * (get(*r) - m);
        return std::sqrt(s / static_cast<double>(members.size() - 1));
      };
      auto fprd = [](const RunResult& r) { return r.aggregate.fprd_mean; };
      auto auc = [](const RunResult& r) { return r.aggregate.auc_mean; };
      json s;
      s["setting"] = key.setting;
      s["model"] = key.model;
      s["x_label"] = key.x_label;
      s["x_value"] = key.x_value;
      s["n_seeds"] = members.size();
      const double fm = mean_of(fprd), am = mean_of(auc);
      s["fprd_mean"] = fm;
      s["fprd_std_across_seeds"] = std_of(fprd, fm);
      s["auc_mean"] = am;
      s["auc_std_across_seeds"] = std_of(auc, am);
      j["summary"].push_back(std::move(s));
    }
    auto f = open(aggregate_path);
    f << j.dump(2) << "\n";
  }

  {
    auto f = open(plot_path);
    f << "setting,model,x_label,x_value,fprd_mean,fprd_std,auc_mean,auc_std,n_folds,seed\n";
    for (const auto& run : runs) {
      f << to_string(run.config.setting) << ',' << to_string(run.config.model) << ','
        << run.x_label << ',' << fmt(run.x_value ? *run.x_value : run.aggregate.auc_mean) << ','
        << fmt(run.aggregate.fprd_mean) << ',' << fmt(run.aggregate.fprd_std) << ','
        << fmt(run.aggregate.auc_mean) << ',' << fmt(run.aggregate.auc_std) << ','
        << run.folds.size() << ',' << run.config.seed << "\n";
    }
  }

  return {config_path, folds_path, aggregate_path, plot_path};
}

}  // namespace auditfair
