// Experiment CLI: generates audit-style datasets, runs the four
// training/evaluation settings with k-fold CV, and emits report files
// (config echo, per-fold CSV, aggregate JSON, plot data).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "auditfair/harness.hpp"

using namespace auditfair;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string data_csv;
  std::string synth_config_path;
  bool audit_replica = false;
  std::string settings = "all";
  std::string models = "forest";
  int folds = 5;
  double budget = 0.16;
  std::vector<uint64_t> seeds = {1};
  std::string out_dir = "out";
  std::string config_path;
  double target_gap = 0.10;
  std::vector<double> levels = {0.0, 0.2, 0.4, 0.6, 0.8};
};

std::vector<Setting> parse_settings_list(const std::string& arg) {
  if (arg == "all")
    return {Setting::BR, Setting::EBR, Setting::IteTrainAndTest, Setting::EbrTrainIteTest};
  std::vector<Setting> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_setting(item));
  if (out.empty()) raise(Errc::InvalidConfig, "no settings given");
  return out;
}

std::vector<ModelKind> parse_models_list(const std::string& arg) {
  if (arg == "both") return {ModelKind::Forest, ModelKind::Mlp};
  std::vector<ModelKind> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_model(item));
  if (out.empty()) raise(Errc::InvalidConfig, "no models given");
  return out;
}

ExperimentConfig base_config(const CliOptions& opt) {
  ExperimentConfig c;
  c.k_folds = opt.folds;
  c.budget_rate = opt.budget;
  c.seed = opt.seeds.front();
  if (!opt.data_csv.empty()) {
    c.data.csv_path = opt.data_csv;
  } else if (!opt.synth_config_path.empty()) {
    c.data.synth = load_synth_config(opt.synth_config_path);
  } else {
    c.data.synth = SynthConfig::audit_table_replica(opt.seeds.front());  // default benchmark
  }
  return c;
}

// The run config file overrides command-line flags (documented behavior).
void apply_config_file(ExperimentConfig& c, CliOptions& opt, const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    raise(Errc::InvalidConfig, std::string("run config is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("settings")) opt.settings = j.at("settings").get<std::string>();
    if (j.contains("models")) opt.models = j.at("models").get<std::string>();
    if (j.contains("k_folds")) c.k_folds = opt.folds = j.at("k_folds").get<int>();
    if (j.contains("budget_rate")) c.budget_rate = opt.budget = j.at("budget_rate").get<double>();
    if (j.contains("seeds")) opt.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (j.contains("target_gap")) opt.target_gap = j.at("target_gap").get<double>();
    if (j.contains("levels")) opt.levels = j.at("levels").get<std::vector<double>>();
    if (j.contains("data")) {
      const json& d = j.at("data");
      if (d.contains("csv_path")) {
        c.data.csv_path = d.at("csv_path").get<std::string>();
        c.data.synth.reset();
      } else if (d.contains("synth")) {
        c.data.synth = parse_synth_config(d.at("synth").dump());
        c.data.csv_path.clear();
      }
    }
    if (j.contains("forest")) {
      const json& f = j.at("forest");
      if (f.contains("n_estimators")) c.forest.n_estimators = f.at("n_estimators").get<int>();
      if (f.contains("min_samples_split"))
        c.forest.min_samples_split = f.at("min_samples_split").get<int>();
      if (f.contains("min_samples_leaf"))
        c.forest.min_samples_leaf = f.at("min_samples_leaf").get<int>();
      if (f.contains("feature_subset")) c.forest.feature_subset = f.at("feature_subset").get<int>();
    }
    if (j.contains("mlp")) {
      const json& m = j.at("mlp");
      if (m.contains("hidden")) c.mlp.hidden = m.at("hidden").get<std::vector<int>>();
      if (m.contains("learning_rate")) c.mlp.learning_rate = m.at("learning_rate").get<double>();
      if (m.contains("batch_size")) c.mlp.batch_size = m.at("batch_size").get<int>();
      if (m.contains("epochs")) c.mlp.epochs = m.at("epochs").get<int>();
    }
  } catch (const json::exception& e) {
    raise(Errc::InvalidConfig, std::string("bad run config value: ") + e.what());
  }
}

void print_summary_line(const RunResult& r) {
  std::printf("  %-20s %-7s seed=%-4llu fprd=% .4f (sd %.4f)  auc=%.4f (sd %.4f)",
              to_string(r.config.setting), to_string(r.config.model),
              static_cast<unsigned long long>(r.config.seed), r.aggregate.fprd_mean,
              r.aggregate.fprd_std, r.aggregate.auc_mean, r.aggregate.auc_std);
  if (r.latent_aggregate) std::printf("  [latent fprd=% .4f]", r.latent_aggregate->fprd_mean);
  std::printf("\n");
  std::fflush(stdout);
}

// synthetic sources are regenerated per seed so across-seed dispersion
// includes data variance; a CSV source is fixed by nature
Dataset data_for_seed(const ExperimentConfig& base, uint64_t seed) {
  if (!base.data.synth) return load_csv(base.data.csv_path);
  SynthConfig synth = *base.data.synth;
  synth.seed = seed;
  return generate_synthetic(synth);
}

std::vector<RunResult> run_battery(const ExperimentConfig& base, const CliOptions& opt,
                                   const std::vector<Setting>& settings,
                                   const std::vector<ModelKind>& models) {
  std::vector<RunResult> all;
  for (uint64_t seed : opt.seeds) {
    Dataset data = data_for_seed(base, seed);
    for (ModelKind m : models) {
      for (Setting s : settings) {
        ExperimentConfig c = base;
        c.model = m;
        c.setting = s;
        c.seed = seed;
        RunResult r = run_setting(c, data);
        print_summary_line(r);
        all.push_back(std::move(r));
      }
    }
  }
  return all;
}

void emit_and_report(const std::vector<RunResult>& runs, const std::string& dir) {
  auto manifest = emit_reports(runs, dir);
  std::printf("wrote:\n");
  for (const auto& p : manifest) std::printf("  %s\n", p.c_str());
}

int cmd_generate(const SynthConfig& synth, const std::string& out_csv, bool print_config) {
  if (print_config) {
    std::printf("%s\n", synth_config_to_json(synth).c_str());
    return 0;
  }
  Dataset data = generate_synthetic(synth);
  write_csv(data, out_csv);
  GroupCounts gc = group_counts(data);
  size_t planted = 0;
  for (const auto& r : data.records)
    planted += r.latent_callback && *r.latent_callback != r.callback;
  std::printf("wrote %zu records to %s\n", data.size(), out_csv.c_str());
  std::printf("  young %zu (callbacks %zu, rate %.4f)\n", gc.young, gc.young_callbacks,
              gc.young_rate());
  std::printf("  older %zu (callbacks %zu, rate %.4f)\n", gc.older, gc.older_callbacks,
              gc.older_rate());
  std::printf("  observed gap %.4f, planted biased labels %zu\n", gc.gap(), planted);
  return 0;
}

int cmd_report(const std::string& dir) {
  std::ifstream in(dir + "/aggregate.json");
  if (!in) raise(Errc::IoError, "no aggregate.json under '" + dir + "'");
  json j = json::parse(in);
  std::printf("%-20s %-7s %-6s %-22s %9s %9s %9s %9s\n", "setting", "model", "seed", "x", "fprd",
              "fprd_sd", "auc", "auc_sd");
  for (const auto& r : j.at("runs")) {
    char x[64];
    std::snprintf(x, sizeof(x), "%s=%.4f", r.at("x_label").get<std::string>().c_str(),
                  r.at("x_value").get<double>());
    std::printf("%-20s %-7s %-6llu %-22s % 9.4f %9.4f %9.4f %9.4f\n",
                r.at("setting").get<std::string>().c_str(),
                r.at("model").get<std::string>().c_str(),
                static_cast<unsigned long long>(r.at("seed").get<uint64_t>()), x,
                r.at("fprd_mean").get<double>(), r.at("fprd_std").get<double>(),
                r.at("auc_mean").get<double>(), r.at("auc_std").get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"auditfair: label-bias repair experiments on audit-style hiring data"};
  app.require_subcommand(1);

  CliOptions opt;

  auto add_data_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", opt.data_csv, "input dataset CSV");
    cmd->add_option("--synth-config", opt.synth_config_path, "synthetic generator config (JSON)");
    cmd->add_flag("--audit-replica", opt.audit_replica,
                  "use the built-in audit-table benchmark (default when no --data)");
  };
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--settings", opt.settings,
                    "comma list of br,ebr,ite_train_test,ebr_train_ite_test, or 'all'");
    cmd->add_option("--models", opt.models, "comma list of forest,mlp, or 'both'");
    cmd->add_option("--folds", opt.folds, "cross-validation folds");
    cmd->add_option("--budget", opt.budget, "callback budget rate");
    cmd->add_option("--seeds", opt.seeds, "seed list")->delimiter(',');
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--config", opt.config_path, "run config JSON; overrides flags");
  };

  auto* gen = app.add_subcommand("generate", "generate a synthetic audit dataset CSV");
  std::string gen_out = "data.csv";
  bool gen_audit = false, gen_print = false;
  size_t gen_n = 40000;
  uint64_t gen_seed = 1;
  double gen_delta = 0.05, gen_base = 0.16, gen_pyoung = 0.3437;
  std::string gen_config;
  gen->add_option("--out", gen_out, "output CSV path");
  gen->add_option("--config", gen_config, "generator config JSON");
  gen->add_flag("--audit-replica", gen_audit, "exact audit-table geometry");
  gen->add_option("--n", gen_n, "record count");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--delta", gen_delta, "planted discrimination gap");
  gen->add_option("--base-rate", gen_base, "latent callback rate");
  gen->add_option("--p-young", gen_pyoung, "young share");
  gen->add_flag("--print-config", gen_print, "print the effective config and exit");

  auto* run = app.add_subcommand("run", "run settings x models x seeds and emit reports");
  add_data_flags(run);
  add_run_flags(run);

  auto* rq1 = app.add_subcommand("rq1", "label bias in the TEST data: all four settings");
  add_data_flags(rq1);
  add_run_flags(rq1);

  auto* rq2 = app.add_subcommand("rq2", "label bias in the TRAINING data: disparity reduction");
  add_data_flags(rq2);
  add_run_flags(rq2);

  auto* rq3 = app.add_subcommand("rq3", "discrimination magnitude: doubled-gap comparison");
  add_data_flags(rq3);
  add_run_flags(rq3);
  rq3->add_option("--target-gap", opt.target_gap, "gap after deletion (default 0.10)");

  auto* rq4 = app.add_subcommand("rq4", "selection bias sweep over Spanish-age disparity");
  add_data_flags(rq4);
  add_run_flags(rq4);
  rq4->add_option("--levels", opt.levels, "disparity levels")->delimiter(',');

  auto* rep = app.add_subcommand("report", "print the summary table of a report directory");
  std::string report_dir = "out";
  rep->add_option("--dir", report_dir, "report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      SynthConfig synth;
      if (!gen_config.empty()) {
        synth = load_synth_config(gen_config);
      } else if (gen_audit) {
        synth = SynthConfig::audit_table_replica(gen_seed);
      } else {
        synth.n_records = gen_n;
        synth.seed = gen_seed;
        synth.discrimination_delta = gen_delta;
        synth.base_callback_rate = gen_base;
        synth.p_young = gen_pyoung;
        synth.qualification_weights = SynthConfig::default_qualification_weights();
      }
      return cmd_generate(synth, gen_out, gen_print);
    }
    if (rep->parsed()) return cmd_report(report_dir);

    ExperimentConfig base = base_config(opt);
    if (!opt.config_path.empty()) apply_config_file(base, opt, opt.config_path);
    std::vector<ModelKind> models = parse_models_list(opt.models);

    if (run->parsed() || rq1->parsed() || rq2->parsed()) {
      std::vector<Setting> settings = parse_settings_list(
          (rq1->parsed() || rq2->parsed()) ? std::string("all") : opt.settings);
      std::vector<RunResult> all = run_battery(base, opt, settings, models);
      if (rq2->parsed()) {
        for (ModelKind m : models) {
          double ite = 0, ebr_ite = 0, br_auc = 0, ite_auc = 0;
          int n_ite = 0, n_ebr_ite = 0, n_br = 0;
          for (const auto& r : all) {
            if (r.config.model != m) continue;
            if (r.config.setting == Setting::IteTrainAndTest) {
              ite += r.aggregate.fprd_mean;
              ite_auc += r.aggregate.auc_mean;
              ++n_ite;
            } else if (r.config.setting == Setting::EbrTrainIteTest) {
              ebr_ite += r.aggregate.fprd_mean;
              ++n_ebr_ite;
            } else if (r.config.setting == Setting::BR) {
              br_auc += r.aggregate.auc_mean;
              ++n_br;
            }
          }
          if (n_ite && n_ebr_ite && n_br) {
            ite /= n_ite;
            ebr_ite /= n_ebr_ite;
            std::printf(
                "%s: ITE Train&Test fprd % .4f vs EBR Train-ITE Test % .4f (reduction %.0f%%), "
                "auc drop vs BR %.4f\n",
                to_string(m), ite, ebr_ite,
                ebr_ite != 0 ? 100.0 * (1.0 - std::abs(ite) / std::abs(ebr_ite)) : 0.0,
                br_auc / n_br - ite_auc / n_ite);
          }
        }
      }
      emit_and_report(all, opt.out_dir);
      return 0;
    }

    if (rq3->parsed()) {
      std::vector<Setting> settings = parse_settings_list(opt.settings);
      std::vector<RunResult> orig_all, doubled_all;
      for (ModelKind m : models) {
        ExperimentConfig c = base;
        c.model = m;
        for (uint64_t s : opt.seeds) {
          c.seed = s;
          Dataset data = data_for_seed(base, s);
          Rq3Result r = run_rq3(c, opt.target_gap, settings, data);
          for (auto& x : r.original) {
            print_summary_line(x);
            orig_all.push_back(std::move(x));
          }
          for (auto& x : r.doubled) {
            print_summary_line(x);
            doubled_all.push_back(std::move(x));
          }
          std::printf("  seed %llu: EBR vs EBR-ITE discrepancy %.4f original -> %.4f doubled\n",
                      static_cast<unsigned long long>(s), r.discrepancy_original,
                      r.discrepancy_doubled);
        }
      }
      emit_and_report(orig_all, opt.out_dir + "/original");
      emit_and_report(doubled_all, opt.out_dir + "/doubled");
      return 0;
    }

    if (rq4->parsed()) {
      std::vector<Setting> settings = parse_settings_list(opt.settings);
      std::vector<RunResult> all;
      for (ModelKind m : models) {
        ExperimentConfig c = base;
        c.model = m;
        for (uint64_t s : opt.seeds) {
          c.seed = s;
          Dataset data = data_for_seed(base, s);
          std::vector<Rq4Level> levels = run_rq4(c, opt.levels, settings, data);
          for (auto& level : levels) {
            if (level.skipped) {
              std::fprintf(stderr, "warning: disparity %.2f skipped: %s\n", level.disparity,
                           level.note.c_str());
              continue;
            }
            for (auto& r : level.runs) {
              print_summary_line(r);
              all.push_back(std::move(r));
            }
          }
        }
      }
      emit_and_report(all, opt.out_dir);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
