#include "uniadapt/experiment.hpp"

#include <cstdio>
#include <filesystem>

#include "uniadapt/classifier.hpp"
#include "uniadapt/common.hpp"
#include "uniadapt/losses.hpp"
#include "uniadapt/metrics.hpp"
#include "uniadapt/nn.hpp"

namespace uniadapt::experiment {

namespace {

namespace fs = std::filesystem;

std::string prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void echo_config(const config::ExperimentConfig& cfg, const std::string& dir) {
  config::write_file(cfg, join_path(dir, "effective_config.ini"));
}

void write_loss_log(const std::vector<losses::LossReport>& log, const std::string& path) {
  losses::LossLogWriter writer(path);
  for (std::size_t i = 0; i < log.size(); ++i) writer.append(i, log[i]);
}

struct AblationLeg {
  const char* label;
  bool disable_esl;
  bool disable_sfc;
  bool disable_tova;
};

constexpr AblationLeg kAblationLegs[] = {
    {"all", false, false, false},           {"wo_esl", true, false, false},
    {"wo_sfc", false, true, false},         {"wo_tova", false, false, true},
    {"wo_esl_sfc_tova", true, true, true},
};

}  // namespace

train::TrainResult run_training(const config::ExperimentConfig& cfg, const std::string& out_dir) {
  prepare_dir(out_dir);
  auto [source, target] = config::load_datasets(cfg);
  train::TrainResult result = train::train(source, target, cfg.model, cfg.train);
  nn::save_checkpoint(result.extractor, result.head, join_path(out_dir, "checkpoint.txt"));
  write_loss_log(result.loss_log, join_path(out_dir, "loss_log.csv"));
  metrics::write_metrics_csv(result.history, join_path(out_dir, "metrics.csv"));
  metrics::write_metrics_json(result.history, join_path(out_dir, "metrics.json"));
  return result;
}

void cmd_generate(const config::ExperimentConfig& cfg) {
  if (!cfg.data.synthetic)
    throw ValidationError("generate needs a synthesis-mode [data] section");
  prepare_dir(cfg.out_dir);
  auto [source, target] = config::load_datasets(cfg);
  data::write_dataset(source, join_path(cfg.out_dir, "source.csv"));
  data::write_dataset(target, join_path(cfg.out_dir, "target.csv"));
  echo_config(cfg, cfg.out_dir);
  if (!cfg.train.quiet) {
    std::printf("shared %zu  source-private %zu  target-private %zu\n", cfg.data.split.n_shared,
                cfg.data.split.n_source_private, cfg.data.split.n_target_private);
    std::printf("source: %zu samples, %zu classes -> %s\n", source.size(),
                cfg.data.split.num_source_classes(), join_path(cfg.out_dir, "source.csv").c_str());
    std::printf("target: %zu samples, %zu classes -> %s\n", target.size(),
                cfg.data.split.n_shared + cfg.data.split.n_target_private,
                join_path(cfg.out_dir, "target.csv").c_str());
  }
}

void cmd_train(const config::ExperimentConfig& cfg) {
  prepare_dir(cfg.out_dir);
  echo_config(cfg, cfg.out_dir);
  const train::TrainResult result = run_training(cfg, cfg.out_dir);
  if (!cfg.train.quiet && !result.history.empty()) {
    const metrics::MetricsReport& last = result.history.back();
    std::printf("final: hos %.1f  acc_kn %.1f  acc_unk %.1f  acc %.1f  auc %.3f\n", last.hos,
                last.acc_kn, last.acc_unk, last.acc, last.auc);
  }
}

void cmd_evaluate(const config::ExperimentConfig& cfg) {
  prepare_dir(cfg.out_dir);
  echo_config(cfg, cfg.out_dir);
  const std::string checkpoint_path =
      cfg.checkpoint.empty() ? join_path(cfg.out_dir, "checkpoint.txt") : cfg.checkpoint;
  nn::FeatureExtractorParams extractor;
  nn::ClassifierHeadParams head;
  nn::load_checkpoint(checkpoint_path, extractor, head);

  auto [source, target] = config::load_datasets(cfg);
  if (extractor.input_dim() != target.dim())
    throw ValidationError("checkpoint input dimension does not match the datasets");

  const std::vector<classifier::Decision> decisions =
      train::decide_dataset(extractor, head, target.features);
  classifier::write_predictions(decisions, join_path(cfg.out_dir, "predictions.csv"));
  const std::vector<int> shared = train::shared_label_set(source.labels, target.labels);
  const metrics::MetricsReport report =
      metrics::evaluate(decisions, target.labels, shared, static_cast<int>(head.num_classes()));
  metrics::write_metrics_csv({report}, join_path(cfg.out_dir, "metrics.csv"));
  metrics::write_metrics_json({report}, join_path(cfg.out_dir, "metrics.json"));
  if (!cfg.train.quiet)
    std::printf("hos %.1f  acc_kn %.1f  acc_unk %.1f  acc %.1f  auc %.3f\n", report.hos,
                report.acc_kn, report.acc_unk, report.acc, report.auc);
}

void cmd_ablate(const config::ExperimentConfig& cfg) {
  prepare_dir(cfg.out_dir);
  echo_config(cfg, cfg.out_dir);
  std::FILE* table = std::fopen(join_path(cfg.out_dir, "ablation.csv").c_str(), "w");
  if (!table) throw ValidationError("cannot open ablation.csv for writing");
  std::fprintf(table, "label,hos,acc_kn,acc_unk\n");
  for (const AblationLeg& leg : kAblationLegs) {
    config::ExperimentConfig leg_cfg = cfg;
    leg_cfg.train.disable_esl = leg.disable_esl;
    leg_cfg.train.disable_sfc = leg.disable_sfc;
    leg_cfg.train.disable_tova = leg.disable_tova;
    leg_cfg.out_dir = join_path(cfg.out_dir, leg.label);
    echo_config(leg_cfg, prepare_dir(leg_cfg.out_dir));
    const train::TrainResult result = run_training(leg_cfg, leg_cfg.out_dir);
    const metrics::MetricsReport& last = result.history.back();
    std::fprintf(table, "%s,%.1f,%.1f,%.1f\n", leg.label, last.hos, last.acc_kn, last.acc_unk);
    if (!cfg.train.quiet)
      std::printf("%-16s hos %.1f  acc_kn %.1f  acc_unk %.1f\n", leg.label, last.hos,
                  last.acc_kn, last.acc_unk);
  }
  std::fclose(table);
}

void cmd_sweep_unknowns(const config::ExperimentConfig& cfg) {
  if (!cfg.data.synthetic)
    throw ValidationError("sweep-unknowns regenerates data and needs a synthesis-mode config");
  if (cfg.sweep_target_private.empty())
    throw ValidationError("sweep-unknowns needs [sweep] target_private");
  prepare_dir(cfg.out_dir);
  echo_config(cfg, cfg.out_dir);
  std::FILE* table = std::fopen(join_path(cfg.out_dir, "sweep.csv").c_str(), "w");
  if (!table) throw ValidationError("cannot open sweep.csv for writing");
  std::fprintf(table, "n_shared,n_source_private,n_target_private,hos,acc_kn,acc_unk\n");
  for (std::size_t count : cfg.sweep_target_private) {
    config::ExperimentConfig point_cfg = cfg;
    point_cfg.data.split.n_target_private = count;
    point_cfg.sweep_target_private.clear();
    point_cfg.out_dir = join_path(cfg.out_dir, "tp_" + std::to_string(count));
    echo_config(point_cfg, prepare_dir(point_cfg.out_dir));
    const train::TrainResult result = run_training(point_cfg, point_cfg.out_dir);
    const metrics::MetricsReport& last = result.history.back();
    std::fprintf(table, "%zu,%zu,%zu,%.1f,%.1f,%.1f\n", point_cfg.data.split.n_shared,
                 point_cfg.data.split.n_source_private, count, last.hos, last.acc_kn,
                 last.acc_unk);
    if (!cfg.train.quiet)
      std::printf("target-private %-3zu hos %.1f  acc_kn %.1f  acc_unk %.1f\n", count, last.hos,
                  last.acc_kn, last.acc_unk);
  }
  std::fclose(table);
}

bool cmd_gradcheck(const gradcheck::CheckOptions& options, bool quiet) {
  const gradcheck::CheckReport report = gradcheck::run(options);
  if (quiet) {
    std::printf("gradcheck: %s\n", report.all_passed() ? "PASS" : "FAIL");
  } else {
    gradcheck::print_report(report, options, stdout);
  }
  return report.all_passed();
}

}  // namespace uniadapt::experiment
