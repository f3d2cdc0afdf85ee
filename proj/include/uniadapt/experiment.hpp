#ifndef UNIADAPT_EXPERIMENT_HPP
#define UNIADAPT_EXPERIMENT_HPP

#include <string>

#include "uniadapt/config.hpp"
#include "uniadapt/gradcheck.hpp"
#include "uniadapt/trainer.hpp"

namespace uniadapt::experiment {

// Command implementations behind the CLI subcommands. Every command creates
// the output directory, echoes the fully resolved config next to its
// artifacts (effective_config.ini, which reproduces the run when fed back),
// and honors cfg.train.quiet for progress/summary chatter. Errors surface as
// ValidationError / NumericError; the CLI maps them to exit codes 1 / 2.

// Writes source.csv and target.csv plus a split summary on stdout.
void cmd_generate(const config::ExperimentConfig& cfg);

// Trains once; writes checkpoint.txt, loss_log.csv, metrics.csv,
// metrics.json (one record per epoch).
void cmd_train(const config::ExperimentConfig& cfg);

// Scores an existing checkpoint (cfg.checkpoint, default
// <out_dir>/checkpoint.txt) on the configured target domain; writes
// predictions.csv and a one-record metrics pair.
void cmd_evaluate(const config::ExperimentConfig& cfg);

// Five training legs toggling the target-side losses: all, wo_esl, wo_sfc,
// wo_tova, wo_esl_sfc_tova. Each leg owns <out_dir>/<label>/; the final-epoch
// numbers land in ablation.csv.
void cmd_ablate(const config::ExperimentConfig& cfg);

// Regenerates the synthetic scenario for each target-private count in
// [sweep], trains, and tabulates the final scores in sweep.csv. Each point
// owns <out_dir>/tp_<n>/.
void cmd_sweep_unknowns(const config::ExperimentConfig& cfg);

// Finite-difference verification of every loss gradient; prints the report
// and returns whether all terms passed.
bool cmd_gradcheck(const gradcheck::CheckOptions& options, bool quiet);

// Shared train-and-persist step used by train/ablate/sweep. Returns the
// trained model plus histories after writing the per-run artifacts.
train::TrainResult run_training(const config::ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace uniadapt::experiment

#endif
