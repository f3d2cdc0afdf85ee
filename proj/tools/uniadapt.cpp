// Command-line front end: generate | train | evaluate | ablate |
// sweep-unknowns | gradcheck. Exit codes: 0 success, 1 bad input or config,
// 2 runtime/numerical failure.
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "uniadapt/common.hpp"
#include "uniadapt/config.hpp"
#include "uniadapt/experiment.hpp"
#include "uniadapt/gradcheck.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--seed", args.seed, "override the [run] seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out_dir, "override the [run] output directory");
  cmd->add_flag("--quiet", args.quiet, "suppress progress and summaries");
}

uniadapt::config::ExperimentConfig resolve(const CommonArgs& args) {
  uniadapt::config::ExperimentConfig cfg = uniadapt::config::parse_file(args.config_path);
  if (args.seed_set) cfg.train.seed = args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  cfg.train.quiet = args.quiet;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"universal domain adaptation with a composite multi-class + one-vs-all classifier"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* generate = app.add_subcommand("generate", "synthesize a two-domain dataset pair");
  CLI::App* train = app.add_subcommand("train", "run the full training loop");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the target domain");
  CLI::App* ablate = app.add_subcommand("ablate", "train the five loss-ablation legs");
  CLI::App* sweep =
      app.add_subcommand("sweep-unknowns", "train across target-private class counts");
  for (CLI::App* cmd : {generate, train, evaluate, ablate, sweep}) add_common(cmd, args);

  uniadapt::gradcheck::CheckOptions check;
  bool check_quiet = false;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "verify loss gradients against finite differences");
  gradcheck->add_option("--seed", check.seed, "draw seed");
  gradcheck->add_option("--draws", check.draws_per_loss, "random draws per loss")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--perturb", check.perturbation,
                        "test hook: offset added to one analytic gradient entry");
  gradcheck->add_flag("--quiet", check_quiet, "print only the final verdict");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gradcheck->parsed())
      return uniadapt::experiment::cmd_gradcheck(check, check_quiet) ? 0 : 2;
    const uniadapt::config::ExperimentConfig cfg = resolve(args);
    if (generate->parsed()) uniadapt::experiment::cmd_generate(cfg);
    if (train->parsed()) uniadapt::experiment::cmd_train(cfg);
    if (evaluate->parsed()) uniadapt::experiment::cmd_evaluate(cfg);
    if (ablate->parsed()) uniadapt::experiment::cmd_ablate(cfg);
    if (sweep->parsed()) uniadapt::experiment::cmd_sweep_unknowns(cfg);
  } catch (const uniadapt::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const uniadapt::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
