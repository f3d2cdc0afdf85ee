#ifndef UNIADAPT_CONFIG_HPP
#define UNIADAPT_CONFIG_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uniadapt/data_synth.hpp"
#include "uniadapt/trainer.hpp"

namespace uniadapt::config {

// Where the two domains come from: either a pair of dataset files or a
// synthesis recipe. Exactly one of the two modes may be configured.
struct DataConfig {
  // file mode
  std::string source_path;
  std::string target_path;
  // synthesis mode
  bool synthetic = false;
  data::LabelSplit split;
  std::size_t samples_per_class = 50;
  std::size_t input_dim = 10;
  double radius = 5.0;
  double cov_scale = 1.0;
  double rotation_deg = 30.0;
  std::vector<double> translation;  // empty = no shift
};

// One experiment, fully resolved. Parsed from a sectioned key-value file
// ([data], [model], [loss], [train], [run], [sweep]; see docs/formats.md);
// unknown sections, unknown keys, duplicates, and malformed values are all
// hard errors, so a typo can never silently fall back to a default.
struct ExperimentConfig {
  DataConfig data;
  train::ModelConfig model;
  train::TrainConfig train;  // includes loss weights ([loss]) and seed ([run])
  std::string out_dir = "run-output";
  std::string checkpoint;  // evaluate reads this; empty = <out_dir>/checkpoint.txt
  std::vector<std::size_t> sweep_target_private;
};

ExperimentConfig parse_file(const std::string& path);
ExperimentConfig parse_text(const std::string& text, const std::string& origin);

// Round-trip guarantee: render() emits every resolved value, and
// parse_text(render(c)) reproduces c exactly.
std::string render(const ExperimentConfig& cfg);
void write_file(const ExperimentConfig& cfg, const std::string& path);

// Builds the generator inputs for a synthesis-mode config; the class means
// come from the documented default layout.
data::ShiftSpec shift_spec(const DataConfig& data, std::uint64_t seed);

// Reads or synthesizes (source, target) according to the config. File-mode
// datasets must carry the matching domain tag.
std::pair<data::LabeledDataset, data::LabeledDataset> load_datasets(const ExperimentConfig& cfg);

}  // namespace uniadapt::config

#endif
