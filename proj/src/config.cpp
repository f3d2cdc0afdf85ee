#include "uniadapt/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <type_traits>

#include "uniadapt/common.hpp"

namespace uniadapt::config {

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"data",
       {"source_path", "target_path", "n_shared", "n_source_private", "n_target_private",
        "samples_per_class", "input_dim", "radius", "cov_scale", "rotation_deg", "translation"}},
      {"model", {"hidden", "feature_dim"}},
      {"loss", {"alpha", "beta", "gamma", "margin"}},
      {"train",
       {"batch_size", "epochs", "tau", "momentum", "weight_decay", "lr_head", "lr_extractor",
        "schedule_a", "schedule_b", "disable_esl", "disable_sfc", "disable_tova",
        "init_checkpoint"}},
      {"run", {"seed", "out_dir", "checkpoint"}},
      {"sweep", {"target_private"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  std::size_t first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  std::size_t last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

// "section.key" -> value. The tokenizer enforces the section/key allowlist
// and rejects duplicates, so typos fail loudly with a line number.
class ParsedFile {
 public:
  ParsedFile(const std::string& text, std::string origin) : origin_(std::move(origin)) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string line = trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(line_no, "unterminated section header '" + line + "'");
        section = trim(line.substr(1, line.size() - 2));
        if (!allowed_keys().count(section)) fail(line_no, "unknown section [" + section + "]");
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) fail(line_no, "expected key = value, got '" + line + "'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (section.empty()) fail(line_no, "key '" + key + "' appears before any section");
      if (key.empty()) fail(line_no, "empty key");
      if (value.empty()) fail(line_no, "empty value for key '" + key + "'");
      if (!allowed_keys().at(section).count(key))
        fail(line_no, "unknown key '" + key + "' in section [" + section + "]");
      if (!entries_.emplace(section + "." + key, Entry{value, line_no}).second)
        fail(line_no, "duplicate key '" + key + "' in section [" + section + "]");
    }
  }

  bool has(const std::string& section, const std::string& key) const {
    return entries_.count(section + "." + key) > 0;
  }

  const Entry& at(const std::string& section, const std::string& key) const {
    return entries_.at(section + "." + key);
  }

  [[noreturn]] void fail(std::size_t line, const std::string& why) const {
    throw ValidationError(origin_ + ":" + std::to_string(line) + ": " + why);
  }

  [[noreturn]] void fail_key(const std::string& section, const std::string& key,
                             const std::string& why) const {
    fail(at(section, key).line, "key '" + key + "' in [" + section + "]: " + why);
  }

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, Entry> entries_;
};

double parse_double(const ParsedFile& file, const std::string& section, const std::string& key) {
  const std::string& text = file.at(section, key).value;
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    file.fail_key(section, key, "expected a number, got '" + text + "'");
  }
  if (consumed != text.size() || !std::isfinite(value))
    file.fail_key(section, key, "expected a finite number, got '" + text + "'");
  return value;
}

std::uint64_t parse_u64(const ParsedFile& file, const std::string& section,
                        const std::string& key) {
  const std::string& text = file.at(section, key).value;
  std::size_t consumed = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &consumed);
  } catch (const std::exception&) {
    file.fail_key(section, key, "expected a non-negative integer, got '" + text + "'");
  }
  if (consumed != text.size() || text[0] == '-')
    file.fail_key(section, key, "expected a non-negative integer, got '" + text + "'");
  return static_cast<std::uint64_t>(value);
}

std::size_t parse_size(const ParsedFile& file, const std::string& section,
                       const std::string& key) {
  return static_cast<std::size_t>(parse_u64(file, section, key));
}

bool parse_bool(const ParsedFile& file, const std::string& section, const std::string& key) {
  const std::string& text = file.at(section, key).value;
  if (text == "true") return true;
  if (text == "false") return false;
  file.fail_key(section, key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(trim(text.substr(start)));
      break;
    }
    parts.push_back(trim(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return parts;
}

std::vector<std::size_t> parse_size_list(const ParsedFile& file, const std::string& section,
                                         const std::string& key) {
  std::vector<std::size_t> values;
  for (const std::string& part : split_list(file.at(section, key).value)) {
    std::size_t consumed = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(part, &consumed);
    } catch (const std::exception&) {
      file.fail_key(section, key, "expected a comma-separated integer list, bad item '" + part +
                                      "'");
    }
    if (consumed != part.size() || part.empty() || part[0] == '-')
      file.fail_key(section, key, "expected a comma-separated integer list, bad item '" + part +
                                      "'");
    values.push_back(static_cast<std::size_t>(value));
  }
  return values;
}

std::vector<double> parse_double_list(const ParsedFile& file, const std::string& section,
                                      const std::string& key) {
  std::vector<double> values;
  for (const std::string& part : split_list(file.at(section, key).value)) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
      value = std::stod(part, &consumed);
    } catch (const std::exception&) {
      file.fail_key(section, key, "expected a comma-separated number list, bad item '" + part +
                                      "'");
    }
    if (consumed != part.size() || part.empty() || !std::isfinite(value))
      file.fail_key(section, key, "expected a comma-separated number list, bad item '" + part +
                                      "'");
    values.push_back(value);
  }
  return values;
}

void read_data_section(const ParsedFile& file, DataConfig& data) {
  const bool has_files = file.has("data", "source_path") || file.has("data", "target_path");
  const char* synth_keys[] = {"n_shared",    "n_source_private", "n_target_private",
                              "samples_per_class", "input_dim",  "radius",
                              "cov_scale",   "rotation_deg",     "translation"};
  bool has_synth = false;
  for (const char* key : synth_keys) has_synth = has_synth || file.has("data", key);

  if (has_files && has_synth)
    throw ValidationError(file.origin() +
                          ": [data] mixes dataset paths with synthesis keys; pick one mode");
  if (!has_files && !has_synth)
    throw ValidationError(file.origin() +
                          ": [data] needs either source_path/target_path or a synthesis split");

  if (has_files) {
    for (const char* key : {"source_path", "target_path"})
      if (!file.has("data", key))
        throw ValidationError(file.origin() + ": missing required key '" + key + "' in [data]");
    data.source_path = file.at("data", "source_path").value;
    data.target_path = file.at("data", "target_path").value;
    data.synthetic = false;
    return;
  }

  data.synthetic = true;
  for (const char* key : {"n_shared", "n_source_private", "n_target_private"})
    if (!file.has("data", key))
      throw ValidationError(file.origin() + ": missing required key '" + key + "' in [data]");
  data.split.n_shared = parse_size(file, "data", "n_shared");
  data.split.n_source_private = parse_size(file, "data", "n_source_private");
  data.split.n_target_private = parse_size(file, "data", "n_target_private");
  if (data.split.n_shared < 1)
    file.fail_key("data", "n_shared", "needs at least 1 shared class");

  if (file.has("data", "samples_per_class")) {
    data.samples_per_class = parse_size(file, "data", "samples_per_class");
    if (data.samples_per_class < 1) file.fail_key("data", "samples_per_class", "must be >= 1");
  }
  if (file.has("data", "input_dim")) {
    data.input_dim = parse_size(file, "data", "input_dim");
    if (data.input_dim < 2) file.fail_key("data", "input_dim", "must be >= 2");
  }
  if (file.has("data", "radius")) {
    data.radius = parse_double(file, "data", "radius");
    if (!(data.radius > 0.0)) file.fail_key("data", "radius", "must be positive");
  }
  if (file.has("data", "cov_scale")) {
    data.cov_scale = parse_double(file, "data", "cov_scale");
    if (!(data.cov_scale >= 0.0)) file.fail_key("data", "cov_scale", "must be >= 0");
  }
  if (file.has("data", "rotation_deg")) {
    data.rotation_deg = parse_double(file, "data", "rotation_deg");
    if (!(data.rotation_deg >= 0.0) || data.rotation_deg >= 360.0)
      file.fail_key("data", "rotation_deg", "must lie in [0, 360)");
  }
  if (file.has("data", "translation")) {
    data.translation = parse_double_list(file, "data", "translation");
    if (data.translation.size() != data.input_dim)
      file.fail_key("data", "translation",
                    "needs exactly input_dim (" + std::to_string(data.input_dim) + ") entries");
  }
}

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += format_double(values[i]);
    else
      out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_text(const std::string& text, const std::string& origin) {
  const ParsedFile file(text, origin);
  ExperimentConfig cfg;

  read_data_section(file, cfg.data);

  if (file.has("model", "hidden")) {
    cfg.model.hidden = parse_size_list(file, "model", "hidden");
    if (cfg.model.hidden.empty() ||
        std::any_of(cfg.model.hidden.begin(), cfg.model.hidden.end(),
                    [](std::size_t h) { return h < 1; }))
      file.fail_key("model", "hidden", "needs a list of positive layer widths");
  }
  if (file.has("model", "feature_dim")) {
    cfg.model.feature_dim = parse_size(file, "model", "feature_dim");
    if (cfg.model.feature_dim < 2) file.fail_key("model", "feature_dim", "must be >= 2");
  }

  losses::LossWeights& w = cfg.train.weights;
  if (file.has("loss", "alpha")) w.alpha = parse_double(file, "loss", "alpha");
  if (file.has("loss", "beta")) w.beta = parse_double(file, "loss", "beta");
  if (file.has("loss", "gamma")) w.gamma = parse_double(file, "loss", "gamma");
  if (file.has("loss", "margin")) w.margin = parse_double(file, "loss", "margin");
  if (w.alpha < 0.0) file.fail_key("loss", "alpha", "must be >= 0");
  if (w.beta < 0.0) file.fail_key("loss", "beta", "must be >= 0");
  if (w.gamma < 0.0) file.fail_key("loss", "gamma", "must be >= 0");
  if (w.margin < 0.0 || w.margin > 1.0) file.fail_key("loss", "margin", "must lie in [0, 1]");

  train::TrainConfig& t = cfg.train;
  if (file.has("train", "batch_size")) {
    t.batch_size = parse_size(file, "train", "batch_size");
    if (t.batch_size < 2) file.fail_key("train", "batch_size", "must be >= 2");
  }
  if (file.has("train", "epochs")) {
    t.epochs = parse_size(file, "train", "epochs");
    if (t.epochs < 1) file.fail_key("train", "epochs", "must be >= 1");
  }
  if (file.has("train", "tau")) {
    t.tau = parse_double(file, "train", "tau");
    if (!(t.tau > 0.0)) file.fail_key("train", "tau", "must be positive");
  }
  train::OptimizerConfig& o = t.optimizer;
  if (file.has("train", "momentum")) {
    o.momentum = parse_double(file, "train", "momentum");
    if (o.momentum < 0.0 || o.momentum >= 1.0)
      file.fail_key("train", "momentum", "must lie in [0, 1)");
  }
  if (file.has("train", "weight_decay")) {
    o.weight_decay = parse_double(file, "train", "weight_decay");
    if (o.weight_decay < 0.0) file.fail_key("train", "weight_decay", "must be >= 0");
  }
  if (file.has("train", "lr_head")) {
    o.lr_head = parse_double(file, "train", "lr_head");
    if (o.lr_head < 0.0) file.fail_key("train", "lr_head", "must be >= 0");
  }
  if (file.has("train", "lr_extractor")) {
    o.lr_extractor = parse_double(file, "train", "lr_extractor");
    if (o.lr_extractor < 0.0) file.fail_key("train", "lr_extractor", "must be >= 0");
  }
  if (file.has("train", "schedule_a")) {
    o.schedule_a = parse_double(file, "train", "schedule_a");
    if (o.schedule_a < 0.0) file.fail_key("train", "schedule_a", "must be >= 0");
  }
  if (file.has("train", "schedule_b")) {
    o.schedule_b = parse_double(file, "train", "schedule_b");
    if (o.schedule_b < 0.0) file.fail_key("train", "schedule_b", "must be >= 0");
  }
  if (file.has("train", "disable_esl")) t.disable_esl = parse_bool(file, "train", "disable_esl");
  if (file.has("train", "disable_sfc")) t.disable_sfc = parse_bool(file, "train", "disable_sfc");
  if (file.has("train", "disable_tova"))
    t.disable_tova = parse_bool(file, "train", "disable_tova");
  if (file.has("train", "init_checkpoint"))
    t.init_checkpoint = file.at("train", "init_checkpoint").value;

  if (file.has("run", "seed")) t.seed = parse_u64(file, "run", "seed");
  if (file.has("run", "out_dir")) cfg.out_dir = file.at("run", "out_dir").value;
  if (file.has("run", "checkpoint")) cfg.checkpoint = file.at("run", "checkpoint").value;

  if (file.has("sweep", "target_private")) {
    cfg.sweep_target_private = parse_size_list(file, "sweep", "target_private");
    if (cfg.sweep_target_private.empty() ||
        std::any_of(cfg.sweep_target_private.begin(), cfg.sweep_target_private.end(),
                    [](std::size_t n) { return n < 1; }))
      file.fail_key("sweep", "target_private", "needs a list of positive class counts");
  }
  return cfg;
}

ExperimentConfig parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_text(text.str(), path);
}

std::string render(const ExperimentConfig& cfg) {
  std::string out;
  out += "[data]\n";
  if (cfg.data.synthetic) {
    out += "n_shared = " + std::to_string(cfg.data.split.n_shared) + "\n";
    out += "n_source_private = " + std::to_string(cfg.data.split.n_source_private) + "\n";
    out += "n_target_private = " + std::to_string(cfg.data.split.n_target_private) + "\n";
    out += "samples_per_class = " + std::to_string(cfg.data.samples_per_class) + "\n";
    out += "input_dim = " + std::to_string(cfg.data.input_dim) + "\n";
    out += "radius = " + format_double(cfg.data.radius) + "\n";
    out += "cov_scale = " + format_double(cfg.data.cov_scale) + "\n";
    out += "rotation_deg = " + format_double(cfg.data.rotation_deg) + "\n";
    if (!cfg.data.translation.empty()) out += "translation = " + join(cfg.data.translation) + "\n";
  } else {
    out += "source_path = " + cfg.data.source_path + "\n";
    out += "target_path = " + cfg.data.target_path + "\n";
  }
  out += "\n[model]\n";
  out += "hidden = " + join(cfg.model.hidden) + "\n";
  out += "feature_dim = " + std::to_string(cfg.model.feature_dim) + "\n";
  out += "\n[loss]\n";
  out += "alpha = " + format_double(cfg.train.weights.alpha) + "\n";
  out += "beta = " + format_double(cfg.train.weights.beta) + "\n";
  out += "gamma = " + format_double(cfg.train.weights.gamma) + "\n";
  out += "margin = " + format_double(cfg.train.weights.margin) + "\n";
  out += "\n[train]\n";
  out += "batch_size = " + std::to_string(cfg.train.batch_size) + "\n";
  out += "epochs = " + std::to_string(cfg.train.epochs) + "\n";
  out += "tau = " + format_double(cfg.train.tau) + "\n";
  out += "momentum = " + format_double(cfg.train.optimizer.momentum) + "\n";
  out += "weight_decay = " + format_double(cfg.train.optimizer.weight_decay) + "\n";
  out += "lr_head = " + format_double(cfg.train.optimizer.lr_head) + "\n";
  out += "lr_extractor = " + format_double(cfg.train.optimizer.lr_extractor) + "\n";
  out += "schedule_a = " + format_double(cfg.train.optimizer.schedule_a) + "\n";
  out += "schedule_b = " + format_double(cfg.train.optimizer.schedule_b) + "\n";
  out += std::string("disable_esl = ") + (cfg.train.disable_esl ? "true" : "false") + "\n";
  out += std::string("disable_sfc = ") + (cfg.train.disable_sfc ? "true" : "false") + "\n";
  out += std::string("disable_tova = ") + (cfg.train.disable_tova ? "true" : "false") + "\n";
  if (!cfg.train.init_checkpoint.empty())
    out += "init_checkpoint = " + cfg.train.init_checkpoint + "\n";
  out += "\n[run]\n";
  out += "seed = " + std::to_string(cfg.train.seed) + "\n";
  out += "out_dir = " + cfg.out_dir + "\n";
  if (!cfg.checkpoint.empty()) out += "checkpoint = " + cfg.checkpoint + "\n";
  if (!cfg.sweep_target_private.empty()) {
    out += "\n[sweep]\n";
    out += "target_private = " + join(cfg.sweep_target_private) + "\n";
  }
  return out;
}

void write_file(const ExperimentConfig& cfg, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open config file for writing: " + path);
  const std::string text = render(cfg);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

data::ShiftSpec shift_spec(const DataConfig& data, std::uint64_t seed) {
  if (!data.synthetic)
    throw ValidationError("this command needs a synthesis-mode [data] section");
  data::ShiftSpec shift;
  shift.means = data::class_means(data.split.num_total_classes(), data.input_dim, data.radius);
  shift.cov_scale = data.cov_scale;
  shift.rotation_rad = data.rotation_deg * std::numbers::pi / 180.0;
  shift.translation = data.translation;
  shift.samples_per_class = data.samples_per_class;
  shift.seed = seed;
  return shift;
}

std::pair<data::LabeledDataset, data::LabeledDataset> load_datasets(
    const ExperimentConfig& cfg) {
  if (cfg.data.synthetic)
    return data::generate(cfg.data.split, shift_spec(cfg.data, cfg.train.seed));
  data::LabeledDataset source = data::read_dataset(cfg.data.source_path);
  data::LabeledDataset target = data::read_dataset(cfg.data.target_path);
  if (source.domain != data::Domain::source)
    throw ValidationError(cfg.data.source_path + " is not tagged as a source-domain file");
  if (target.domain != data::Domain::target)
    throw ValidationError(cfg.data.target_path + " is not tagged as a target-domain file");
  return {std::move(source), std::move(target)};
}

}  // namespace uniadapt::config
