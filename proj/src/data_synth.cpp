#include "uniadapt/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "uniadapt/common.hpp"
#include "uniadapt/rng.hpp"

namespace uniadapt::data {

namespace {

std::vector<int> iota_range(std::size_t first, std::size_t count) {
  std::vector<int> ids(count);
  std::iota(ids.begin(), ids.end(), static_cast<int>(first));
  return ids;
}

void append_range(std::vector<int>& ids, std::size_t first, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) ids.push_back(static_cast<int>(first + i));
}

void validate_shift(const LabelSplit& split, const ShiftSpec& shift) {
  if (shift.means.rows() != split.num_total_classes())
    throw ValidationError("shift spec provides means for " + std::to_string(shift.means.rows()) +
                          " classes but the split needs " +
                          std::to_string(split.num_total_classes()));
  if (shift.means.cols() == 0) throw ValidationError("class means must have at least 1 dimension");
  if (!(shift.cov_scale >= 0.0)) throw ValidationError("covariance scale must be >= 0");
  if (!(shift.rotation_rad >= 0.0) || shift.rotation_rad >= 2.0 * std::numbers::pi)
    throw ValidationError("rotation angle must lie in [0, 2*pi)");
  if (shift.rotation_rad != 0.0 && shift.means.cols() < 2)
    throw ValidationError("rotation needs at least 2 feature dimensions");
  if (!shift.translation.empty() && shift.translation.size() != shift.means.cols())
    throw ValidationError("translation has " + std::to_string(shift.translation.size()) +
                          " dimensions, features have " + std::to_string(shift.means.cols()));
  if (shift.samples_per_class == 0) throw ValidationError("samples per class must be >= 1");
}

// Draws every sample of one domain in class-id order so the draw sequence of
// one domain can never leak into the other.
LabeledDataset generate_domain(const std::vector<int>& classes, const ShiftSpec& shift,
                               Domain domain, std::mt19937_64& engine) {
  const std::size_t dims = shift.means.cols();
  const std::size_t n = classes.size() * shift.samples_per_class;
  LabeledDataset ds;
  ds.domain = domain;
  ds.features = Matrix(n, dims);
  ds.labels.reserve(n);

  std::normal_distribution<double> unit(0.0, 1.0);
  const double cos_a = std::cos(shift.rotation_rad);
  const double sin_a = std::sin(shift.rotation_rad);

  std::size_t row = 0;
  for (int cls : classes) {
    for (std::size_t s = 0; s < shift.samples_per_class; ++s, ++row) {
      auto out = ds.features.row(row);
      const auto mean = shift.means.row(static_cast<std::size_t>(cls));
      for (std::size_t d = 0; d < dims; ++d) out[d] = mean[d] + shift.cov_scale * unit(engine);
      if (domain == Domain::target) {
        if (shift.rotation_rad != 0.0) {
          const double x = out[0];
          const double y = out[1];
          out[0] = cos_a * x - sin_a * y;
          out[1] = sin_a * x + cos_a * y;
        }
        for (std::size_t d = 0; d < shift.translation.size(); ++d) out[d] += shift.translation[d];
      }
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& why) {
  throw ValidationError(path + ":" + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain parse_domain(const std::string& text) {
  if (text == "source") return Domain::source;
  if (text == "target") return Domain::target;
  throw ValidationError("unknown domain tag '" + text + "' (expected source or target)");
}

std::vector<int> LabelSplit::source_classes() const {
  return iota_range(0, num_source_classes());
}

std::vector<int> LabelSplit::target_classes() const {
  std::vector<int> ids = iota_range(0, n_shared);
  append_range(ids, num_source_classes(), n_target_private);
  return ids;
}

std::vector<int> LabelSplit::shared_classes() const { return iota_range(0, n_shared); }

void validate(const LabelSplit& split) {
  if (split.n_shared < 1) throw ValidationError("label split needs at least 1 shared class");
}

std::size_t identity_winding(std::size_t num_classes) {
  std::size_t q = static_cast<std::size_t>(std::lround(0.382 * static_cast<double>(num_classes)));
  if (q < 1) q = 1;
  while (std::gcd(q, num_classes) != 1) ++q;
  return q;
}

Matrix class_means(std::size_t num_classes, std::size_t dims, double radius) {
  if (num_classes == 0) throw ValidationError("mean layout needs at least 1 class");
  if (dims < 2) throw ValidationError("mean layout needs at least 2 dimensions");
  Matrix means(num_classes, dims);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(num_classes);
  const double winding = dims >= 4 ? static_cast<double>(identity_winding(num_classes)) : 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double angle = step * static_cast<double>(k);
    means(k, 0) = radius * std::cos(angle);
    means(k, 1) = radius * std::sin(angle);
    if (dims >= 4) {
      means(k, 2) = radius * std::cos(winding * angle);
      means(k, 3) = radius * std::sin(winding * angle);
    }
  }
  return means;
}

std::pair<LabeledDataset, LabeledDataset> generate(const LabelSplit& split,
                                                   const ShiftSpec& shift) {
  validate(split);
  validate_shift(split, shift);
  auto source_engine = make_engine(shift.seed, RngStream::data_source);
  auto target_engine = make_engine(shift.seed, RngStream::data_target);
  LabeledDataset source =
      generate_domain(split.source_classes(), shift, Domain::source, source_engine);
  LabeledDataset target =
      generate_domain(split.target_classes(), shift, Domain::target, target_engine);
  return {std::move(source), std::move(target)};
}

void write_dataset(const LabeledDataset& ds, const std::string& path) {
  if (ds.size() == 0) throw ValidationError("refusing to write an empty dataset");
  if (ds.features.rows() != ds.labels.size())
    throw ValidationError("dataset has " + std::to_string(ds.features.rows()) +
                          " feature rows but " + std::to_string(ds.labels.size()) + " labels");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open dataset file for writing: " + path);
  std::fprintf(f, "id,domain,label");
  for (std::size_t d = 0; d < ds.dim(); ++d) std::fprintf(f, ",f%zu", d);
  std::fprintf(f, "\n");
  const std::string domain = to_string(ds.domain);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::fprintf(f, "%zu,%s,%d", i, domain.c_str(), ds.labels[i]);
    for (double v : ds.features.row(i)) std::fprintf(f, ",%.17g", v);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

LabeledDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "missing header line");
  std::size_t dims = 0;
  {
    std::string expected = "id,domain,label";
    if (line.rfind(expected, 0) != 0) parse_fail(path, 1, "malformed header '" + line + "'");
    std::string rest = line.substr(expected.size());
    std::size_t pos = 0;
    while (pos < rest.size()) {
      if (rest[pos] != ',') parse_fail(path, 1, "malformed header '" + line + "'");
      std::size_t next = rest.find(',', pos + 1);
      if (next == std::string::npos) next = rest.size();
      const std::string col = rest.substr(pos + 1, next - pos - 1);
      if (col != "f" + std::to_string(dims))
        parse_fail(path, 1, "expected feature column f" + std::to_string(dims) + ", got '" + col +
                                "'");
      ++dims;
      pos = next;
    }
    if (dims == 0) parse_fail(path, 1, "header declares no feature columns");
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Domain domain = Domain::source;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 3 + dims)
      parse_fail(path, line_no,
                 "expected " + std::to_string(3 + dims) + " columns, got " +
                     std::to_string(fields.size()));

    std::size_t id = 0;
    std::size_t consumed = 0;
    try {
      id = std::stoul(fields[0], &consumed);
    } catch (const std::exception&) {
      parse_fail(path, line_no, "non-numeric sample id '" + fields[0] + "'");
    }
    if (consumed != fields[0].size())
      parse_fail(path, line_no, "non-numeric sample id '" + fields[0] + "'");
    if (id != rows.size())
      parse_fail(path, line_no, "expected sample id " + std::to_string(rows.size()) + ", got " +
                                    std::to_string(id));

    Domain row_domain = Domain::source;
    try {
      row_domain = parse_domain(fields[1]);
    } catch (const ValidationError& e) {
      parse_fail(path, line_no, e.what());
    }
    if (rows.empty())
      domain = row_domain;
    else if (row_domain != domain)
      parse_fail(path, line_no, "mixed domain tags in one dataset file");

    int label = 0;
    try {
      label = std::stoi(fields[2], &consumed);
    } catch (const std::exception&) {
      parse_fail(path, line_no, "non-numeric label '" + fields[2] + "'");
    }
    if (consumed != fields[2].size() || label < 0)
      parse_fail(path, line_no, "invalid label '" + fields[2] + "'");

    std::vector<double> feature(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      const std::string& cell = fields[3 + d];
      try {
        feature[d] = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        parse_fail(path, line_no, "non-numeric feature '" + cell + "' in column f" +
                                      std::to_string(d));
      }
      if (consumed != cell.size())
        parse_fail(path, line_no, "non-numeric feature '" + cell + "' in column f" +
                                      std::to_string(d));
    }
    labels.push_back(label);
    rows.push_back(std::move(feature));
  }
  if (rows.empty()) parse_fail(path, line_no, "dataset holds no samples");

  LabeledDataset ds;
  ds.domain = domain;
  ds.labels = std::move(labels);
  ds.features = Matrix(rows.size(), dims);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), ds.features.row(i).begin());
  return ds;
}

}  // namespace uniadapt::data
