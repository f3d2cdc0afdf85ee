#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uniadapt/common.hpp"
#include "uniadapt/data_synth.hpp"
#include "uniadapt/matrix.hpp"

using uniadapt::Matrix;
using uniadapt::ValidationError;
namespace data = uniadapt::data;

namespace {

std::set<int> label_set(const std::vector<int>& labels) { return {labels.begin(), labels.end()}; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("uniadapt_data_test_" + name);
}

data::ShiftSpec default_spec(const data::LabelSplit& split, std::size_t dims) {
  data::ShiftSpec spec;
  spec.means = data::class_means(split.num_total_classes(), dims);
  return spec;
}

}  // namespace

TEST_CASE("label splits own disjoint id ranges with shared ids first") {
  data::LabelSplit split{10, 10, 11};
  CHECK(split.num_source_classes() == 20);
  CHECK(split.num_total_classes() == 31);

  const std::vector<int> src = split.source_classes();
  const std::vector<int> tgt = split.target_classes();
  const std::vector<int> shared = split.shared_classes();

  std::vector<int> inter;
  std::set_intersection(src.begin(), src.end(), tgt.begin(), tgt.end(), std::back_inserter(inter));
  CHECK(inter == shared);
  REQUIRE(shared.size() == 10);
  for (int c = 0; c < 10; ++c) CHECK(shared[static_cast<std::size_t>(c)] == c);

  std::vector<int> src_only;
  std::set_difference(src.begin(), src.end(), tgt.begin(), tgt.end(),
                      std::back_inserter(src_only));
  CHECK(src_only.size() == 10);
  std::vector<int> tgt_only;
  std::set_difference(tgt.begin(), tgt.end(), src.begin(), src.end(),
                      std::back_inserter(tgt_only));
  CHECK(tgt_only.size() == 11);
  CHECK(tgt_only.front() == 20);
  CHECK(tgt_only.back() == 30);
}

TEST_CASE("generated label sets realize the configured split") {
  data::LabelSplit split{10, 10, 11};
  data::ShiftSpec spec = default_spec(split, 6);
  spec.samples_per_class = 3;
  const auto [source, target] = data::generate(split, spec);

  CHECK(source.size() == 20 * 3);
  CHECK(target.size() == 21 * 3);
  CHECK(source.dim() == 6);
  CHECK(source.domain == data::Domain::source);
  CHECK(target.domain == data::Domain::target);

  const std::set<int> src_set = label_set(source.labels);
  const std::set<int> tgt_set = label_set(target.labels);
  const std::vector<int> src_classes = split.source_classes();
  const std::vector<int> tgt_classes = split.target_classes();
  const std::set<int> expect_src(src_classes.begin(), src_classes.end());
  const std::set<int> expect_tgt(tgt_classes.begin(), tgt_classes.end());
  CHECK(src_set == expect_src);
  CHECK(tgt_set == expect_tgt);
}

TEST_CASE("the minimal split yields one sample per domain") {
  data::LabelSplit split{1, 0, 0};
  data::ShiftSpec spec = default_spec(split, 2);
  spec.samples_per_class = 1;
  const auto [source, target] = data::generate(split, spec);
  CHECK(source.size() == 1);
  CHECK(target.size() == 1);
  CHECK(source.labels[0] == 0);
  CHECK(target.labels[0] == 0);
}

TEST_CASE("zero covariance and identity transform collapse both domains onto the means") {
  data::LabelSplit split{3, 1, 2};
  data::ShiftSpec spec = default_spec(split, 5);
  spec.cov_scale = 0.0;
  spec.samples_per_class = 2;
  const auto [source, target] = data::generate(split, spec);

  for (std::size_t i = 0; i < source.size(); ++i)
    for (std::size_t c = 0; c < 5; ++c)
      CHECK(source.features(i, c) ==
            spec.means(static_cast<std::size_t>(source.labels[i]), c));
  // rotation 0 and empty translation leave the target untransformed too
  for (std::size_t i = 0; i < target.size(); ++i)
    for (std::size_t c = 0; c < 5; ++c)
      CHECK(target.features(i, c) ==
            doctest::Approx(spec.means(static_cast<std::size_t>(target.labels[i]), c))
                .epsilon(1e-12));
}

TEST_CASE("generation is deterministic in the seed and changes with it") {
  data::LabelSplit split{4, 2, 3};
  data::ShiftSpec spec = default_spec(split, 4);
  spec.samples_per_class = 5;
  spec.seed = 77;
  const auto [s1, t1] = data::generate(split, spec);
  const auto [s2, t2] = data::generate(split, spec);
  CHECK(s1.features == s2.features);
  CHECK(t1.features == t2.features);
  CHECK(s1.labels == s2.labels);
  CHECK(t1.labels == t2.labels);

  spec.seed = 78;
  const auto [s3, t3] = data::generate(split, spec);
  CHECK_FALSE(s1.features == s3.features);
}

TEST_CASE("rotation moves only the first two coordinates of the target") {
  data::LabelSplit split{2, 0, 0};
  data::ShiftSpec spec = default_spec(split, 6);
  spec.cov_scale = 0.0;
  spec.samples_per_class = 1;
  spec.rotation_rad = 3.14159265358979323846 / 2.0;  // quarter turn
  const auto [source, target] = data::generate(split, spec);

  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto lbl = static_cast<std::size_t>(target.labels[i]);
    const double x = spec.means(lbl, 0);
    const double y = spec.means(lbl, 1);
    CHECK(target.features(i, 0) == doctest::Approx(-y).epsilon(1e-9));
    CHECK(target.features(i, 1) == doctest::Approx(x).epsilon(1e-9));
    for (std::size_t c = 2; c < 6; ++c)
      CHECK(target.features(i, c) == doctest::Approx(spec.means(lbl, c)).epsilon(1e-12));
  }
  // Source stays put.
  for (std::size_t i = 0; i < source.size(); ++i)
    CHECK(source.features(i, 0) ==
          spec.means(static_cast<std::size_t>(source.labels[i]), 0));
}

TEST_CASE("translation shifts every target coordinate") {
  data::LabelSplit split{2, 0, 0};
  data::ShiftSpec spec = default_spec(split, 3);
  spec.cov_scale = 0.0;
  spec.samples_per_class = 1;
  spec.translation = {1.0, -2.0, 0.5};
  const auto [source, target] = data::generate(split, spec);
  (void)source;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto lbl = static_cast<std::size_t>(target.labels[i]);
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(target.features(i, c) ==
            doctest::Approx(spec.means(lbl, c) + spec.translation[c]).epsilon(1e-12));
  }
}

TEST_CASE("datasets round-trip through the delimited text format") {
  data::LabelSplit split{3, 2, 1};
  data::ShiftSpec spec = default_spec(split, 4);
  spec.samples_per_class = 4;
  spec.seed = 5;
  const auto [source, target] = data::generate(split, spec);

  const std::string spath = temp_file("roundtrip_source.csv").string();
  const std::string tpath = temp_file("roundtrip_target.csv").string();
  data::write_dataset(source, spath);
  data::write_dataset(target, tpath);

  const data::LabeledDataset s2 = data::read_dataset(spath);
  const data::LabeledDataset t2 = data::read_dataset(tpath);
  CHECK(s2.features == source.features);
  CHECK(s2.labels == source.labels);
  CHECK(s2.domain == data::Domain::source);
  CHECK(t2.features == target.features);
  CHECK(t2.labels == target.labels);
  CHECK(t2.domain == data::Domain::target);

  // Re-writing what was read must be byte-identical (write -> read -> write).
  const std::string spath2 = temp_file("roundtrip_source2.csv").string();
  data::write_dataset(s2, spath2);
  CHECK(slurp(spath) == slurp(spath2));

  std::filesystem::remove(spath);
  std::filesystem::remove(tpath);
  std::filesystem::remove(spath2);
}

TEST_CASE("a malformed row is reported with its line number") {
  const std::string path = temp_file("malformed.csv").string();
  {
    std::ofstream out(path);
    out << "id,domain,label,f0,f1\n";
    out << "0,source,0,1.5,2.5\n";
    out << "1,source,0,1.5\n";  // line 3: missing a field
  }
  bool threw = false;
  try {
    data::read_dataset(path);
  } catch (const ValidationError& e) {
    threw = true;
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK(threw);
  std::filesystem::remove(path);
}

TEST_CASE("reader errors name the offending content") {
  const std::string path = temp_file("reader_errors.csv").string();
  SUBCASE("bad header") {
    std::ofstream(path) << "id,domain,label,g0\n0,source,0,1.0\n";
  }
  SUBCASE("mixed domains") {
    std::ofstream(path) << "id,domain,label,f0\n0,source,0,1.0\n1,target,0,1.0\n";
  }
  SUBCASE("id out of order") {
    std::ofstream(path) << "id,domain,label,f0\n1,source,0,1.0\n";
  }
  SUBCASE("non-numeric feature") {
    std::ofstream(path) << "id,domain,label,f0\n0,source,0,abc\n";
  }
  SUBCASE("unknown domain tag") {
    std::ofstream(path) << "id,domain,label,f0\n0,middle,0,1.0\n";
  }
  CHECK_THROWS_AS(data::read_dataset(path), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("a nearest-mean rule is perfect on noise-free untransformed data") {
  data::LabelSplit split{5, 3, 2};
  data::ShiftSpec spec = default_spec(split, 6);
  spec.cov_scale = 0.0;
  spec.samples_per_class = 3;
  const auto [source, target] = data::generate(split, spec);

  auto nearest = [&](std::span<const double> x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spec.means.rows(); ++k) {
      double d = 0.0;
      for (std::size_t c = 0; c < x.size(); ++c) {
        const double diff = x[c] - spec.means(k, c);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return static_cast<int>(best);
  };

  for (std::size_t i = 0; i < source.size(); ++i)
    CHECK(nearest(source.features.row(i)) == source.labels[i]);
  for (std::size_t i = 0; i < target.size(); ++i)
    CHECK(nearest(target.features.row(i)) == target.labels[i]);
}

TEST_CASE("class means lie on the documented circles") {
  const std::size_t c_count = 20;
  const Matrix means = data::class_means(c_count, 10, 5.0);
  REQUIRE(means.rows() == c_count);
  REQUIRE(means.cols() == 10);

  const std::size_t q = data::identity_winding(c_count);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t k = 0; k < c_count; ++k) {
    const double angle = two_pi * static_cast<double>(k) / static_cast<double>(c_count);
    CHECK(means(k, 0) == doctest::Approx(5.0 * std::cos(angle)).epsilon(1e-12));
    CHECK(means(k, 1) == doctest::Approx(5.0 * std::sin(angle)).epsilon(1e-12));
    const double wound = two_pi * static_cast<double>(q * k) / static_cast<double>(c_count);
    CHECK(means(k, 2) == doctest::Approx(5.0 * std::cos(wound)).epsilon(1e-9));
    CHECK(means(k, 3) == doctest::Approx(5.0 * std::sin(wound)).epsilon(1e-9));
    for (std::size_t c = 4; c < 10; ++c) CHECK(means(k, c) == 0.0);
  }

  // Low-dimensional fallback: only the rotation-plane circle fits.
  const Matrix flat = data::class_means(4, 2, 5.0);
  CHECK(flat.cols() == 2);
}

TEST_CASE("the identity winding is coprime to the class count") {
  for (std::size_t c = 2; c <= 40; ++c) {
    const std::size_t q = data::identity_winding(c);
    CHECK(std::gcd(q, c) == 1);
    CHECK(q >= 1);
    const auto target = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(0.382 * static_cast<double>(c))));
    CHECK(q >= target);
    // Minimality: nothing between the target and q is coprime.
    for (std::size_t cand = target; cand < q; ++cand) CHECK(std::gcd(cand, c) != 1);
  }
}

TEST_CASE("generator validation rejects out-of-contract specs") {
  data::LabelSplit split{2, 1, 1};
  data::ShiftSpec spec = default_spec(split, 4);

  SUBCASE("zero shared classes") {
    data::LabelSplit bad{0, 2, 2};
    CHECK_THROWS_AS(data::validate(bad), ValidationError);
  }
  SUBCASE("zero samples per class") {
    spec.samples_per_class = 0;
    CHECK_THROWS_AS(data::generate(split, spec), ValidationError);
  }
  SUBCASE("negative covariance scale") {
    spec.cov_scale = -0.1;
    CHECK_THROWS_AS(data::generate(split, spec), ValidationError);
  }
  SUBCASE("rotation outside [0, 2pi)") {
    spec.rotation_rad = 7.0;
    CHECK_THROWS_AS(data::generate(split, spec), ValidationError);
  }
  SUBCASE("translation dimension mismatch") {
    spec.translation = {1.0, 2.0};
    CHECK_THROWS_AS(data::generate(split, spec), ValidationError);
  }
  SUBCASE("means row count mismatch") {
    spec.means = data::class_means(3, 4);
    CHECK_THROWS_AS(data::generate(split, spec), ValidationError);
  }
}
