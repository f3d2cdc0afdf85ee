#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "uniadapt/classifier.hpp"
#include "uniadapt/common.hpp"
#include "uniadapt/metrics.hpp"

using uniadapt::ValidationError;
using uniadapt::classifier::Decision;
namespace metrics = uniadapt::metrics;

namespace {

Decision make(int predicted, int argmax, double score) { return Decision{predicted, argmax, score}; }

}  // namespace

TEST_CASE("hos matches the published score pairs") {
  CHECK(std::abs(metrics::hos(76.7, 72.9) - 74.8) < 0.05);
  CHECK(std::abs(metrics::hos(93.3, 75.2) - 83.3) < 0.05);
}

TEST_CASE("hos of equal inputs is the input itself") {
  for (double x : {1.0, 25.0, 50.0, 99.0, 100.0})
    CHECK(metrics::hos(x, x) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("hos collapses to zero when either side is zero") {
  CHECK(metrics::hos(100.0, 0.0) == 0.0);
  CHECK(metrics::hos(0.0, 100.0) == 0.0);
  CHECK(metrics::hos(0.0, 0.0) == 0.0);
}

TEST_CASE("hos is symmetric and sits between min and mean") {
  std::mt19937_64 eng(61);
  std::uniform_real_distribution<double> dist(1.0, 100.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = dist(eng);
    const double b = dist(eng);
    const double h = metrics::hos(a, b);
    CHECK(h == doctest::Approx(metrics::hos(b, a)).epsilon(1e-12));
    CHECK(h >= std::min(a, b) - 1e-9);
    CHECK(h <= 0.5 * (a + b) + 1e-9);
  }
}

TEST_CASE("hos rejects values outside [0, 100]") {
  CHECK_THROWS_AS(metrics::hos(-1.0, 50.0), ValidationError);
  CHECK_THROWS_AS(metrics::hos(50.0, 101.0), ValidationError);
  CHECK_THROWS_AS(metrics::hos(std::nan(""), 50.0), ValidationError);
}

TEST_CASE("a perfect run scores 100 everywhere") {
  // K = 2, shared classes {0, 1}, label 7 plays the unknown.
  std::vector<Decision> ds = {make(0, 0, 0.1), make(1, 1, 0.2), make(2, 0, 0.9), make(2, 1, 0.8)};
  const std::vector<int> truth = {0, 1, 7, 7};
  const std::vector<int> shared = {0, 1};
  const metrics::MetricsReport r = metrics::evaluate(ds, truth, shared, 2);
  CHECK(r.acc_kn == doctest::Approx(100.0));
  CHECK(r.acc_unk == doctest::Approx(100.0));
  CHECK(r.hos == doctest::Approx(100.0));
  CHECK(r.acc == doctest::Approx(100.0));
  CHECK(r.auc == doctest::Approx(1.0));
}

TEST_CASE("rejecting everything zeroes the known side and the harmonic mean") {
  std::vector<Decision> ds = {make(2, 0, 0.9), make(2, 1, 0.9), make(2, 0, 0.9)};
  const std::vector<int> truth = {0, 1, 7};
  const std::vector<int> shared = {0, 1};
  const metrics::MetricsReport r = metrics::evaluate(ds, truth, shared, 2);
  CHECK(r.acc_kn == 0.0);
  CHECK(r.acc_unk == 100.0);
  CHECK(r.hos == 0.0);
  CHECK(r.acc == 0.0);
}

TEST_CASE("the 12-sample toy run lands on 75/75/75") {
  std::vector<Decision> ds;
  std::vector<int> truth;
  // class 0: four samples, all correct
  for (int i = 0; i < 4; ++i) {
    ds.push_back(make(0, 0, 0.1));
    truth.push_back(0);
  }
  // class 1: two correct, two misclassified as class 0 (still "known")
  ds.push_back(make(1, 1, 0.2));
  ds.push_back(make(1, 1, 0.3));
  ds.push_back(make(0, 0, 0.25));
  ds.push_back(make(0, 0, 0.15));
  for (int i = 0; i < 4; ++i) truth.push_back(1);
  // four unknowns, three rejected, one leaking into class 0
  ds.push_back(make(2, 0, 0.9));
  ds.push_back(make(2, 1, 0.85));
  ds.push_back(make(2, 0, 0.8));
  ds.push_back(make(0, 0, 0.4));
  for (int i = 0; i < 4; ++i) truth.push_back(9);

  const std::vector<int> shared = {0, 1};
  const metrics::MetricsReport r = metrics::evaluate(ds, truth, shared, 2);
  CHECK(r.acc_kn == doctest::Approx(75.0).epsilon(1e-12));   // (100 + 50) / 2
  CHECK(r.acc_unk == doctest::Approx(75.0).epsilon(1e-12));  // 3 of 4
  CHECK(r.hos == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(r.acc == doctest::Approx(75.0).epsilon(1e-12));  // 6 of 8 instances
}

TEST_CASE("acc_kn weights every class equally regardless of its size") {
  // Class 0: 1 sample at 100%. Class 1: 8 samples at 50%. Unweighted mean 75.
  std::vector<Decision> ds = {make(0, 0, 0.1)};
  std::vector<int> truth = {0};
  for (int i = 0; i < 8; ++i) {
    ds.push_back(make(i < 4 ? 1 : 0, 1, 0.2));
    truth.push_back(1);
  }
  ds.push_back(make(2, 0, 0.9));
  truth.push_back(5);
  const metrics::MetricsReport r = metrics::evaluate(ds, truth, std::vector<int>{0, 1}, 2);
  CHECK(r.acc_kn == doctest::Approx(75.0).epsilon(1e-12));
  // Instance accuracy tells the size-weighted story instead.
  CHECK(r.acc == doctest::Approx(100.0 * 5.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("a shared class with no samples is excluded rather than poisoning the mean") {
  std::vector<Decision> ds = {make(0, 0, 0.1), make(2, 0, 0.9)};
  const std::vector<int> truth = {0, 8};
  const std::vector<int> shared = {0, 1};  // class 1 never appears
  const metrics::MetricsReport r = metrics::evaluate(ds, truth, shared, 2);
  CHECK(r.acc_kn == doctest::Approx(100.0));
  CHECK(r.acc_unk == doctest::Approx(100.0));
}

TEST_CASE("empty populations surface as NaN, not fake zeros") {
  std::vector<Decision> known_only = {make(0, 0, 0.1), make(1, 1, 0.2)};
  const metrics::MetricsReport r1 =
      metrics::evaluate(known_only, std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
  CHECK(std::isnan(r1.acc_unk));
  CHECK(std::isnan(r1.hos));
  CHECK(std::isnan(r1.auc));
  CHECK(r1.acc_kn == doctest::Approx(100.0));

  std::vector<Decision> unknown_only = {make(2, 0, 0.9)};
  const metrics::MetricsReport r2 =
      metrics::evaluate(unknown_only, std::vector<int>{4}, std::vector<int>{0, 1}, 2);
  CHECK(std::isnan(r2.acc_kn));
  CHECK(std::isnan(r2.hos));
  CHECK(r2.acc_unk == doctest::Approx(100.0));
}

TEST_CASE("auroc is 1 for perfect separation and 0.5 for pure ties") {
  const std::vector<double> sep = {0.9, 0.8, 0.1, 0.2};
  const std::vector<bool> flags = {true, true, false, false};
  CHECK(metrics::auroc(sep, flags) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> tied = {0.5, 0.5, 0.5, 0.5};
  CHECK(metrics::auroc(tied, flags) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("auroc counts one inverted pair out of four as 0.75") {
  const std::vector<double> scores = {0.9, 0.8, 0.7, 0.85};
  const std::vector<bool> flags = {true, true, false, false};
  CHECK(metrics::auroc(scores, flags) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auroc is invariant under strictly monotone transforms") {
  std::mt19937_64 eng(62);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> scores(24);
  std::vector<bool> flags(24);
  for (std::size_t i = 0; i < 24; ++i) {
    scores[i] = dist(eng);
    flags[i] = (i % 3 == 0);
  }
  const double base = metrics::auroc(scores, flags);
  std::vector<double> warped = scores;
  for (double& s : warped) s = std::exp(3.0 * s) - 0.5;
  CHECK(metrics::auroc(warped, flags) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("auroc refuses degenerate or non-finite inputs") {
  CHECK_THROWS_AS(metrics::auroc(std::vector<double>{0.5, 0.6}, std::vector<bool>{true, true}),
                  ValidationError);
  CHECK_THROWS_AS(metrics::auroc(std::vector<double>{0.5, 0.6}, std::vector<bool>{false, false}),
                  ValidationError);
  CHECK_THROWS_AS(
      metrics::auroc(std::vector<double>{std::nan(""), 0.6}, std::vector<bool>{true, false}),
      ValidationError);
  CHECK_THROWS_AS(metrics::auroc(std::vector<double>{0.5}, std::vector<bool>{true, false}),
                  ValidationError);
}

TEST_CASE("evaluate validates its inputs") {
  std::vector<Decision> ds = {make(0, 0, 0.1)};
  CHECK_THROWS_AS(metrics::evaluate(ds, std::vector<int>{0, 1}, std::vector<int>{0}, 2),
                  ValidationError);
  CHECK_THROWS_AS(metrics::evaluate(std::vector<Decision>{}, std::vector<int>{},
                                    std::vector<int>{0}, 2),
                  ValidationError);
  CHECK_THROWS_AS(metrics::evaluate(ds, std::vector<int>{0}, std::vector<int>{}, 2),
                  ValidationError);
}

TEST_CASE("metric tables render one fixed-precision row per epoch") {
  std::vector<metrics::MetricsReport> history(2);
  history[0].acc_kn = 80.0;
  history[0].acc_unk = 77.28;
  history[0].hos = 74.75;
  history[0].acc = 70.0;
  history[0].auc = 0.912;
  history[1].acc_kn = 80.0;
  history[1].acc_unk = 80.0;
  history[1].hos = 80.0;
  history[1].acc = 75.0;
  history[1].auc = 0.95;
  const std::string path =
      (std::filesystem::temp_directory_path() / "uniadapt_metrics_test.csv").string();
  metrics::write_metrics_csv(history, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,hos,acc_kn,acc_unk,acc,auc");
  std::getline(in, line);
  CHECK(line == "1,74.8,80.0,77.3,70.0,0.912");
  std::getline(in, line);
  CHECK(line == "2,80.0,80.0,80.0,75.0,0.950");
  CHECK_FALSE(std::getline(in, line));
  std::filesystem::remove(path);
}

TEST_CASE("the json mirror carries full precision") {
  std::vector<metrics::MetricsReport> history(1);
  history[0].acc_kn = 80.125;
  history[0].acc_unk = 77.28125;
  history[0].hos = 74.7517;
  history[0].acc = 70.0625;
  history[0].auc = 0.912345;
  const std::string path =
      (std::filesystem::temp_directory_path() / "uniadapt_metrics_test.json").string();
  metrics::write_metrics_json(history, path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("74.7517") != std::string::npos);
  CHECK(text.find("0.912345") != std::string::npos);
  CHECK(text.find("\"epoch\": 1") != std::string::npos);
  std::filesystem::remove(path);
}
