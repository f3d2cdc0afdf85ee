#include "uniadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <vector>

#include "uniadapt/common.hpp"
#include "json.hpp"

namespace uniadapt::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double hos(double acc_kn, double acc_unk) {
  if (!(acc_kn >= 0.0 && acc_kn <= 100.0) || !(acc_unk >= 0.0 && acc_unk <= 100.0))
    throw ValidationError("hos inputs must be percentages in [0, 100]");
  if (acc_kn == 0.0 || acc_unk == 0.0) return 0.0;
  return 2.0 * acc_kn * acc_unk / (acc_kn + acc_unk);
}

MetricsReport evaluate(std::span<const classifier::Decision> decisions,
                       std::span<const int> ground_truth, std::span<const int> shared_classes,
                       int num_classes) {
  if (decisions.size() != ground_truth.size())
    throw ValidationError("evaluate got " + std::to_string(decisions.size()) + " decisions for " +
                          std::to_string(ground_truth.size()) + " labels");
  if (decisions.empty()) throw ValidationError("evaluate needs at least one sample");
  if (shared_classes.empty()) throw ValidationError("evaluate needs at least one shared class");
  if (num_classes < 2) throw ValidationError("evaluate needs at least 2 known classes");

  // Per shared class: (correct, total). Unweighted averaging makes acc_kn
  // immune to class-size imbalance.
  std::vector<std::size_t> correct(shared_classes.size(), 0);
  std::vector<std::size_t> total(shared_classes.size(), 0);
  std::size_t known_correct = 0;
  std::size_t known_total = 0;
  std::size_t unknown_caught = 0;
  std::size_t unknown_total = 0;
  std::vector<double> scores;
  std::vector<bool> is_unknown;
  scores.reserve(decisions.size());
  is_unknown.reserve(decisions.size());

  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const classifier::Decision& d = decisions[i];
    const int truth = ground_truth[i];
    scores.push_back(d.paradox_score);
    const auto it = std::find(shared_classes.begin(), shared_classes.end(), truth);
    if (it != shared_classes.end()) {
      const std::size_t c = static_cast<std::size_t>(it - shared_classes.begin());
      ++total[c];
      ++known_total;
      // A shared-class sample rejected as unknown is simply not a correct
      // class prediction; it counts against its class.
      if (!d.is_unknown(static_cast<std::size_t>(num_classes)) && d.predicted_class == truth) {
        ++correct[c];
        ++known_correct;
      }
      is_unknown.push_back(false);
    } else {
      ++unknown_total;
      if (d.is_unknown(static_cast<std::size_t>(num_classes))) ++unknown_caught;
      is_unknown.push_back(true);
    }
  }

  MetricsReport report;
  double acc_sum = 0.0;
  std::size_t populated = 0;
  for (std::size_t c = 0; c < shared_classes.size(); ++c) {
    if (total[c] == 0) {
      std::fprintf(stderr, "warning: shared class %d has no evaluation samples, excluded\n",
                   shared_classes[c]);
      continue;
    }
    acc_sum += 100.0 * static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++populated;
  }
  report.acc_kn = populated > 0 ? acc_sum / static_cast<double>(populated) : kNaN;
  report.acc = known_total > 0
                   ? 100.0 * static_cast<double>(known_correct) / static_cast<double>(known_total)
                   : kNaN;
  report.acc_unk = unknown_total > 0 ? 100.0 * static_cast<double>(unknown_caught) /
                                           static_cast<double>(unknown_total)
                                     : kNaN;
  report.hos = (std::isnan(report.acc_kn) || std::isnan(report.acc_unk))
                   ? kNaN
                   : hos(report.acc_kn, report.acc_unk);
  report.auc = (known_total > 0 && unknown_total > 0) ? auroc(scores, is_unknown) : kNaN;
  return report;
}

double auroc(std::span<const double> scores, const std::vector<bool>& is_unknown) {
  if (scores.size() != is_unknown.size())
    throw ValidationError("auroc got " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(is_unknown.size()) + " flags");
  const std::size_t n = scores.size();
  std::size_t n_unknown = 0;
  for (bool u : is_unknown) n_unknown += u ? 1 : 0;
  const std::size_t n_known = n - n_unknown;
  if (n_unknown == 0 || n_known == 0)
    throw ValidationError("auroc needs both known and unknown samples");
  for (double s : scores)
    if (!std::isfinite(s)) throw ValidationError("auroc scores must be finite");

  // Rank-sum form of the Mann-Whitney statistic; tied scores share their
  // average rank, which is exactly the "ties count 1/2" pair convention.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double unknown_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (is_unknown[order[k]]) unknown_rank_sum += avg_rank;
    i = j;
  }
  const double n_u = static_cast<double>(n_unknown);
  const double n_k = static_cast<double>(n_known);
  return (unknown_rank_sum - n_u * (n_u + 1.0) / 2.0) / (n_u * n_k);
}

void write_metrics_csv(const std::vector<MetricsReport>& history, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open metrics file for writing: " + path);
  std::fprintf(f, "epoch,hos,acc_kn,acc_unk,acc,auc\n");
  for (std::size_t e = 0; e < history.size(); ++e) {
    const MetricsReport& r = history[e];
    std::fprintf(f, "%zu,%.1f,%.1f,%.1f,%.1f,%.3f\n", e + 1, r.hos, r.acc_kn, r.acc_unk, r.acc,
                 r.auc);
  }
  std::fclose(f);
}

void write_metrics_json(const std::vector<MetricsReport>& history, const std::string& path) {
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t e = 0; e < history.size(); ++e) {
    const MetricsReport& r = history[e];
    records.push_back({{"epoch", e + 1},
                       {"hos", r.hos},
                       {"acc_kn", r.acc_kn},
                       {"acc_unk", r.acc_unk},
                       {"acc", r.acc},
                       {"auc", r.auc}});
  }
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open metrics file for writing: " + path);
  const std::string text = records.dump(2);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fprintf(f, "\n");
  std::fclose(f);
}

}  // namespace uniadapt::metrics
