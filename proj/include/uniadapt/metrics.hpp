#ifndef UNIADAPT_METRICS_HPP
#define UNIADAPT_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include "uniadapt/classifier.hpp"

namespace uniadapt::metrics {

// Open-set evaluation summary. All fields except auc are percentages in
// [0, 100]; auc is a fraction in [0, 1]. A field whose denominator
// population is empty (e.g. acc_unk when the evaluation set has no
// target-private samples) is NaN.
struct MetricsReport {
  double acc_kn = 0.0;   // unweighted mean of per-class accuracies, shared classes
  double acc_unk = 0.0;  // fraction of target-private samples rejected as unknown
  double hos = 0.0;      // harmonic mean of acc_kn and acc_unk
  double acc = 0.0;      // instance accuracy over shared-class samples
  double auc = 0.0;      // unknown-detection AUROC of the paradox score
};

// Harmonic mean of two percentages; defined as 0 whenever either input is 0
// (including 0/0). Inputs outside [0, 100] are rejected.
double hos(double acc_kn, double acc_unk);

// Scores one decision per target sample against ground-truth labels. A
// sample is known iff its label is in shared_classes; a decision rejects iff
// predicted_class == num_classes. Shared classes with no samples are
// excluded from acc_kn with a warning on standard error. auc is computed
// from the paradox scores when both known and unknown samples are present,
// NaN otherwise.
MetricsReport evaluate(std::span<const classifier::Decision> decisions,
                       std::span<const int> ground_truth, std::span<const int> shared_classes,
                       int num_classes);

// Mann-Whitney AUROC: probability that a random unknown sample scores
// strictly above a random known one, ties counted 1/2. Requires both
// classes.
double auroc(std::span<const double> scores, const std::vector<bool>& is_unknown);

// One header line plus one row per record, percentages to one decimal place
// and auc to three, matching the log/table convention.
void write_metrics_csv(const std::vector<MetricsReport>& history, const std::string& path);

// Same records at full precision for machine consumption.
void write_metrics_json(const std::vector<MetricsReport>& history, const std::string& path);

}  // namespace uniadapt::metrics

#endif
