#ifndef UNIADAPT_CLASSIFIER_HPP
#define UNIADAPT_CLASSIFIER_HPP

#include <span>
#include <string>
#include <vector>

#include "uniadapt/matrix.hpp"

namespace uniadapt::classifier {

// Per-sample probabilities: a K-way multi-class distribution plus K binary
// one-vs-all pairs (positive = "this class", negative = "anything else,
// including classes no source sample ever had").
struct ProbabilityBundle {
  std::vector<double> p_mc;   // K
  std::vector<double> p_pos;  // K
  std::vector<double> p_neg;  // K, p_pos[k] + p_neg[k] == 1

  std::size_t num_classes() const noexcept { return p_mc.size(); }
};

// Batch layout of the same data, as produced from a B x 2K logit matrix.
struct BundleBatch {
  Matrix p_mc;   // B x K
  Matrix p_pos;  // B x K
  Matrix p_neg;  // B x K

  std::size_t size() const noexcept { return p_mc.rows(); }
  std::size_t num_classes() const noexcept { return p_mc.cols(); }
  ProbabilityBundle sample(std::size_t i) const;
};

// predicted_class == num_classes encodes "unknown" in every output.
struct Decision {
  int predicted_class = 0;
  int mc_argmax = 0;
  double paradox_score = 0.0;  // p_neg of the argmax class

  bool is_unknown(std::size_t num_classes) const noexcept {
    return predicted_class == static_cast<int>(num_classes);
  }
};

enum class EslBranch { sharpen, flatten, skip };

// Softmax over the first K logits; per-class pair softmax over
// (logit_k, logit_{K+k}). Throws ValidationError on odd-length or
// non-finite input.
ProbabilityBundle bundle_from_logits(std::span<const double> logits);
BundleBatch bundles_from_logits(const Matrix& logits);

// Argmax of the multi-class head (ties to the lowest index), verified by the
// matching one-vs-all pair: agreement keeps the class, paradox rejects the
// sample as unknown. The boundary p_pos == p_neg counts as agreement.
Decision decide(const ProbabilityBundle& bundle);
std::vector<Decision> decide_batch(const BundleBatch& bundles);

// Margin-gated branch for the target entropy loss: sharpen confidently
// verified samples, flatten confidently paradoxical ones, skip the closed
// band |p_pos - p_neg| <= m.
EslBranch esl_branch(const ProbabilityBundle& bundle, double margin);
EslBranch esl_branch(double p_pos, double p_neg, double margin);

// Prediction dump: one line per target sample, documented in docs/formats.md.
void write_predictions(const std::vector<Decision>& decisions, const std::string& path);

}  // namespace uniadapt::classifier

#endif
