#ifndef UNIADAPT_LOSSES_HPP
#define UNIADAPT_LOSSES_HPP

#include <span>
#include <string>
#include <vector>

#include "uniadapt/classifier.hpp"
#include "uniadapt/matrix.hpp"

namespace uniadapt::losses {

struct LossWeights {
  double alpha = 0.05;  // clustering term
  double beta = 0.1;    // target one-vs-all entropy term
  double gamma = 0.05;  // margin-gated multi-class entropy term
  double margin = 0.4;
};

// Unweighted component values (nats) plus the weighted total.
struct LossReport {
  double ce = 0.0;
  double sova = 0.0;
  double esl = 0.0;
  double sfc = 0.0;
  double tova = 0.0;
  double total = 0.0;
};

// Probabilities are clamped to [1e-12, 1] before every log; 0*log(0) is 0.
inline constexpr double kProbFloor = 1e-12;

// Mean over the batch of -log p_mc[label]. Labels must lie in [0, K).
double ce(const Matrix& p_mc, std::span<const int> labels);

// Mean over the batch of -log p_pos[label] + max_{j != label} log p_pos[j]:
// pushes the labeled predictor up and the hardest negative predictor down.
// Requires K >= 2.
double sova(const classifier::BundleBatch& bundles, std::span<const int> labels);

// Margin-gated entropy of the multi-class distribution: +H for verified
// samples, -H for paradoxical ones, 0 inside the band. Mean over the batch.
double esl(const classifier::BundleBatch& bundles, double margin);

// Mean row entropy of neighbor-similarity distributions. Each row must sum
// to 1 within 1e-6 (the self column is zero).
double sfc(const Matrix& similarity_rows);

// Mean over the batch of the summed binary entropies of the K pairs.
double tova(const classifier::BundleBatch& bundles);

// total = (ce + sova) + alpha*sfc + beta*tova + gamma*esl.
LossReport total(double ce, double sova, double esl, double sfc, double tova,
                 const LossWeights& weights);

// Gradient producers: each accumulates coeff * dLoss/dlogits into dlogits
// (B x 2K). They share the batch-mean convention of the value functions.
void ce_grad(const classifier::BundleBatch& bundles, std::span<const int> labels, double coeff,
             Matrix& dlogits);
void sova_grad(const classifier::BundleBatch& bundles, std::span<const int> labels, double coeff,
               Matrix& dlogits);
// Branch selection is a constant w.r.t. the parameters: samples in the skip
// band receive exactly zero gradient.
void esl_grad(const classifier::BundleBatch& bundles, double margin, double coeff,
              Matrix& dlogits);
void tova_grad(const classifier::BundleBatch& bundles, const Matrix& logits, double coeff,
               Matrix& dlogits);

// Clustering-loss gradient w.r.t. the query features (bank rows are
// snapshots and receive none). Accumulates into dfeatures (B x d).
void sfc_grad(const Matrix& similarity_rows, const Matrix& bank_rows, double tau, double coeff,
              Matrix& dfeatures);

// CSV loss log, one row per iteration (docs/formats.md).
class LossLogWriter {
 public:
  explicit LossLogWriter(const std::string& path);
  ~LossLogWriter();
  LossLogWriter(const LossLogWriter&) = delete;
  LossLogWriter& operator=(const LossLogWriter&) = delete;

  void append(std::size_t iteration, const LossReport& report);

 private:
  std::FILE* file_;
};

}  // namespace uniadapt::losses

#endif
