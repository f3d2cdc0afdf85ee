#ifndef UNIADAPT_TRAINER_HPP
#define UNIADAPT_TRAINER_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uniadapt/classifier.hpp"
#include "uniadapt/data_synth.hpp"
#include "uniadapt/losses.hpp"
#include "uniadapt/metrics.hpp"
#include "uniadapt/nn.hpp"

namespace uniadapt::train {

struct ModelConfig {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t feature_dim = 16;
};

struct OptimizerConfig {
  double momentum = 0.9;
  double weight_decay = 0.0005;  // applied uniformly to weights and biases
  double lr_head = 0.01;         // the freshly initialized classification head
  double lr_extractor = 0.001;   // the (warm-startable) feature extractor
  double schedule_a = 10.0;      // inverse schedule: base * (1 + a*t/total)^(-b)
  double schedule_b = 0.75;
};

struct TrainConfig {
  // Per domain; clamped to the domain size. Small batches matter at synthetic
  // scale: the negative pair neurons only receive hardest-negative updates, so
  // they need many optimization steps per epoch to calibrate against the
  // cross-entropy-driven positive neurons.
  std::size_t batch_size = 9;
  std::size_t epochs = 30;
  losses::LossWeights weights;
  double tau = 0.05;  // memory-bank similarity temperature
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  // Ablation switches. A disabled loss (or one whose weight is 0) is skipped
  // entirely: its log column is identically 0 and it contributes no
  // gradient, so "disable all three" and "all weights 0" run identically.
  bool disable_esl = false;
  bool disable_sfc = false;
  bool disable_tova = false;
  std::string init_checkpoint;  // optional warm start for the extractor+head
  bool quiet = false;           // suppress per-epoch progress on stderr
};

// SGD with momentum and uniform weight decay under the inverse learning-rate
// schedule; the head and extractor form separate rate groups.
struct OptimizerState {
  nn::GradientBundle velocity;
  OptimizerConfig config;
  std::size_t t = 0;      // update steps taken so far
  std::size_t total = 0;  // planned total steps (epochs * iterations/epoch)
};

// eta(t) = base * (1 + a*t/total)^(-b); monotone non-increasing in t.
double lr_at(std::size_t t, std::size_t total, double base, double a = 10.0, double b = 0.75);

// v <- mu*v + (g + lambda*theta); theta <- theta - eta*v, with eta taken
// from the schedule at the current step counter (which advances by one).
void step(nn::FeatureExtractorParams& params, nn::ClassifierHeadParams& head,
          const nn::GradientBundle& grads, OptimizerState& opt);

// Shuffled cycling sampler: reshuffles at every epoch boundary and whenever
// the pool is exhausted mid-batch. Batches never repeat an index internally,
// which the memory-bank row updates rely on.
class EpochSampler {
 public:
  EpochSampler(std::size_t population, std::uint64_t seed);

  void start_epoch();
  std::vector<int> next_batch(std::size_t batch_size);

 private:
  void reshuffle();

  std::vector<int> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 engine_;
};

struct TrainResult {
  nn::FeatureExtractorParams extractor;
  nn::ClassifierHeadParams head;
  std::vector<metrics::MetricsReport> history;  // one record per epoch
  std::vector<losses::LossReport> loss_log;     // one record per iteration
};

// Full training loop. Each epoch re-initializes the memory bank from the
// current features of every target sample, then runs
// T = ceil(max(N_s, N_t) / B) iterations of: sample one batch per domain,
// forward features, replace the target batch's bank rows, compute the bank
// similarity distributions, form probability bundles, assemble the source
// (classification + one-vs-all) and target (margin-gated entropy,
// clustering, one-vs-all entropy) losses, and take one optimizer step.
// K is inferred from the source labels; target labels are read only by the
// per-epoch evaluation, never by the losses. Deterministic given the seed.
// Throws NumericError if any loss or model output turns non-finite.
TrainResult train(const data::LabeledDataset& source, const data::LabeledDataset& target,
                  const ModelConfig& model, const TrainConfig& config);

// Forward + decision rule for a whole dataset; the evaluation entry point.
std::vector<classifier::Decision> decide_dataset(const nn::FeatureExtractorParams& extractor,
                                                 const nn::ClassifierHeadParams& head,
                                                 const Matrix& features);

// Classes present in both label vectors, ascending. What the per-epoch
// evaluation treats as the shared label set.
std::vector<int> shared_label_set(const std::vector<int>& source_labels,
                                  const std::vector<int>& target_labels);

}  // namespace uniadapt::train

#endif
