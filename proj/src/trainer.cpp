#include "uniadapt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <numeric>
#include <set>

#include "uniadapt/common.hpp"
#include "uniadapt/memory_bank.hpp"
#include "uniadapt/rng.hpp"

namespace uniadapt::train {

namespace {

// Logits computed from model parameters can only turn non-finite when the
// optimization itself has diverged, so that is a numeric failure here even
// though hand-built non-finite logits are rejected as invalid input.
void check_finite_logits(const Matrix& logits, const std::string& where) {
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    for (double v : logits.row(b)) {
      if (!std::isfinite(v))
        throw NumericError("classifier logits turned non-finite " + where);
    }
  }
}

void check_finite_report(const losses::LossReport& report, std::size_t iteration) {
  if (std::isfinite(report.total)) return;
  throw NumericError("loss turned non-finite at iteration " + std::to_string(iteration) +
                     " (total = " + std::to_string(report.total) + ")");
}

Matrix gather_rows(const Matrix& source, const std::vector<int>& indices) {
  Matrix out(indices.size(), source.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto row = source.row(static_cast<std::size_t>(indices[i]));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& indices) {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out[i] = labels[static_cast<std::size_t>(indices[i])];
  return out;
}

std::size_t infer_num_classes(const std::vector<int>& source_labels) {
  int max_label = -1;
  for (int label : source_labels) {
    if (label < 0) throw ValidationError("source labels must be non-negative");
    max_label = std::max(max_label, label);
  }
  const std::size_t k = static_cast<std::size_t>(max_label + 1);
  if (k < 2) throw ValidationError("training needs at least 2 source classes");
  return k;
}

void apply_decay_and_momentum(Matrix& velocity, const Matrix& grad, const Matrix& theta, double mu,
                              double lambda) {
  double* v = velocity.data();
  const double* g = grad.data();
  const double* p = theta.data();
  const std::size_t n = velocity.rows() * velocity.cols();
  for (std::size_t i = 0; i < n; ++i) v[i] = mu * v[i] + (g[i] + lambda * p[i]);
}

void apply_decay_and_momentum(std::vector<double>& velocity, const std::vector<double>& grad,
                              const std::vector<double>& theta, double mu, double lambda) {
  for (std::size_t i = 0; i < velocity.size(); ++i)
    velocity[i] = mu * velocity[i] + (grad[i] + lambda * theta[i]);
}

void apply_update(Matrix& theta, const Matrix& velocity, double eta) {
  double* p = theta.data();
  const double* v = velocity.data();
  const std::size_t n = theta.rows() * theta.cols();
  for (std::size_t i = 0; i < n; ++i) p[i] -= eta * v[i];
}

void apply_update(std::vector<double>& theta, const std::vector<double>& velocity, double eta) {
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * velocity[i];
}

void check_shapes(const Matrix& grad_w, const std::vector<double>& grad_b, const Matrix& w,
                  const std::vector<double>& b) {
  if (!grad_w.same_shape(w) || grad_b.size() != b.size())
    throw ValidationError("gradient shape does not match parameters");
}

}  // namespace

double lr_at(std::size_t t, std::size_t total, double base, double a, double b) {
  if (total == 0) throw ValidationError("learning-rate schedule needs a positive total");
  if (t > total) throw ValidationError("schedule step exceeds the planned total");
  const double progress = static_cast<double>(t) / static_cast<double>(total);
  return base * std::pow(1.0 + a * progress, -b);
}

void step(nn::FeatureExtractorParams& params, nn::ClassifierHeadParams& head,
          const nn::GradientBundle& grads, OptimizerState& opt) {
  if (grads.extractor.size() != params.layers.size())
    throw ValidationError("gradient layer count does not match parameters");
  const OptimizerConfig& c = opt.config;
  const double lr_ext = lr_at(opt.t, opt.total, c.lr_extractor, c.schedule_a, c.schedule_b);
  const double lr_head = lr_at(opt.t, opt.total, c.lr_head, c.schedule_a, c.schedule_b);

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    check_shapes(grads.extractor[l].w, grads.extractor[l].b, params.layers[l].w,
                 params.layers[l].b);
    nn::DenseLayer& v = opt.velocity.extractor[l];
    apply_decay_and_momentum(v.w, grads.extractor[l].w, params.layers[l].w, c.momentum,
                             c.weight_decay);
    apply_decay_and_momentum(v.b, grads.extractor[l].b, params.layers[l].b, c.momentum,
                             c.weight_decay);
    apply_update(params.layers[l].w, v.w, lr_ext);
    apply_update(params.layers[l].b, v.b, lr_ext);
  }
  check_shapes(grads.head.w, grads.head.b, head.w, head.b);
  apply_decay_and_momentum(opt.velocity.head.w, grads.head.w, head.w, c.momentum, c.weight_decay);
  apply_decay_and_momentum(opt.velocity.head.b, grads.head.b, head.b, c.momentum, c.weight_decay);
  apply_update(head.w, opt.velocity.head.w, lr_head);
  apply_update(head.b, opt.velocity.head.b, lr_head);
  ++opt.t;
}

EpochSampler::EpochSampler(std::size_t population, std::uint64_t seed)
    : order_(population), engine_(seed) {
  if (population == 0) throw ValidationError("sampler needs a non-empty population");
  std::iota(order_.begin(), order_.end(), 0);
  pos_ = order_.size();  // forces a shuffle on first use
}

void EpochSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), engine_);
  pos_ = 0;
}

void EpochSampler::start_epoch() { reshuffle(); }

std::vector<int> EpochSampler::next_batch(std::size_t batch_size) {
  const std::size_t effective = std::min(batch_size, order_.size());
  std::vector<int> batch;
  batch.reserve(effective);
  while (batch.size() < effective) {
    if (pos_ == order_.size()) reshuffle();
    const int candidate = order_[pos_++];
    // A batch straddling a reshuffle boundary may re-meet an index it
    // already holds; those draws are dropped (the sample is in the batch
    // either way), keeping bank row updates collision-free.
    if (std::find(batch.begin(), batch.end(), candidate) == batch.end())
      batch.push_back(candidate);
  }
  return batch;
}

std::vector<int> shared_label_set(const std::vector<int>& source_labels,
                                  const std::vector<int>& target_labels) {
  const std::set<int> source_set(source_labels.begin(), source_labels.end());
  const std::set<int> target_set(target_labels.begin(), target_labels.end());
  std::vector<int> shared;
  std::set_intersection(source_set.begin(), source_set.end(), target_set.begin(),
                        target_set.end(), std::back_inserter(shared));
  return shared;
}

std::vector<classifier::Decision> decide_dataset(const nn::FeatureExtractorParams& extractor,
                                                 const nn::ClassifierHeadParams& head,
                                                 const Matrix& features) {
  const nn::ForwardCache cache = nn::forward(extractor, head, features);
  check_finite_logits(cache.logits, "during evaluation");
  return classifier::decide_batch(classifier::bundles_from_logits(cache.logits));
}

TrainResult train(const data::LabeledDataset& source, const data::LabeledDataset& target,
                  const ModelConfig& model, const TrainConfig& config) {
  if (source.size() == 0 || target.size() == 0)
    throw ValidationError("training needs non-empty source and target datasets");
  if (source.dim() != target.dim())
    throw ValidationError("source and target feature dimensions differ");
  if (config.batch_size < 2) throw ValidationError("batch size must be at least 2");
  if (config.epochs < 1) throw ValidationError("epoch count must be at least 1");
  if (!(config.tau > 0.0)) throw ValidationError("temperature must be positive");
  if (model.feature_dim < 1 || model.hidden.empty())
    throw ValidationError("model needs at least one hidden layer and a positive feature size");

  const std::size_t num_classes = infer_num_classes(source.labels);
  const bool use_esl = !config.disable_esl && config.weights.gamma != 0.0;
  const bool use_sfc = !config.disable_sfc && config.weights.alpha != 0.0;
  const bool use_tova = !config.disable_tova && config.weights.beta != 0.0;
  if (use_sfc && target.size() < 2)
    throw ValidationError("the clustering loss needs at least 2 target samples");

  TrainResult result;
  if (config.init_checkpoint.empty()) {
    const std::uint64_t init_seed = derive_seed(config.seed, RngStream::param_init);
    result.extractor =
        nn::init_extractor(source.dim(), model.hidden, model.feature_dim, init_seed);
    result.head = nn::init_head(num_classes, model.feature_dim, splitmix64(init_seed));
  } else {
    nn::load_checkpoint(config.init_checkpoint, result.extractor, result.head);
    if (result.extractor.input_dim() != source.dim())
      throw ValidationError("checkpoint input dimension does not match the datasets");
    if (result.head.num_classes() != num_classes)
      throw ValidationError("checkpoint class count does not match the source labels");
  }

  const std::size_t iters_per_epoch =
      (std::max(source.size(), target.size()) + config.batch_size - 1) / config.batch_size;
  OptimizerState opt{nn::zeros_like(result.extractor, result.head), config.optimizer, 0,
                     config.epochs * iters_per_epoch};

  EpochSampler source_sampler(source.size(), derive_seed(config.seed, RngStream::shuffle_source));
  EpochSampler target_sampler(target.size(), derive_seed(config.seed, RngStream::shuffle_target));
  bank::MemoryBank memory(target.size() >= 2 ? target.size() : 2, model.feature_dim, config.tau);
  const bool bank_usable = target.size() >= 2;

  const std::vector<int> shared = shared_label_set(source.labels, target.labels);
  std::size_t iteration = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (bank_usable)
      memory.initialize(nn::extract_features(result.extractor, target.features));
    source_sampler.start_epoch();
    target_sampler.start_epoch();

    for (std::size_t it = 0; it < iters_per_epoch; ++it, ++iteration) {
      const std::vector<int> s_idx = source_sampler.next_batch(config.batch_size);
      const std::vector<int> t_idx = target_sampler.next_batch(config.batch_size);
      const Matrix s_batch = gather_rows(source.features, s_idx);
      const Matrix t_batch = gather_rows(target.features, t_idx);
      const std::vector<int> s_labels = gather_labels(source.labels, s_idx);

      nn::ForwardCache s_cache = nn::forward(result.extractor, result.head, s_batch);
      nn::ForwardCache t_cache = nn::forward(result.extractor, result.head, t_batch);
      check_finite_logits(s_cache.logits, "at iteration " + std::to_string(iteration));
      check_finite_logits(t_cache.logits, "at iteration " + std::to_string(iteration));

      // The bank sees this batch's features before the similarity pass, so
      // each query competes against the freshest view of every other sample.
      Matrix similarities;
      if (bank_usable) {
        memory.update_batch(t_idx, t_cache.features);
        if (use_sfc) similarities = memory.similarity_rows(t_idx, t_cache.features);
      }

      const classifier::BundleBatch s_bundles = classifier::bundles_from_logits(s_cache.logits);
      const classifier::BundleBatch t_bundles = classifier::bundles_from_logits(t_cache.logits);

      losses::LossReport report;
      report.ce = losses::ce(s_bundles.p_mc, s_labels);
      report.sova = losses::sova(s_bundles, s_labels);
      if (use_esl) report.esl = losses::esl(t_bundles, config.weights.margin);
      if (use_sfc) report.sfc = losses::sfc(similarities);
      if (use_tova) report.tova = losses::tova(t_bundles);
      report = losses::total(report.ce, report.sova, report.esl, report.sfc, report.tova,
                             config.weights);
      check_finite_report(report, iteration);
      result.loss_log.push_back(report);

      Matrix s_dlogits(s_cache.logits.rows(), s_cache.logits.cols());
      losses::ce_grad(s_bundles, s_labels, 1.0, s_dlogits);
      losses::sova_grad(s_bundles, s_labels, 1.0, s_dlogits);
      nn::GradientBundle grads =
          nn::backward(result.extractor, result.head, s_cache, s_dlogits, Matrix());

      Matrix t_dlogits(t_cache.logits.rows(), t_cache.logits.cols());
      Matrix t_dfeatures;
      if (use_esl)
        losses::esl_grad(t_bundles, config.weights.margin, config.weights.gamma, t_dlogits);
      if (use_tova) losses::tova_grad(t_bundles, t_cache.logits, config.weights.beta, t_dlogits);
      if (use_sfc) {
        t_dfeatures = Matrix(t_cache.features.rows(), t_cache.features.cols());
        losses::sfc_grad(similarities, memory.rows(), config.tau, config.weights.alpha,
                         t_dfeatures);
      }
      grads.add(nn::backward(result.extractor, result.head, t_cache, t_dlogits, t_dfeatures));

      step(result.extractor, result.head, grads, opt);
    }

    const std::vector<classifier::Decision> decisions =
        decide_dataset(result.extractor, result.head, target.features);
    result.history.push_back(metrics::evaluate(decisions, target.labels, shared,
                                               static_cast<int>(num_classes)));
    if (!config.quiet) {
      const metrics::MetricsReport& r = result.history.back();
      std::fprintf(stderr,
                   "epoch %zu/%zu  hos %.1f  acc_kn %.1f  acc_unk %.1f  acc %.1f  auc %.3f\n",
                   epoch + 1, config.epochs, r.hos, r.acc_kn, r.acc_unk, r.acc, r.auc);
    }
  }
  return result;
}

}  // namespace uniadapt::train
