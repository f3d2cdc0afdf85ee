#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "uniadapt/classifier.hpp"
#include "uniadapt/common.hpp"
#include "uniadapt/data_synth.hpp"
#include "uniadapt/losses.hpp"
#include "uniadapt/memory_bank.hpp"
#include "uniadapt/nn.hpp"
#include "uniadapt/rng.hpp"
#include "uniadapt/trainer.hpp"

using uniadapt::Matrix;
using uniadapt::NumericError;
using uniadapt::ValidationError;
namespace data = uniadapt::data;
namespace nn = uniadapt::nn;
namespace losses = uniadapt::losses;
namespace train = uniadapt::train;

namespace {

std::pair<data::LabeledDataset, data::LabeledDataset> tiny_scenario(std::uint64_t seed = 3,
                                                                    std::size_t per_class = 6) {
  data::LabelSplit split{2, 1, 1};
  data::ShiftSpec spec;
  spec.means = data::class_means(split.num_total_classes(), 4);
  spec.cov_scale = 0.5;
  spec.samples_per_class = per_class;
  spec.rotation_rad = 0.3;
  spec.seed = seed;
  return data::generate(split, spec);
}

bool params_equal(const nn::FeatureExtractorParams& a, const nn::FeatureExtractorParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (!(a.layers[l].w == b.layers[l].w) || a.layers[l].b != b.layers[l].b) return false;
  return true;
}

nn::GradientBundle constant_grads(const nn::FeatureExtractorParams& ext,
                                  const nn::ClassifierHeadParams& head, double value) {
  nn::GradientBundle g = nn::zeros_like(ext, head);
  for (auto& layer : g.extractor) {
    layer.w.fill(value);
    std::fill(layer.b.begin(), layer.b.end(), value);
  }
  g.head.w.fill(value);
  std::fill(g.head.b.begin(), g.head.b.end(), value);
  return g;
}

}  // namespace

TEST_CASE("the schedule starts at the base rate and ends at base * 11^-0.75") {
  CHECK(train::lr_at(0, 100, 0.01) == 0.01);
  CHECK(train::lr_at(100, 100, 0.01) ==
        doctest::Approx(0.01 * std::pow(11.0, -0.75)).epsilon(1e-12));
  CHECK(train::lr_at(50, 100, 0.01) ==
        doctest::Approx(0.01 * std::pow(6.0, -0.75)).epsilon(1e-12));
}

TEST_CASE("the schedule is monotone non-increasing") {
  double prev = train::lr_at(0, 200, 0.01);
  for (std::size_t t = 1; t <= 200; ++t) {
    const double cur = train::lr_at(t, 200, 0.01);
    CHECK(cur <= prev + 1e-18);
    prev = cur;
  }
}

TEST_CASE("the schedule rejects a zero total and steps past the end") {
  CHECK_THROWS_AS(train::lr_at(0, 0, 0.01), ValidationError);
  CHECK_THROWS_AS(train::lr_at(11, 10, 0.01), ValidationError);
}

TEST_CASE("without momentum or decay a step is plain gradient descent") {
  auto ext = nn::init_extractor(1, {1}, 1, 5);
  auto head = nn::init_head(2, 1, 6);
  const auto ext0 = ext;
  const auto head0 = head;

  train::OptimizerConfig oc;
  oc.momentum = 0.0;
  oc.weight_decay = 0.0;
  oc.lr_head = 0.01;
  oc.lr_extractor = 0.001;
  oc.schedule_a = 0.0;  // flat schedule: eta == base
  train::OptimizerState opt{nn::zeros_like(ext, head), oc, 0, 10};

  const nn::GradientBundle g = constant_grads(ext, head, 2.0);
  train::step(ext, head, g, opt);
  CHECK(opt.t == 1);

  for (std::size_t l = 0; l < ext.layers.size(); ++l) {
    for (std::size_t r = 0; r < ext.layers[l].w.rows(); ++r)
      for (std::size_t c = 0; c < ext.layers[l].w.cols(); ++c)
        CHECK(ext.layers[l].w(r, c) ==
              doctest::Approx(ext0.layers[l].w(r, c) - 0.001 * 2.0).epsilon(1e-15));
    for (std::size_t i = 0; i < ext.layers[l].b.size(); ++i)
      CHECK(ext.layers[l].b[i] == doctest::Approx(ext0.layers[l].b[i] - 0.001 * 2.0));
  }
  for (std::size_t r = 0; r < head.w.rows(); ++r)
    for (std::size_t c = 0; c < head.w.cols(); ++c)
      CHECK(head.w(r, c) == doctest::Approx(head0.w(r, c) - 0.01 * 2.0).epsilon(1e-15));
}

TEST_CASE("velocity decays geometrically once the gradient stops") {
  auto ext = nn::init_extractor(1, {1}, 1, 7);
  auto head = nn::init_head(2, 1, 8);

  train::OptimizerConfig oc;
  oc.momentum = 0.9;
  oc.weight_decay = 0.0;
  oc.lr_head = 0.01;
  oc.lr_extractor = 0.01;
  oc.schedule_a = 0.0;
  train::OptimizerState opt{nn::zeros_like(ext, head), oc, 0, 10};

  const double w0 = head.w(0, 0);
  train::step(ext, head, constant_grads(ext, head, 1.0), opt);
  const double w1 = head.w(0, 0);
  train::step(ext, head, constant_grads(ext, head, 0.0), opt);
  const double w2 = head.w(0, 0);
  train::step(ext, head, constant_grads(ext, head, 0.0), opt);
  const double w3 = head.w(0, 0);

  CHECK((w2 - w1) == doctest::Approx(0.9 * (w1 - w0)).epsilon(1e-12));
  CHECK((w3 - w2) == doctest::Approx(0.9 * (w2 - w1)).epsilon(1e-12));
}

TEST_CASE("three steps match the hand-iterated momentum recursion") {
  auto ext = nn::init_extractor(2, {3}, 2, 9);
  auto head = nn::init_head(2, 2, 10);

  train::OptimizerConfig oc;  // defaults: mu 0.9, lambda 5e-4, inverse schedule
  train::OptimizerState opt{nn::zeros_like(ext, head), oc, 0, 3};

  // Snapshot all parameters, split by rate group.
  auto simulate = [&](std::vector<double> theta, double base) {
    std::vector<double> v(theta.size(), 0.0);
    for (std::size_t t = 0; t < 3; ++t) {
      const double eta = train::lr_at(t, 3, base, oc.schedule_a, oc.schedule_b);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        v[i] = oc.momentum * v[i] + (0.25 + oc.weight_decay * theta[i]);
        theta[i] -= eta * v[i];
      }
    }
    return theta;
  };

  nn::ParamRefs refs = nn::flatten(ext, head);
  std::vector<double> ext_theta, head_theta;
  for (double* p : refs.extractor) ext_theta.push_back(*p);
  for (double* p : refs.head) head_theta.push_back(*p);
  const std::vector<double> ext_expect = simulate(ext_theta, oc.lr_extractor);
  const std::vector<double> head_expect = simulate(head_theta, oc.lr_head);

  for (int i = 0; i < 3; ++i) train::step(ext, head, constant_grads(ext, head, 0.25), opt);

  for (std::size_t i = 0; i < refs.extractor.size(); ++i)
    CHECK(*refs.extractor[i] == doctest::Approx(ext_expect[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < refs.head.size(); ++i)
    CHECK(*refs.head[i] == doctest::Approx(head_expect[i]).epsilon(1e-12));
}

TEST_CASE("a zero learning rate leaves the initialization untouched") {
  const auto [source, target] = tiny_scenario();
  train::ModelConfig model;
  model.hidden = {8};
  model.feature_dim = 4;
  train::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 11;
  cfg.quiet = true;
  cfg.optimizer.lr_head = 0.0;
  cfg.optimizer.lr_extractor = 0.0;

  const train::TrainResult result = train::train(source, target, model, cfg);

  const std::uint64_t init_seed = uniadapt::derive_seed(cfg.seed, uniadapt::RngStream::param_init);
  const auto fresh = nn::init_extractor(source.dim(), model.hidden, model.feature_dim, init_seed);
  const auto fresh_head = nn::init_head(3, model.feature_dim, uniadapt::splitmix64(init_seed));
  CHECK(params_equal(result.extractor, fresh));
  CHECK(result.head.w == fresh_head.w);
  CHECK(result.head.b == fresh_head.b);
}

TEST_CASE("training is bitwise reproducible for a fixed seed") {
  const auto [source, target] = tiny_scenario();
  train::ModelConfig model;
  model.hidden = {8};
  model.feature_dim = 4;
  train::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 5;
  cfg.seed = 21;
  cfg.quiet = true;

  const train::TrainResult a = train::train(source, target, model, cfg);
  const train::TrainResult b = train::train(source, target, model, cfg);
  CHECK(params_equal(a.extractor, b.extractor));
  CHECK(a.head.w == b.head.w);
  CHECK(a.head.b == b.head.b);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].hos == b.history[e].hos);
    CHECK(a.history[e].acc_kn == b.history[e].acc_kn);
    CHECK(a.history[e].acc_unk == b.history[e].acc_unk);
  }
  REQUIRE(a.loss_log.size() == b.loss_log.size());
  for (std::size_t i = 0; i < a.loss_log.size(); ++i)
    CHECK(a.loss_log[i].total == b.loss_log[i].total);

  cfg.seed = 22;
  const train::TrainResult c = train::train(source, target, model, cfg);
  CHECK_FALSE(params_equal(a.extractor, c.extractor));
}

TEST_CASE("zero auxiliary weights and hard-disabled losses run identically") {
  const auto [source, target] = tiny_scenario();
  train::ModelConfig model;
  model.hidden = {8};
  model.feature_dim = 4;
  train::TrainConfig zero_w;
  zero_w.epochs = 2;
  zero_w.batch_size = 5;
  zero_w.seed = 31;
  zero_w.quiet = true;
  zero_w.weights.alpha = 0.0;
  zero_w.weights.beta = 0.0;
  zero_w.weights.gamma = 0.0;

  train::TrainConfig disabled = zero_w;
  disabled.weights = losses::LossWeights{};  // defaults back on
  disabled.disable_esl = true;
  disabled.disable_sfc = true;
  disabled.disable_tova = true;

  const train::TrainResult a = train::train(source, target, model, zero_w);
  const train::TrainResult b = train::train(source, target, model, disabled);
  CHECK(params_equal(a.extractor, b.extractor));
  CHECK(a.head.w == b.head.w);

  // Skipped terms log identically zero columns.
  for (const losses::LossReport& r : b.loss_log) {
    CHECK(r.esl == 0.0);
    CHECK(r.sfc == 0.0);
    CHECK(r.tova == 0.0);
    CHECK(r.total == r.ce + r.sova);
  }
}

TEST_CASE("one small step on a fixed batch does not increase the composite loss") {
  const auto [source, target] = tiny_scenario(13, 5);
  auto ext = nn::init_extractor(source.dim(), {8}, 4, 101);
  auto head = nn::init_head(3, 4, 102);
  const losses::LossWeights w;
  const double tau = 0.05;

  std::vector<int> s_idx(source.size()), t_idx(target.size());
  std::iota(s_idx.begin(), s_idx.end(), 0);
  std::iota(t_idx.begin(), t_idx.end(), 0);

  uniadapt::bank::MemoryBank memory(target.size(), 4, tau);
  memory.initialize(nn::extract_features(ext, target.features));

  auto assemble = [&](losses::LossReport& out, nn::GradientBundle* grads) {
    const nn::ForwardCache s_cache = nn::forward(ext, head, source.features);
    const nn::ForwardCache t_cache = nn::forward(ext, head, target.features);
    const auto s_bundles = uniadapt::classifier::bundles_from_logits(s_cache.logits);
    const auto t_bundles = uniadapt::classifier::bundles_from_logits(t_cache.logits);
    const Matrix sims = memory.similarity_rows(t_idx, t_cache.features);

    const double ce = losses::ce(s_bundles.p_mc, source.labels);
    const double sova = losses::sova(s_bundles, source.labels);
    const double esl = losses::esl(t_bundles, w.margin);
    const double sfc = losses::sfc(sims);
    const double tova = losses::tova(t_bundles);
    out = losses::total(ce, sova, esl, sfc, tova, w);

    if (grads) {
      Matrix s_dl(s_cache.logits.rows(), s_cache.logits.cols());
      losses::ce_grad(s_bundles, source.labels, 1.0, s_dl);
      losses::sova_grad(s_bundles, source.labels, 1.0, s_dl);
      *grads = nn::backward(ext, head, s_cache, s_dl, Matrix());

      Matrix t_dl(t_cache.logits.rows(), t_cache.logits.cols());
      losses::esl_grad(t_bundles, w.margin, w.gamma, t_dl);
      losses::tova_grad(t_bundles, t_cache.logits, w.beta, t_dl);
      Matrix t_df(t_cache.features.rows(), t_cache.features.cols());
      losses::sfc_grad(sims, memory.rows(), tau, w.alpha, t_df);
      grads->add(nn::backward(ext, head, t_cache, t_dl, t_df));
    }
  };

  losses::LossReport before;
  nn::GradientBundle grads = nn::zeros_like(ext, head);
  assemble(before, &grads);

  const double eta = 1e-6;
  nn::ParamRefs refs = nn::flatten(ext, head);
  const std::vector<double> flat = nn::flatten_values(grads);
  REQUIRE(flat.size() == refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) *refs.at(i) -= eta * flat[i];

  losses::LossReport after;
  assemble(after, nullptr);
  CHECK(after.total <= before.total + 1e-12);
  CHECK(after.total < before.total);  // the gradient is not exactly zero here
}

TEST_CASE("every index appears in the epoch when the batches cover the population") {
  train::EpochSampler sampler(10, 77);
  sampler.start_epoch();
  std::set<int> seen;
  for (int b = 0; b < 4; ++b) {
    const std::vector<int> batch = sampler.next_batch(3);
    CHECK(batch.size() == 3);
    std::set<int> unique(batch.begin(), batch.end());
    CHECK(unique.size() == batch.size());  // no duplicates inside a batch
    seen.insert(batch.begin(), batch.end());
  }
  CHECK(seen.size() == 10);  // 12 draws cover all 10 at least once
}

TEST_CASE("batches clamp to the population size and stay duplicate-free") {
  train::EpochSampler sampler(3, 78);
  sampler.start_epoch();
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<int> batch = sampler.next_batch(36);
    CHECK(batch.size() == 3);
    std::set<int> unique(batch.begin(), batch.end());
    CHECK(unique.size() == 3);
    for (int i : batch) {
      CHECK(i >= 0);
      CHECK(i < 3);
    }
  }
}

TEST_CASE("shared_label_set intersects the observed label sets") {
  const std::vector<int> src = {0, 1, 2, 2, 3};
  const std::vector<int> tgt = {1, 3, 3, 7, 9};
  CHECK(train::shared_label_set(src, tgt) == std::vector<int>{1, 3});
  CHECK(train::shared_label_set({0, 0}, {1, 1}).empty());
}

TEST_CASE("training validates its contract") {
  const auto [source, target] = tiny_scenario();
  train::ModelConfig model;
  model.hidden = {8};
  model.feature_dim = 4;
  train::TrainConfig cfg;
  cfg.quiet = true;

  SUBCASE("single source class") {
    data::LabeledDataset bad = source;
    std::fill(bad.labels.begin(), bad.labels.end(), 0);
    CHECK_THROWS_AS(train::train(bad, target, model, cfg), ValidationError);
  }
  SUBCASE("empty datasets") {
    data::LabeledDataset empty;
    empty.features = Matrix(0, 4);
    CHECK_THROWS_AS(train::train(empty, target, model, cfg), ValidationError);
    CHECK_THROWS_AS(train::train(source, empty, model, cfg), ValidationError);
  }
  SUBCASE("dimension mismatch") {
    data::LabeledDataset bad = target;
    bad.features = Matrix(target.size(), 3, 0.5);
    CHECK_THROWS_AS(train::train(source, bad, model, cfg), ValidationError);
  }
  SUBCASE("bad batch size and epochs") {
    train::TrainConfig c2 = cfg;
    c2.batch_size = 1;
    CHECK_THROWS_AS(train::train(source, target, model, c2), ValidationError);
    c2 = cfg;
    c2.epochs = 0;
    CHECK_THROWS_AS(train::train(source, target, model, c2), ValidationError);
  }
  SUBCASE("clustering needs two target samples") {
    data::LabeledDataset lone;
    lone.features = Matrix(1, source.dim(), 0.5);
    lone.labels = {0};
    lone.domain = data::Domain::target;
    CHECK_THROWS_AS(train::train(source, lone, model, cfg), ValidationError);

    train::TrainConfig no_sfc = cfg;
    no_sfc.disable_sfc = true;
    no_sfc.epochs = 1;
    no_sfc.batch_size = 4;
    const train::TrainResult r = train::train(source, lone, model, no_sfc);
    CHECK(r.history.size() == 1);
  }
}

TEST_CASE("histories have one record per epoch and one loss row per iteration") {
  const auto [source, target] = tiny_scenario();
  train::ModelConfig model;
  model.hidden = {8};
  model.feature_dim = 4;
  train::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.quiet = true;

  const train::TrainResult r = train::train(source, target, model, cfg);
  CHECK(r.history.size() == 3);
  const std::size_t iters = (std::max(source.size(), target.size()) + 4) / 5;
  CHECK(r.loss_log.size() == 3 * iters);
  for (const auto& rep : r.loss_log) CHECK(std::isfinite(rep.total));
}
