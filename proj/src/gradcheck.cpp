#include "uniadapt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "uniadapt/classifier.hpp"
#include "uniadapt/common.hpp"
#include "uniadapt/kernels.hpp"
#include "uniadapt/losses.hpp"
#include "uniadapt/nn.hpp"
#include "uniadapt/rng.hpp"

namespace uniadapt::gradcheck {

namespace {

constexpr std::size_t kClassChoices[] = {2, 3, 5, 10};
// Minimum distance from any non-differentiable seam (argmax ties, margin
// band edges) a draw must keep; the finite-difference probe moves the
// probabilities by orders of magnitude less.
constexpr double kSeamGap = 0.02;

// One random problem instance: a small network, one batch per domain, fixed
// labels, and a frozen (constant) memory bank for the clustering term.
struct Draw {
  nn::FeatureExtractorParams extractor;
  nn::ClassifierHeadParams head;
  Matrix source_batch;
  Matrix target_batch;
  std::vector<int> labels;
  Matrix bank;
  std::vector<int> self_idx;
  losses::LossWeights weights;
  double tau = 0.05;
};

Matrix random_batch(std::size_t rows, std::size_t cols, std::mt19937_64& engine) {
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  Matrix batch(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) batch(r, c) = uniform(engine);
  return batch;
}

Draw make_draw(std::size_t num_classes, std::mt19937_64& engine) {
  std::uniform_int_distribution<std::size_t> input_dim(3, 6);
  std::uniform_int_distribution<std::size_t> feature_dim(4, 7);
  std::uniform_int_distribution<std::size_t> batch(2, 5);
  std::normal_distribution<double> normal(0.0, 1.0);

  Draw d;
  const std::size_t in = input_dim(engine);
  const std::size_t feat = feature_dim(engine);
  d.extractor = nn::init_extractor(in, {6}, feat, engine());
  d.head = nn::init_head(num_classes, feat, engine());
  d.source_batch = random_batch(batch(engine), in, engine);
  d.target_batch = random_batch(batch(engine), in, engine);

  std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
  d.labels.resize(d.source_batch.rows());
  for (int& y : d.labels) y = label(engine);

  const std::size_t bank_rows = d.target_batch.rows() + 3;
  d.bank = Matrix(bank_rows, feat);
  for (std::size_t r = 0; r < bank_rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < feat; ++c) {
      d.bank(r, c) = normal(engine);
      sq += d.bank(r, c) * d.bank(r, c);
    }
    const double norm = std::sqrt(sq);
    for (std::size_t c = 0; c < feat; ++c) d.bank(r, c) /= norm;
  }
  d.self_idx.resize(d.target_batch.rows());
  std::iota(d.self_idx.begin(), d.self_idx.end(), 0);
  return d;
}

classifier::BundleBatch source_bundles(Draw& d) {
  return classifier::bundles_from_logits(nn::forward(d.extractor, d.head, d.source_batch).logits);
}

classifier::BundleBatch target_bundles(Draw& d) {
  return classifier::bundles_from_logits(nn::forward(d.extractor, d.head, d.target_batch).logits);
}

Matrix target_similarities(Draw& d, const Matrix& features) {
  Matrix out(features.rows(), d.bank.rows());
  kernels::similarity_rows(d.bank, features, d.self_idx, d.tau, out);
  return out;
}

// The hard-negative term is only differentiable while the argmax over the
// non-label positives is unique; require a clear winner.
bool sova_safe(const classifier::BundleBatch& bundles, const std::vector<int>& labels) {
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    double best = -1.0;
    double second = -1.0;
    for (std::size_t j = 0; j < bundles.num_classes(); ++j) {
      if (static_cast<int>(j) == labels[i]) continue;
      const double p = bundles.p_pos(i, j);
      if (p > best) {
        second = best;
        best = p;
      } else {
        second = std::max(second, p);
      }
    }
    if (second >= 0.0 && best - second < kSeamGap) return false;
  }
  return true;
}

// Branch selection must be stable: a clear multi-class winner and a verdict
// about the margin band that a tiny parameter nudge cannot flip.
bool esl_safe(const classifier::BundleBatch& bundles, double margin) {
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    double best = -1.0;
    double second = -1.0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < bundles.num_classes(); ++j) {
      const double p = bundles.p_mc(i, j);
      if (p > best) {
        second = best;
        best = p;
        k = j;
      } else {
        second = std::max(second, p);
      }
    }
    if (bundles.num_classes() > 1 && best - second < kSeamGap) return false;
    const double diff = bundles.p_pos(i, k) - bundles.p_neg(i, k);
    if (std::abs(diff - margin) < kSeamGap || std::abs(diff + margin) < kSeamGap) return false;
  }
  return true;
}

struct Term {
  std::string name;
  std::function<double(Draw&)> value;
  std::function<std::vector<double>(Draw&)> analytic;
  std::function<bool(Draw&)> safe;
};

std::vector<Term> make_terms() {
  const auto always_safe = [](Draw&) { return true; };
  std::vector<Term> terms;

  terms.push_back(
      {"ce", [](Draw& d) { return losses::ce(source_bundles(d).p_mc, d.labels); },
       [](Draw& d) {
         nn::ForwardCache cache = nn::forward(d.extractor, d.head, d.source_batch);
         Matrix dlogits(cache.logits.rows(), cache.logits.cols());
         losses::ce_grad(classifier::bundles_from_logits(cache.logits), d.labels, 1.0, dlogits);
         return nn::flatten_values(nn::backward(d.extractor, d.head, cache, dlogits, Matrix()));
       },
       always_safe});

  terms.push_back(
      {"sova", [](Draw& d) { return losses::sova(source_bundles(d), d.labels); },
       [](Draw& d) {
         nn::ForwardCache cache = nn::forward(d.extractor, d.head, d.source_batch);
         Matrix dlogits(cache.logits.rows(), cache.logits.cols());
         losses::sova_grad(classifier::bundles_from_logits(cache.logits), d.labels, 1.0, dlogits);
         return nn::flatten_values(nn::backward(d.extractor, d.head, cache, dlogits, Matrix()));
       },
       [](Draw& d) { return sova_safe(source_bundles(d), d.labels); }});

  terms.push_back(
      {"esl", [](Draw& d) { return losses::esl(target_bundles(d), d.weights.margin); },
       [](Draw& d) {
         nn::ForwardCache cache = nn::forward(d.extractor, d.head, d.target_batch);
         Matrix dlogits(cache.logits.rows(), cache.logits.cols());
         losses::esl_grad(classifier::bundles_from_logits(cache.logits), d.weights.margin, 1.0,
                          dlogits);
         return nn::flatten_values(nn::backward(d.extractor, d.head, cache, dlogits, Matrix()));
       },
       [](Draw& d) { return esl_safe(target_bundles(d), d.weights.margin); }});

  terms.push_back(
      {"sfc",
       [](Draw& d) {
         const Matrix features = nn::extract_features(d.extractor, d.target_batch);
         return losses::sfc(target_similarities(d, features));
       },
       [](Draw& d) {
         nn::ForwardCache cache = nn::forward_features(d.extractor, d.target_batch);
         const Matrix sim = target_similarities(d, cache.features);
         Matrix dfeatures(cache.features.rows(), cache.features.cols());
         losses::sfc_grad(sim, d.bank, d.tau, 1.0, dfeatures);
         return nn::flatten_values(nn::backward(d.extractor, d.head, cache, Matrix(), dfeatures));
       },
       always_safe});

  terms.push_back(
      {"tova", [](Draw& d) { return losses::tova(target_bundles(d)); },
       [](Draw& d) {
         nn::ForwardCache cache = nn::forward(d.extractor, d.head, d.target_batch);
         Matrix dlogits(cache.logits.rows(), cache.logits.cols());
         losses::tova_grad(classifier::bundles_from_logits(cache.logits), cache.logits, 1.0,
                           dlogits);
         return nn::flatten_values(nn::backward(d.extractor, d.head, cache, dlogits, Matrix()));
       },
       always_safe});

  terms.push_back(
      {"composite",
       [](Draw& d) {
         const classifier::BundleBatch s = source_bundles(d);
         const classifier::BundleBatch t = target_bundles(d);
         const Matrix features = nn::extract_features(d.extractor, d.target_batch);
         return losses::total(losses::ce(s.p_mc, d.labels), losses::sova(s, d.labels),
                              losses::esl(t, d.weights.margin),
                              losses::sfc(target_similarities(d, features)), losses::tova(t),
                              d.weights)
             .total;
       },
       [](Draw& d) {
         nn::ForwardCache s_cache = nn::forward(d.extractor, d.head, d.source_batch);
         const classifier::BundleBatch s = classifier::bundles_from_logits(s_cache.logits);
         Matrix s_dlogits(s_cache.logits.rows(), s_cache.logits.cols());
         losses::ce_grad(s, d.labels, 1.0, s_dlogits);
         losses::sova_grad(s, d.labels, 1.0, s_dlogits);
         nn::GradientBundle grads =
             nn::backward(d.extractor, d.head, s_cache, s_dlogits, Matrix());

         nn::ForwardCache t_cache = nn::forward(d.extractor, d.head, d.target_batch);
         const classifier::BundleBatch t = classifier::bundles_from_logits(t_cache.logits);
         Matrix t_dlogits(t_cache.logits.rows(), t_cache.logits.cols());
         losses::esl_grad(t, d.weights.margin, d.weights.gamma, t_dlogits);
         losses::tova_grad(t, t_cache.logits, d.weights.beta, t_dlogits);
         const Matrix sim = target_similarities(d, t_cache.features);
         Matrix t_dfeatures(t_cache.features.rows(), t_cache.features.cols());
         losses::sfc_grad(sim, d.bank, d.tau, d.weights.alpha, t_dfeatures);
         grads.add(nn::backward(d.extractor, d.head, t_cache, t_dlogits, t_dfeatures));
         return nn::flatten_values(grads);
       },
       [](Draw& d) {
         return sova_safe(source_bundles(d), d.labels) &&
                esl_safe(target_bundles(d), d.weights.margin);
       }});

  return terms;
}

}  // namespace

bool CheckReport::all_passed() const {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.passed; });
}

CheckReport run(const CheckOptions& options) {
  if (options.draws_per_loss == 0) throw ValidationError("gradcheck needs at least 1 draw");
  if (!(options.step > 0.0) || !(options.tolerance > 0.0))
    throw ValidationError("gradcheck step and tolerance must be positive");

  CheckReport report;
  for (const Term& term : make_terms()) {
    auto engine = make_engine(options.seed, RngStream::gradcheck);
    CheckResult result{term.name, 0.0, 0, true};
    for (std::size_t i = 0; i < options.draws_per_loss; ++i) {
      const std::size_t num_classes = kClassChoices[i % std::size(kClassChoices)];
      Draw draw = make_draw(num_classes, engine);
      std::size_t attempts = 0;
      while (!term.safe(draw)) {
        if (++attempts > 1000)
          throw NumericError("gradcheck could not find a seam-free draw for " + term.name);
        draw = make_draw(num_classes, engine);
      }

      std::vector<double> analytic = term.analytic(draw);
      if (options.perturbation != 0.0 && !analytic.empty())
        analytic[0] += options.perturbation;

      const nn::ParamRefs refs = nn::flatten(draw.extractor, draw.head);
      if (refs.size() != analytic.size())
        throw NumericError("gradcheck gradient size does not match the parameter count");
      for (std::size_t p = 0; p < refs.size(); ++p) {
        double* value = refs.at(p);
        const double saved = *value;
        *value = saved + options.step;
        const double above = term.value(draw);
        *value = saved - options.step;
        const double below = term.value(draw);
        *value = saved;
        const double fd = (above - below) / (2.0 * options.step);
        const double rel = std::abs(analytic[p] - fd) /
                           std::max({std::abs(analytic[p]), std::abs(fd), 1e-3});
        result.max_rel_error = std::max(result.max_rel_error, rel);
      }
      ++result.draws;
    }
    result.passed = result.max_rel_error < options.tolerance;
    report.results.push_back(std::move(result));
  }
  return report;
}

void print_report(const CheckReport& report, const CheckOptions& options, std::FILE* out) {
  std::fprintf(out, "gradcheck: %zu draws per loss, step %g, tolerance %g\n",
               options.draws_per_loss, options.step, options.tolerance);
  for (const CheckResult& r : report.results)
    std::fprintf(out, "  %-10s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel_error,
                 r.passed ? "pass" : "FAIL");
  std::fprintf(out, "gradcheck: %s\n", report.all_passed() ? "PASS" : "FAIL");
}

}  // namespace uniadapt::gradcheck
