#include "uniadapt/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "uniadapt/common.hpp"

namespace uniadapt::classifier {

namespace {

void softmax_into(std::span<const double> logits, std::span<double> out) {
  double max_l = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_l = std::max(max_l, v);
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_l);
    denom += out[i];
  }
  const double inv = 1.0 / denom;
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] *= inv;
}

void validate_logits(std::span<const double> logits) {
  if (logits.size() < 4 || logits.size() % 2 != 0)
    throw ValidationError("composite logits must have even length >= 4, got " +
                          std::to_string(logits.size()));
  for (double v : logits)
    if (!std::isfinite(v)) throw ValidationError("composite logits contain a non-finite value");
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

ProbabilityBundle BundleBatch::sample(std::size_t i) const {
  ProbabilityBundle b;
  b.p_mc.assign(p_mc.row(i).begin(), p_mc.row(i).end());
  b.p_pos.assign(p_pos.row(i).begin(), p_pos.row(i).end());
  b.p_neg.assign(p_neg.row(i).begin(), p_neg.row(i).end());
  return b;
}

ProbabilityBundle bundle_from_logits(std::span<const double> logits) {
  validate_logits(logits);
  const std::size_t k = logits.size() / 2;
  ProbabilityBundle bundle;
  bundle.p_mc.resize(k);
  bundle.p_pos.resize(k);
  bundle.p_neg.resize(k);
  softmax_into(logits.subspan(0, k), bundle.p_mc);
  for (std::size_t c = 0; c < k; ++c) {
    double pair[2];
    const double lp[2] = {logits[c], logits[k + c]};
    softmax_into(lp, pair);
    bundle.p_pos[c] = pair[0];
    bundle.p_neg[c] = pair[1];
  }
  return bundle;
}

BundleBatch bundles_from_logits(const Matrix& logits) {
  if (logits.cols() < 4 || logits.cols() % 2 != 0)
    throw ValidationError("composite logits must have even width >= 4");
  const std::size_t k = logits.cols() / 2;
  BundleBatch out{Matrix(logits.rows(), k), Matrix(logits.rows(), k), Matrix(logits.rows(), k)};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    ProbabilityBundle b = bundle_from_logits(logits.row(i));
    std::copy(b.p_mc.begin(), b.p_mc.end(), out.p_mc.row(i).begin());
    std::copy(b.p_pos.begin(), b.p_pos.end(), out.p_pos.row(i).begin());
    std::copy(b.p_neg.begin(), b.p_neg.end(), out.p_neg.row(i).begin());
  }
  return out;
}

Decision decide(const ProbabilityBundle& bundle) {
  const int k = argmax_lowest(bundle.p_mc);
  Decision d;
  d.mc_argmax = k;
  d.paradox_score = bundle.p_neg[k];
  d.predicted_class =
      (bundle.p_pos[k] >= bundle.p_neg[k]) ? k : static_cast<int>(bundle.num_classes());
  return d;
}

std::vector<Decision> decide_batch(const BundleBatch& bundles) {
  std::vector<Decision> out;
  out.reserve(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) out.push_back(decide(bundles.sample(i)));
  return out;
}

EslBranch esl_branch(double p_pos, double p_neg, double margin) {
  if (p_pos > p_neg + margin) return EslBranch::sharpen;
  if (p_pos < p_neg - margin) return EslBranch::flatten;
  return EslBranch::skip;
}

EslBranch esl_branch(const ProbabilityBundle& bundle, double margin) {
  const int k = argmax_lowest(bundle.p_mc);
  return esl_branch(bundle.p_pos[k], bundle.p_neg[k], margin);
}

void write_predictions(const std::vector<Decision>& decisions, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open predictions file for writing: " + path);
  std::fprintf(f, "sample_id,mc_argmax,p_neg_argmax,predicted_class\n");
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const Decision& d = decisions[i];
    std::fprintf(f, "%zu,%d,%.17g,%d\n", i, d.mc_argmax, d.paradox_score, d.predicted_class);
  }
  std::fclose(f);
}

}  // namespace uniadapt::classifier
