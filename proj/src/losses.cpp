#include "uniadapt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "uniadapt/common.hpp"

namespace uniadapt::losses {

namespace {

inline double safe_log(double p) { return std::log(std::clamp(p, kProbFloor, 1.0)); }

// -sum p log p with 0 log 0 = 0.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * safe_log(v);
  return h;
}

inline double binary_entropy(double p_pos, double p_neg) {
  double h = 0.0;
  if (p_pos > 0.0) h -= p_pos * safe_log(p_pos);
  if (p_neg > 0.0) h -= p_neg * safe_log(p_neg);
  return h;
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t k) {
  if (labels.size() != batch) throw ValidationError("label count does not match batch size");
  for (int y : labels)
    if (y < 0 || y >= static_cast<int>(k))
      throw ValidationError("label " + std::to_string(y) + " outside [0, " + std::to_string(k) +
                            ")");
}

int mc_argmax(const Matrix& p_mc, std::size_t i) {
  std::span<const double> row = p_mc.row(i);
  int best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = static_cast<int>(c);
  return best;
}

// dH(softmax(z))/dz_c = -p_c (log p_c + H).
void entropy_grad_row(std::span<const double> p, double scale, std::span<double> dlogits_mc) {
  const double h = entropy(p);
  for (std::size_t c = 0; c < p.size(); ++c)
    dlogits_mc[c] += scale * (-p[c] * (safe_log(p[c]) + h));
}

}  // namespace

double ce(const Matrix& p_mc, std::span<const int> labels) {
  check_labels(labels, p_mc.rows(), p_mc.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < p_mc.rows(); ++i) sum += -safe_log(p_mc(i, labels[i]));
  return sum / static_cast<double>(p_mc.rows());
}

double sova(const classifier::BundleBatch& bundles, std::span<const int> labels) {
  const std::size_t k = bundles.num_classes();
  if (k < 2) throw ValidationError("one-vs-all loss needs at least 2 classes");
  check_labels(labels, bundles.size(), k);
  double sum = 0.0;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const int y = labels[i];
    double hardest = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<int>(j) == y) continue;
      hardest = std::max(hardest, safe_log(bundles.p_pos(i, j)));
    }
    sum += -safe_log(bundles.p_pos(i, y)) + hardest;
  }
  return sum / static_cast<double>(bundles.size());
}

double esl(const classifier::BundleBatch& bundles, double margin) {
  if (margin < 0.0 || margin >= 1.0) throw ValidationError("margin must lie in [0, 1)");
  double sum = 0.0;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const int kk = mc_argmax(bundles.p_mc, i);
    switch (classifier::esl_branch(bundles.p_pos(i, kk), bundles.p_neg(i, kk), margin)) {
      case classifier::EslBranch::sharpen:
        sum += entropy(bundles.p_mc.row(i));
        break;
      case classifier::EslBranch::flatten:
        sum -= entropy(bundles.p_mc.row(i));
        break;
      case classifier::EslBranch::skip:
        break;
    }
  }
  return sum / static_cast<double>(bundles.size());
}

double sfc(const Matrix& similarity_rows) {
  double sum = 0.0;
  for (std::size_t i = 0; i < similarity_rows.rows(); ++i) {
    std::span<const double> row = similarity_rows.row(i);
    double row_sum = 0.0;
    for (double v : row) row_sum += v;
    if (std::abs(row_sum - 1.0) > 1e-6)
      throw ValidationError("similarity row " + std::to_string(i) + " sums to " +
                            std::to_string(row_sum) + ", expected 1");
    sum += entropy(row);
  }
  return sum / static_cast<double>(similarity_rows.rows());
}

double tova(const classifier::BundleBatch& bundles) {
  double sum = 0.0;
  for (std::size_t i = 0; i < bundles.size(); ++i)
    for (std::size_t c = 0; c < bundles.num_classes(); ++c)
      sum += binary_entropy(bundles.p_pos(i, c), bundles.p_neg(i, c));
  return sum / static_cast<double>(bundles.size());
}

LossReport total(double ce, double sova, double esl, double sfc, double tova,
                 const LossWeights& weights) {
  LossReport r{ce, sova, esl, sfc, tova, 0.0};
  r.total = (ce + sova) + weights.alpha * sfc + weights.beta * tova + weights.gamma * esl;
  return r;
}

void ce_grad(const classifier::BundleBatch& bundles, std::span<const int> labels, double coeff,
             Matrix& dlogits) {
  const std::size_t k = bundles.num_classes();
  check_labels(labels, bundles.size(), k);
  const double scale = coeff / static_cast<double>(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double indicator = (static_cast<int>(c) == labels[i]) ? 1.0 : 0.0;
      dlogits(i, c) += scale * (bundles.p_mc(i, c) - indicator);
    }
  }
}

void sova_grad(const classifier::BundleBatch& bundles, std::span<const int> labels, double coeff,
               Matrix& dlogits) {
  const std::size_t k = bundles.num_classes();
  check_labels(labels, bundles.size(), k);
  const double scale = coeff / static_cast<double>(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const int y = labels[i];
    // Hard max: the gradient reaches only the selected negative predictor.
    int hardest = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<int>(j) == y) continue;
      const double v = bundles.p_pos(i, j);
      if (v > best) {
        best = v;
        hardest = static_cast<int>(j);
      }
    }
    // d(-log p_pos[y])/d(logit_y - logit_{K+y}) = p_pos[y] - 1.
    const double gy = bundles.p_pos(i, y) - 1.0;
    dlogits(i, y) += scale * gy;
    dlogits(i, k + y) -= scale * gy;
    const double gj = 1.0 - bundles.p_pos(i, hardest);
    dlogits(i, hardest) += scale * gj;
    dlogits(i, k + hardest) -= scale * gj;
  }
}

void esl_grad(const classifier::BundleBatch& bundles, double margin, double coeff,
              Matrix& dlogits) {
  if (margin < 0.0 || margin >= 1.0) throw ValidationError("margin must lie in [0, 1)");
  const std::size_t k = bundles.num_classes();
  const double scale = coeff / static_cast<double>(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const int kk = mc_argmax(bundles.p_mc, i);
    double sign = 0.0;
    switch (classifier::esl_branch(bundles.p_pos(i, kk), bundles.p_neg(i, kk), margin)) {
      case classifier::EslBranch::sharpen:
        sign = 1.0;
        break;
      case classifier::EslBranch::flatten:
        sign = -1.0;
        break;
      case classifier::EslBranch::skip:
        continue;
    }
    entropy_grad_row(bundles.p_mc.row(i), sign * scale, dlogits.row(i).subspan(0, k));
  }
}

void tova_grad(const classifier::BundleBatch& bundles, const Matrix& logits, double coeff,
               Matrix& dlogits) {
  const std::size_t k = bundles.num_classes();
  const double scale = coeff / static_cast<double>(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      // dH_b(sigmoid(s))/ds = -s * p_pos * p_neg with s the pair logit gap.
      const double s = logits(i, c) - logits(i, k + c);
      const double g = -s * bundles.p_pos(i, c) * bundles.p_neg(i, c);
      dlogits(i, c) += scale * g;
      dlogits(i, k + c) -= scale * g;
    }
  }
}

void sfc_grad(const Matrix& similarity_rows, const Matrix& bank_rows, double tau, double coeff,
              Matrix& dfeatures) {
  const double scale = coeff / static_cast<double>(similarity_rows.rows());
  for (std::size_t i = 0; i < similarity_rows.rows(); ++i) {
    std::span<const double> p = similarity_rows.row(i);
    const double h = entropy(p);
    std::span<double> df = dfeatures.row(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[j] <= 0.0) continue;  // self column and numerically empty entries
      const double w = scale * (-p[j] * (safe_log(p[j]) + h)) / tau;
      std::span<const double> v = bank_rows.row(j);
      for (std::size_t c = 0; c < df.size(); ++c) df[c] += w * v[c];
    }
  }
}

LossLogWriter::LossLogWriter(const std::string& path) : file_(std::fopen(path.c_str(), "w")) {
  if (!file_) throw ValidationError("cannot open loss log for writing: " + path);
  std::fprintf(file_, "iter,ce,sova,esl,sfc,tova,total\n");
}

LossLogWriter::~LossLogWriter() {
  if (file_) std::fclose(file_);
}

void LossLogWriter::append(std::size_t iteration, const LossReport& r) {
  std::fprintf(file_, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", iteration, r.ce, r.sova, r.esl,
               r.sfc, r.tova, r.total);
}

}  // namespace uniadapt::losses
