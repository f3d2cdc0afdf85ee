#ifndef UNIADAPT_NN_HPP
#define UNIADAPT_NN_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uniadapt/matrix.hpp"

namespace uniadapt::nn {

struct DenseLayer {
  Matrix w;                // out_dim x in_dim
  std::vector<double> b;   // out_dim

  std::size_t in_dim() const noexcept { return w.cols(); }
  std::size_t out_dim() const noexcept { return w.rows(); }
};

// MLP feature extractor: hidden dense+tanh layers followed by a linear
// output layer and row-wise l2 normalization. tanh is the one nonlinearity
// used project-wide; it is smooth, which keeps finite-difference gradient
// checks clean.
struct FeatureExtractorParams {
  std::vector<DenseLayer> layers;  // hidden layers ... output layer

  std::size_t input_dim() const noexcept { return layers.front().in_dim(); }
  std::size_t feature_dim() const noexcept { return layers.back().out_dim(); }
  std::size_t num_hidden() const noexcept { return layers.size() - 1; }
};

// 2K x d head: rows 0..K-1 are the multi-class logits and double as the
// positive logits of the per-class one-vs-all pairs; rows K..2K-1 are the
// negative pair members.
struct ClassifierHeadParams {
  Matrix w;               // 2K x d
  std::vector<double> b;  // 2K

  std::size_t num_classes() const noexcept { return w.rows() / 2; }
  std::size_t feature_dim() const noexcept { return w.cols(); }
};

// Gradients (or momentum buffers) mirroring the parameter shapes.
struct GradientBundle {
  std::vector<DenseLayer> extractor;
  DenseLayer head;

  void add(const GradientBundle& other);
  void scale(double s);
};

GradientBundle zeros_like(const FeatureExtractorParams& params, const ClassifierHeadParams& head);

// Symmetric uniform init scaled by fan-in, seeded for reproducibility.
FeatureExtractorParams init_extractor(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                      std::size_t feature_dim, std::uint64_t seed);
ClassifierHeadParams init_head(std::size_t num_classes, std::size_t feature_dim,
                               std::uint64_t seed);

// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> act;   // tanh output per hidden layer
  Matrix features;           // l2-normalized output, B x d
  std::vector<double> norms;
  Matrix logits;             // B x 2K, filled by forward()
};

// Runs the extractor and returns normalized features (plus cached
// intermediates). Throws NumericError on degenerate (near-zero) rows.
ForwardCache forward_features(const FeatureExtractorParams& params, const Matrix& batch);

// Extractor + classifier head.
ForwardCache forward(const FeatureExtractorParams& params, const ClassifierHeadParams& head,
                     const Matrix& batch);

// Normalized features only; the contract-level entry point.
Matrix extract_features(const FeatureExtractorParams& params, const Matrix& batch);

// logits[i] = W f_i + b.
Matrix classifier_logits(const ClassifierHeadParams& head, const Matrix& features);

// Analytic gradients of a scalar loss given dL/dlogits and an optional extra
// dL/dfeatures term injected directly on the normalized features (used by the
// clustering loss, which bypasses the head). The normalization Jacobian is
// part of the chain. Throws ValidationError if the cache does not match the
// parameters (i.e. no matching forward pass).
GradientBundle backward(const FeatureExtractorParams& params, const ClassifierHeadParams& head,
                        const ForwardCache& cache, const Matrix& dlogits,
                        const Matrix& dfeatures);

// Checkpoint container, documented in docs/formats.md. Text-based, exact
// round-trip via 17-significant-digit floats.
void save_checkpoint(const FeatureExtractorParams& params, const ClassifierHeadParams& head,
                     const std::string& path);
void load_checkpoint(const std::string& path, FeatureExtractorParams& params,
                     ClassifierHeadParams& head);

// Fixed-order traversal of all parameters (extractor layers then head, each
// weights-then-bias). Used by the optimizer and the finite-difference oracle.
template <typename Params, typename Fn>
void for_each_layer(Params& p, Fn&& fn) {
  for (auto& layer : p.extractor) fn(layer);
  fn(p.head);
}

struct ParamRefs {
  std::vector<double*> extractor;
  std::vector<double*> head;

  std::size_t size() const noexcept { return extractor.size() + head.size(); }
  double* at(std::size_t i) const noexcept {
    return i < extractor.size() ? extractor[i] : head[i - extractor.size()];
  }
};

// Pointers to every scalar parameter in fixed order, split by group.
ParamRefs flatten(FeatureExtractorParams& params, ClassifierHeadParams& head);
std::vector<double> flatten_values(const GradientBundle& g);

}  // namespace uniadapt::nn

#endif
