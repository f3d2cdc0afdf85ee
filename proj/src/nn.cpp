#include "uniadapt/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "uniadapt/common.hpp"
#include "uniadapt/kernels.hpp"

namespace uniadapt::nn {

namespace {

void add_layer(DenseLayer& dst, const DenseLayer& src) {
  for (std::size_t i = 0; i < dst.w.rows() * dst.w.cols(); ++i) dst.w.data()[i] += src.w.data()[i];
  for (std::size_t i = 0; i < dst.b.size(); ++i) dst.b[i] += src.b[i];
}

void scale_layer(DenseLayer& dst, double s) {
  for (std::size_t i = 0; i < dst.w.rows() * dst.w.cols(); ++i) dst.w.data()[i] *= s;
  for (double& v : dst.b) v *= s;
}

DenseLayer init_layer(std::size_t out_dim, std::size_t in_dim, std::mt19937_64& rng) {
  DenseLayer layer{Matrix(out_dim, in_dim), std::vector<double>(out_dim)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < out_dim * in_dim; ++i) layer.w.data()[i] = dist(rng);
  for (double& v : layer.b) v = dist(rng);
  return layer;
}

void check_finite(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) {
    if (!std::isfinite(m.data()[i])) throw ValidationError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

void GradientBundle::add(const GradientBundle& other) {
  for (std::size_t l = 0; l < extractor.size(); ++l) add_layer(extractor[l], other.extractor[l]);
  add_layer(head, other.head);
}

void GradientBundle::scale(double s) {
  for (auto& layer : extractor) scale_layer(layer, s);
  scale_layer(head, s);
}

GradientBundle zeros_like(const FeatureExtractorParams& params, const ClassifierHeadParams& head) {
  GradientBundle g;
  g.extractor.reserve(params.layers.size());
  for (const auto& layer : params.layers)
    g.extractor.push_back({Matrix(layer.out_dim(), layer.in_dim()),
                           std::vector<double>(layer.out_dim(), 0.0)});
  g.head = {Matrix(head.w.rows(), head.w.cols()), std::vector<double>(head.b.size(), 0.0)};
  return g;
}

FeatureExtractorParams init_extractor(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                      std::size_t feature_dim, std::uint64_t seed) {
  if (input_dim == 0 || feature_dim == 0) throw ValidationError("extractor dimensions must be positive");
  std::mt19937_64 rng(seed);
  FeatureExtractorParams params;
  std::size_t in = input_dim;
  for (std::size_t width : hidden) {
    if (width == 0) throw ValidationError("hidden layer width must be positive");
    params.layers.push_back(init_layer(width, in, rng));
    in = width;
  }
  params.layers.push_back(init_layer(feature_dim, in, rng));
  return params;
}

ClassifierHeadParams init_head(std::size_t num_classes, std::size_t feature_dim,
                               std::uint64_t seed) {
  if (num_classes < 2) throw ValidationError("classifier head needs at least 2 classes");
  std::mt19937_64 rng(seed);
  DenseLayer layer = init_layer(2 * num_classes, feature_dim, rng);
  return {std::move(layer.w), std::move(layer.b)};
}

ForwardCache forward_features(const FeatureExtractorParams& params, const Matrix& batch) {
  if (batch.rows() == 0) throw ValidationError("empty batch");
  if (batch.cols() != params.input_dim())
    throw ValidationError("batch has " + std::to_string(batch.cols()) +
                          " columns, extractor expects " + std::to_string(params.input_dim()));
  check_finite(batch, "input batch");

  ForwardCache cache;
  cache.input = batch;
  const Matrix* cur = &cache.input;
  const std::size_t n_layers = params.layers.size();
  cache.pre.reserve(n_layers);
  cache.act.reserve(n_layers - 1);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = params.layers[l];
    Matrix z(batch.rows(), layer.out_dim());
    kernels::dense_forward(*cur, layer.w, layer.b, z);
    cache.pre.push_back(std::move(z));
    if (l + 1 < n_layers) {
      Matrix a(batch.rows(), layer.out_dim());
      kernels::tanh_forward(cache.pre.back(), a);
      cache.act.push_back(std::move(a));
      cur = &cache.act.back();
    } else {
      cur = &cache.pre.back();
    }
  }
  cache.features = Matrix(batch.rows(), params.feature_dim());
  kernels::l2_normalize(*cur, cache.features, cache.norms);
  return cache;
}

ForwardCache forward(const FeatureExtractorParams& params, const ClassifierHeadParams& head,
                     const Matrix& batch) {
  ForwardCache cache = forward_features(params, batch);
  cache.logits = classifier_logits(head, cache.features);
  return cache;
}

Matrix extract_features(const FeatureExtractorParams& params, const Matrix& batch) {
  return forward_features(params, batch).features;
}

Matrix classifier_logits(const ClassifierHeadParams& head, const Matrix& features) {
  if (features.cols() != head.feature_dim())
    throw ValidationError("features have " + std::to_string(features.cols()) +
                          " columns, head expects " + std::to_string(head.feature_dim()));
  Matrix logits(features.rows(), head.w.rows());
  kernels::dense_forward(features, head.w, head.b, logits);
  return logits;
}

GradientBundle backward(const FeatureExtractorParams& params, const ClassifierHeadParams& head,
                        const ForwardCache& cache, const Matrix& dlogits,
                        const Matrix& dfeatures) {
  const std::size_t batch = cache.input.rows();
  if (cache.pre.size() != params.layers.size() || cache.input.cols() != params.input_dim() ||
      cache.features.cols() != params.feature_dim())
    throw ValidationError("forward cache does not match extractor parameters");
  const bool has_dlogits = !dlogits.empty();
  const bool has_dfeatures = !dfeatures.empty();
  if (has_dlogits && (dlogits.rows() != batch || dlogits.cols() != head.w.rows()))
    throw ValidationError("dlogits shape does not match forward cache");
  if (has_dlogits && cache.logits.empty())
    throw ValidationError("backward with dlogits requires a forward pass through the head");
  if (has_dfeatures && (dfeatures.rows() != batch || dfeatures.cols() != params.feature_dim()))
    throw ValidationError("dfeatures shape does not match forward cache");

  GradientBundle grads = zeros_like(params, head);

  // Head parameters and gradient w.r.t. normalized features.
  Matrix dfeat(batch, params.feature_dim());
  if (has_dlogits) {
    kernels::dense_backward_params(dlogits, cache.features, grads.head.w, grads.head.b);
    kernels::dense_backward_data(dlogits, head.w, dfeat);
  }
  if (has_dfeatures) {
    for (std::size_t i = 0; i < batch * params.feature_dim(); ++i)
      dfeat.data()[i] += dfeatures.data()[i];
  }

  // Through the normalization.
  Matrix dcur(batch, params.feature_dim());
  kernels::l2_normalize_backward(cache.features, cache.norms, dfeat, dcur);

  // Through the dense stack.
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const Matrix& layer_input = (l == 0) ? cache.input : cache.act[l - 1];
    kernels::dense_backward_params(dcur, layer_input, grads.extractor[l].w, grads.extractor[l].b);
    if (l > 0) {
      Matrix dinput(batch, layer.in_dim());
      kernels::dense_backward_data(dcur, layer.w, dinput);
      Matrix next(batch, layer.in_dim());
      kernels::tanh_backward(cache.act[l - 1], dinput, next);
      dcur = std::move(next);
    }
  }
  return grads;
}

namespace {

void write_array(std::FILE* f, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) std::fprintf(f, i + 1 < n ? "%.17g " : "%.17g\n", data[i]);
}

void write_layer(std::FILE* f, const char* tag, const DenseLayer& layer) {
  std::fprintf(f, "%s %zu %zu\n", tag, layer.out_dim(), layer.in_dim());
  for (std::size_t r = 0; r < layer.out_dim(); ++r) write_array(f, layer.w.row(r).data(), layer.in_dim());
  write_array(f, layer.b.data(), layer.b.size());
}

}  // namespace

void save_checkpoint(const FeatureExtractorParams& params, const ClassifierHeadParams& head,
                     const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open checkpoint for writing: " + path);
  std::fprintf(f, "uniadapt-checkpoint v1\n");
  std::fprintf(f, "dims %zu %zu %zu\n", params.input_dim(), params.feature_dim(),
               head.num_classes());
  std::fprintf(f, "layers %zu\n", params.layers.size());
  for (const auto& layer : params.layers) write_layer(f, "layer", layer);
  write_layer(f, "head", {head.w, head.b});
  std::fclose(f);
}

namespace {

DenseLayer read_layer(std::istream& in, const std::string& expected_tag) {
  std::string tag;
  std::size_t out_dim = 0, in_dim = 0;
  if (!(in >> tag >> out_dim >> in_dim) || tag != expected_tag)
    throw ValidationError("checkpoint: expected '" + expected_tag + "' section");
  if (out_dim == 0 || in_dim == 0) throw ValidationError("checkpoint: zero layer dimension");
  DenseLayer layer{Matrix(out_dim, in_dim), std::vector<double>(out_dim)};
  for (std::size_t i = 0; i < out_dim * in_dim; ++i)
    if (!(in >> layer.w.data()[i])) throw ValidationError("checkpoint: truncated weight array");
  for (std::size_t i = 0; i < out_dim; ++i)
    if (!(in >> layer.b[i])) throw ValidationError("checkpoint: truncated bias array");
  return layer;
}

}  // namespace

void load_checkpoint(const std::string& path, FeatureExtractorParams& params,
                     ClassifierHeadParams& head) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "uniadapt-checkpoint" || version != "v1")
    throw ValidationError("checkpoint: bad magic line in " + path);
  std::string tag;
  std::size_t input_dim = 0, feature_dim = 0, num_classes = 0, n_layers = 0;
  if (!(in >> tag >> input_dim >> feature_dim >> num_classes) || tag != "dims")
    throw ValidationError("checkpoint: expected 'dims' header");
  if (!(in >> tag >> n_layers) || tag != "layers" || n_layers == 0)
    throw ValidationError("checkpoint: expected 'layers' header");

  params.layers.clear();
  for (std::size_t l = 0; l < n_layers; ++l) params.layers.push_back(read_layer(in, "layer"));
  DenseLayer h = read_layer(in, "head");
  head = {std::move(h.w), std::move(h.b)};

  if (params.input_dim() != input_dim || params.feature_dim() != feature_dim ||
      head.num_classes() != num_classes || head.feature_dim() != feature_dim ||
      head.w.rows() != 2 * num_classes)
    throw ValidationError("checkpoint: header dims do not match arrays in " + path);
}

ParamRefs flatten(FeatureExtractorParams& params, ClassifierHeadParams& head) {
  ParamRefs refs;
  for (auto& layer : params.layers) {
    for (std::size_t i = 0; i < layer.w.rows() * layer.w.cols(); ++i)
      refs.extractor.push_back(layer.w.data() + i);
    for (double& v : layer.b) refs.extractor.push_back(&v);
  }
  for (std::size_t i = 0; i < head.w.rows() * head.w.cols(); ++i)
    refs.head.push_back(head.w.data() + i);
  for (double& v : head.b) refs.head.push_back(&v);
  return refs;
}

std::vector<double> flatten_values(const GradientBundle& g) {
  std::vector<double> out;
  for (const auto& layer : g.extractor) {
    out.insert(out.end(), layer.w.data(), layer.w.data() + layer.w.rows() * layer.w.cols());
    out.insert(out.end(), layer.b.begin(), layer.b.end());
  }
  out.insert(out.end(), g.head.w.data(), g.head.w.data() + g.head.w.rows() * g.head.w.cols());
  out.insert(out.end(), g.head.b.begin(), g.head.b.end());
  return out;
}

}  // namespace uniadapt::nn
