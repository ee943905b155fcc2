#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eeggraph/graph.hpp"
#include "eeggraph/tensor.hpp"

namespace eeggraph {

enum class Architecture : int { ShallowGcnn = 0, DeepGcnn = 1, Fcnn = 2 };

inline const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::ShallowGcnn:
      return "shallow";
    case Architecture::DeepGcnn:
      return "deep";
    case Architecture::Fcnn:
      return "fcnn";
  }
  return "?";
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "shallow") return Architecture::ShallowGcnn;
  if (s == "deep") return Architecture::DeepGcnn;
  if (s == "fcnn") return Architecture::Fcnn;
  throw std::invalid_argument("unknown architecture: " + s);
}

constexpr int kNumClasses = 2;
constexpr int kPatientClass = static_cast<int>(Label::Patient);

// Layer dimensions and regularization rates for one model variant. The
// presets below are the fixed architectures; tests shrink the dims to keep
// finite-difference checks fast.
struct ModelSpec {
  Architecture arch = Architecture::ShallowGcnn;
  std::size_t input_dim = kNumBands;
  std::vector<std::size_t> gcn_dims;     // per-GCN-layer output width
  std::vector<std::size_t> hidden_dims;  // hidden linear widths
  double gcn_dropout = 0.1;
  double linear_dropout = 0.5;

  static ModelSpec shallow_gcnn() {
    return {Architecture::ShallowGcnn, kNumBands, {64, 128}, {}, 0.1, 0.5};
  }
  static ModelSpec deep_gcnn() {
    return {Architecture::DeepGcnn, kNumBands, {16, 16, 32, 64, 128},
            {30, 20}, 0.1, 0.5};
  }
  static ModelSpec fcnn() {
    return {Architecture::Fcnn, kNumChannels * kNumBands, {}, {64, 32}, 0.1,
            0.5};
  }

  std::size_t embedding_dim() const {
    if (!gcn_dims.empty()) return gcn_dims.back();
    if (!hidden_dims.empty()) return hidden_dims.back();
    return input_dim;
  }
  std::size_t classifier_input_dim() const {
    if (!hidden_dims.empty()) return hidden_dims.back();
    if (!gcn_dims.empty()) return gcn_dims.back();
    return input_dim;
  }
};

template <typename T>
struct BatchNorm {
  std::vector<T> gamma, beta;              // trainable
  std::vector<T> running_mean, running_var;  // eval-mode statistics

  explicit BatchNorm(std::size_t dim = 0)
      : gamma(dim, T(1)),
        beta(dim, T(0)),
        running_mean(dim, T(0)),
        running_var(dim, T(1)) {}
};

template <typename T>
struct ModelParams {
  ModelSpec spec;
  std::vector<Matrix<T>> gcn_weights;  // in_dim x out_dim; the rule has no bias
  std::vector<BatchNorm<T>> gcn_norms;
  std::vector<Matrix<T>> linear_weights;    // hidden layers + classifier
  std::vector<std::vector<T>> linear_biases;
  std::vector<BatchNorm<T>> linear_norms;   // hidden layers only

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : gcn_weights) n += w.size();
    for (const auto& bn : gcn_norms) n += bn.gamma.size() + bn.beta.size();
    for (const auto& w : linear_weights) n += w.size();
    for (const auto& b : linear_biases) n += b.size();
    for (const auto& bn : linear_norms) n += bn.gamma.size() + bn.beta.size();
    return n;
  }
};

// Trainable tensors in a fixed order, so gradients and optimizer state can
// mirror the parameter layout exactly.
template <typename T>
std::vector<std::vector<T>*> trainable_tensors(ModelParams<T>& p) {
  std::vector<std::vector<T>*> out;
  for (auto& w : p.gcn_weights) out.push_back(&w.data);
  for (auto& bn : p.gcn_norms) {
    out.push_back(&bn.gamma);
    out.push_back(&bn.beta);
  }
  for (auto& w : p.linear_weights) out.push_back(&w.data);
  for (auto& b : p.linear_biases) out.push_back(&b);
  for (auto& bn : p.linear_norms) {
    out.push_back(&bn.gamma);
    out.push_back(&bn.beta);
  }
  return out;
}

template <typename T>
std::vector<const std::vector<T>*> trainable_tensors(const ModelParams<T>& p) {
  auto mutable_view = trainable_tensors(const_cast<ModelParams<T>&>(p));
  return std::vector<const std::vector<T>*>(mutable_view.begin(),
                                            mutable_view.end());
}

inline std::vector<std::string> trainable_tensor_names(const ModelSpec& spec) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < spec.gcn_dims.size(); ++l)
    names.push_back("gcn" + std::to_string(l) + ".weight");
  for (std::size_t l = 0; l < spec.gcn_dims.size(); ++l) {
    names.push_back("gcn_bn" + std::to_string(l) + ".gamma");
    names.push_back("gcn_bn" + std::to_string(l) + ".beta");
  }
  const std::size_t n_lin = spec.hidden_dims.size() + 1;
  for (std::size_t l = 0; l < n_lin; ++l)
    names.push_back("linear" + std::to_string(l) + ".weight");
  for (std::size_t l = 0; l < n_lin; ++l)
    names.push_back("linear" + std::to_string(l) + ".bias");
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    names.push_back("linear_bn" + std::to_string(l) + ".gamma");
    names.push_back("linear_bn" + std::to_string(l) + ".beta");
  }
  return names;
}

// Glorot-uniform weights, zero biases, identity batch norm. Fully
// determined by the seed.
template <typename T>
ModelParams<T> init_params(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.arch == Architecture::Fcnn && !spec.gcn_dims.empty())
    throw ShapeMismatch("Fcnn must not have GCN layers");
  ModelParams<T> p;
  p.spec = spec;
  Rng rng(derive_seed(seed, 0xC0DE));
  auto glorot = [&](std::size_t n_in, std::size_t n_out) {
    Matrix<T> w(n_in, n_out);
    const double limit = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
    return w;
  };

  std::size_t d = spec.input_dim;
  for (std::size_t out : spec.gcn_dims) {
    p.gcn_weights.push_back(glorot(d, out));
    p.gcn_norms.emplace_back(out);
    d = out;
  }

  std::size_t lin_in = spec.gcn_dims.empty() ? spec.input_dim : d;
  for (std::size_t out : spec.hidden_dims) {
    p.linear_weights.push_back(glorot(lin_in, out));
    p.linear_biases.emplace_back(out, T(0));
    p.linear_norms.emplace_back(out);
    lin_in = out;
  }
  p.linear_weights.push_back(glorot(lin_in, kNumClasses));
  p.linear_biases.emplace_back(kNumClasses, T(0));
  return p;
}

// Zero-filled clone with the same tensor layout; used for gradients and
// Adam moments.
template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
  ModelParams<T> z = p;
  for (auto* t : trainable_tensors(z)) std::fill(t->begin(), t->end(), T(0));
  for (auto& bn : z.gcn_norms) {
    std::fill(bn.running_mean.begin(), bn.running_mean.end(), T(0));
    std::fill(bn.running_var.begin(), bn.running_var.end(), T(0));
  }
  for (auto& bn : z.linear_norms) {
    std::fill(bn.running_mean.begin(), bn.running_mean.end(), T(0));
    std::fill(bn.running_var.begin(), bn.running_var.end(), T(0));
  }
  return z;
}

// ---------------------------------------------------------------------------
// Adjacency normalization (the D^-1/2 (A+I) D^-1/2 factor)
// ---------------------------------------------------------------------------

struct NormalizedAdjacency {
  std::array<double, kNumChannels * kNumChannels> values{};

  double& at(int i, int j) {
    return values[static_cast<std::size_t>(i * kNumChannels + j)];
  }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i * kNumChannels + j)];
  }
};

inline NormalizedAdjacency normalize_adjacency(const AdjacencyMatrix& a) {
  std::array<double, kNumChannels> degree{};
  for (int i = 0; i < kNumChannels; ++i) {
    double d = 1.0;  // self-loop
    for (int j = 0; j < kNumChannels; ++j)
      if (j != i) d += a.at(i, j);
    if (d <= 0.0) throw SingularDegree("non-positive degree");
    degree[static_cast<std::size_t>(i)] = d;
  }
  NormalizedAdjacency out;
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j) {
      const double aij = (i == j) ? 1.0 : a.at(i, j);
      out.at(i, j) = aij / std::sqrt(degree[static_cast<std::size_t>(i)] *
                                     degree[static_cast<std::size_t>(j)]);
    }
  return out;
}

// ---------------------------------------------------------------------------
// The bare propagation rule and pooling, as standalone operations.
// ---------------------------------------------------------------------------

// sigma(adj * h * W); sigma = ReLU on hidden layers, identity on the last.
template <typename T>
Matrix<T> gcn_forward(const Matrix<T>& h, const Matrix<T>& weight,
                      const NormalizedAdjacency& adj, bool relu = true) {
  if (h.rows != kNumChannels)
    throw ShapeMismatch("gcn_forward expects 8 node rows");
  if (h.cols != weight.rows)
    throw ShapeMismatch("gcn_forward: feature/weight dimension mismatch");
  Matrix<T> ah(h.rows, h.cols);
  for (int i = 0; i < kNumChannels; ++i)
    for (int k = 0; k < kNumChannels; ++k) {
      const T a = static_cast<T>(adj.at(i, k));
      for (std::size_t j = 0; j < h.cols; ++j)
        ah.at(static_cast<std::size_t>(i), j) +=
            a * h.at(static_cast<std::size_t>(k), j);
    }
  Matrix<T> out = matmul(ah, weight);
  if (relu)
    for (auto& v : out.data) v = std::max(v, T(0));
  return out;
}

// Column-wise mean over the 8 node rows: the graph-level embedding.
template <typename T>
std::vector<T> global_mean_pool(const Matrix<T>& h) {
  if (h.rows != kNumChannels)
    throw ShapeMismatch("global_mean_pool expects 8 node rows");
  std::vector<T> out(h.cols, T(0));
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) out[j] += h.at(i, j);
  for (auto& v : out) v /= static_cast<T>(kNumChannels);
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

enum class Mode { Train, Eval };

template <typename T>
struct SampleView {
  const Matrix<T>* features;            // 8 x input_dim
  const NormalizedAdjacency* norm_adj;  // ignored by Fcnn
  int label = 0;
};

namespace detail {

template <typename T>
struct LayerCache {
  Matrix<T> input;    // transform input
  Matrix<T> agg;      // GCN only: per-window adj * input
  Matrix<T> pre_bn;   // transform output, before normalization
  std::vector<T> xhat;
  std::vector<T> invstd;  // per column
  std::vector<std::uint8_t> relu_mask;
  std::vector<T> dropout_mask;  // empty when dropout off
  Matrix<T> output;
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

template <typename T>
void check_finite(const Matrix<T>& m, const char* where) {
  for (const T v : m.data)
    if (!std::isfinite(static_cast<double>(v)))
      throw NonFiniteActivation(std::string("non-finite activation in ") +
                                where);
}

template <typename T>
void batch_norm_forward(LayerCache<T>& cache, BatchNorm<T>& bn, Mode mode,
                        bool update_running) {
  Matrix<T>& z = cache.pre_bn;
  const std::size_t n = z.rows, c = z.cols;
  cache.xhat.resize(n * c);
  cache.invstd.resize(c);
  cache.output = Matrix<T>(n, c);
  for (std::size_t j = 0; j < c; ++j) {
    T mean, var;
    if (mode == Mode::Train) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += z.at(i, j);
      mu /= static_cast<double>(n);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = z.at(i, j) - mu;
        sq += d * d;
      }
      mean = static_cast<T>(mu);
      var = static_cast<T>(sq / static_cast<double>(n));
      if (update_running) {
        const double unbiased =
            n > 1 ? sq / static_cast<double>(n - 1) : sq / 1.0;
        bn.running_mean[j] = static_cast<T>((1.0 - kBnMomentum) *
                                                bn.running_mean[j] +
                                            kBnMomentum * mu);
        bn.running_var[j] = static_cast<T>(
            (1.0 - kBnMomentum) * bn.running_var[j] + kBnMomentum * unbiased);
      }
    } else {
      mean = bn.running_mean[j];
      var = bn.running_var[j];
    }
    const T inv = static_cast<T>(
        1.0 / std::sqrt(static_cast<double>(var) + kBnEps));
    cache.invstd[j] = inv;
    for (std::size_t i = 0; i < n; ++i) {
      const T xh = (z.at(i, j) - mean) * inv;
      cache.xhat[i * c + j] = xh;
      cache.output.at(i, j) = bn.gamma[j] * xh + bn.beta[j];
    }
  }
}

// Backward through train-mode batch norm (batch statistics participate in
// the gradient).
template <typename T>
Matrix<T> batch_norm_backward(const LayerCache<T>& cache,
                              const BatchNorm<T>& bn, const Matrix<T>& dy,
                              std::vector<T>& dgamma, std::vector<T>& dbeta) {
  const std::size_t n = dy.rows, c = dy.cols;
  Matrix<T> dx(n, c);
  for (std::size_t j = 0; j < c; ++j) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_dy += dy.at(i, j);
      sum_dy_xhat += static_cast<double>(dy.at(i, j)) * cache.xhat[i * c + j];
    }
    dgamma[j] += static_cast<T>(sum_dy_xhat);
    dbeta[j] += static_cast<T>(sum_dy);
    const double scale = static_cast<double>(bn.gamma[j]) * cache.invstd[j];
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      dx.at(i, j) = static_cast<T>(
          scale * (dy.at(i, j) - sum_dy * inv_n -
                   cache.xhat[i * c + j] * sum_dy_xhat * inv_n));
    }
  }
  return dx;
}

template <typename T>
void relu_dropout_forward(LayerCache<T>& cache, double dropout_rate,
                          Mode mode, Rng* dropout_rng) {
  Matrix<T>& x = cache.output;
  cache.relu_mask.assign(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.data[i] > T(0)) {
      cache.relu_mask[i] = 1;
    } else {
      x.data[i] = T(0);
    }
  }
  if (mode == Mode::Train && dropout_rate > 0.0 && dropout_rng != nullptr) {
    cache.dropout_mask.resize(x.size());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - dropout_rate));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool keep = dropout_rng->uniform() >= dropout_rate;
      cache.dropout_mask[i] = keep ? keep_scale : T(0);
      x.data[i] *= cache.dropout_mask[i];
    }
  }
}

template <typename T>
void relu_dropout_backward(const LayerCache<T>& cache, Matrix<T>& dy) {
  if (!cache.dropout_mask.empty())
    for (std::size_t i = 0; i < dy.size(); ++i)
      dy.data[i] *= cache.dropout_mask[i];
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!cache.relu_mask[i]) dy.data[i] = T(0);
}

// Per-window A_norm * H for a (batch*8) x d node matrix.
template <typename T>
Matrix<T> adj_aggregate(const Matrix<T>& h,
                        const std::vector<const NormalizedAdjacency*>& adjs) {
  Matrix<T> out(h.rows, h.cols);
  for (std::size_t w = 0; w < adjs.size(); ++w) {
    const std::size_t base = w * kNumChannels;
    const auto& adj = *adjs[w];
    for (int i = 0; i < kNumChannels; ++i)
      for (int k = 0; k < kNumChannels; ++k) {
        const T a = static_cast<T>(adj.at(i, k));
        const T* src = &h.data[(base + static_cast<std::size_t>(k)) * h.cols];
        T* dst = &out.data[(base + static_cast<std::size_t>(i)) * h.cols];
        for (std::size_t j = 0; j < h.cols; ++j) dst[j] += a * src[j];
      }
  }
  return out;
}

}  // namespace detail

template <typename T>
struct ForwardContext {
  std::vector<detail::LayerCache<T>> gcn_layers;
  std::vector<const NormalizedAdjacency*> adjacencies;
  Matrix<T> pooled;                 // batch x emb (GCNN) — the embeddings
  Matrix<T> flat_input;             // Fcnn input, batch x 48
  std::vector<detail::LayerCache<T>> hidden_layers;
  Matrix<T> classifier_input;
  Matrix<T> logits;                 // batch x 2
};

// Forward pass over a batch of window graphs. Train mode uses batch
// statistics and (seeded) dropout; Eval mode is pure.
template <typename T>
ForwardContext<T> forward_batch(ModelParams<T>& params,
                                const std::vector<SampleView<T>>& batch,
                                Mode mode, Rng* dropout_rng = nullptr,
                                bool update_running_stats = false) {
  const ModelSpec& spec = params.spec;
  const std::size_t b = batch.size();
  if (b == 0) throw ShapeMismatch("empty batch");
  ForwardContext<T> ctx;

  Matrix<T> x;
  if (spec.arch == Architecture::Fcnn) {
    ctx.flat_input = Matrix<T>(b, spec.input_dim);
    for (std::size_t w = 0; w < b; ++w) {
      const Matrix<T>& f = *batch[w].features;
      if (f.size() != spec.input_dim)
        throw ShapeMismatch("feature size does not match Fcnn input");
      for (std::size_t i = 0; i < f.size(); ++i)
        ctx.flat_input.at(w, i) = f.data[i];
    }
    x = ctx.flat_input;
  } else {
    ctx.adjacencies.reserve(b);
    Matrix<T> h(b * kNumChannels, spec.input_dim);
    for (std::size_t w = 0; w < b; ++w) {
      const Matrix<T>& f = *batch[w].features;
      if (f.rows != kNumChannels || f.cols != spec.input_dim)
        throw ShapeMismatch("feature matrix must be 8 x input_dim");
      if (batch[w].norm_adj == nullptr)
        throw ShapeMismatch("GCNN input requires an adjacency");
      ctx.adjacencies.push_back(batch[w].norm_adj);
      for (std::size_t i = 0; i < f.size(); ++i)
        h.data[w * kNumChannels * spec.input_dim + i] = f.data[i];
    }

    for (std::size_t l = 0; l < spec.gcn_dims.size(); ++l) {
      detail::LayerCache<T> cache;
      cache.input = std::move(h);
      cache.agg = detail::adj_aggregate(cache.input, ctx.adjacencies);
      cache.pre_bn = matmul(cache.agg, params.gcn_weights[l]);
      detail::check_finite(cache.pre_bn, "gcn layer");
      detail::batch_norm_forward(cache, params.gcn_norms[l], mode,
                                 update_running_stats);
      detail::relu_dropout_forward(cache, spec.gcn_dropout, mode, dropout_rng);
      h = cache.output;
      ctx.gcn_layers.push_back(std::move(cache));
    }

    // Global mean pool over the 8 nodes of each window.
    const std::size_t d = h.cols;
    ctx.pooled = Matrix<T>(b, d);
    for (std::size_t w = 0; w < b; ++w)
      for (int r = 0; r < kNumChannels; ++r)
        for (std::size_t j = 0; j < d; ++j)
          ctx.pooled.at(w, j) +=
              h.at(w * kNumChannels + static_cast<std::size_t>(r), j) /
              static_cast<T>(kNumChannels);
    x = ctx.pooled;
  }

  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    detail::LayerCache<T> cache;
    cache.input = std::move(x);
    cache.pre_bn = matmul(cache.input, params.linear_weights[l]);
    for (std::size_t i = 0; i < cache.pre_bn.rows; ++i)
      for (std::size_t j = 0; j < cache.pre_bn.cols; ++j)
        cache.pre_bn.at(i, j) += params.linear_biases[l][j];
    detail::check_finite(cache.pre_bn, "linear layer");
    detail::batch_norm_forward(cache, params.linear_norms[l], mode,
                               update_running_stats);
    detail::relu_dropout_forward(cache, spec.linear_dropout, mode,
                                 dropout_rng);
    x = cache.output;
    ctx.hidden_layers.push_back(std::move(cache));
  }

  ctx.classifier_input = x;
  const std::size_t last = spec.hidden_dims.size();
  ctx.logits = matmul(ctx.classifier_input, params.linear_weights[last]);
  for (std::size_t i = 0; i < ctx.logits.rows; ++i)
    for (std::size_t j = 0; j < ctx.logits.cols; ++j)
      ctx.logits.at(i, j) += params.linear_biases[last][j];

  for (const T v : ctx.logits.data)
    if (!std::isfinite(static_cast<double>(v)))
      throw NonFiniteActivation("non-finite logit");
  return ctx;
}

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  Matrix<T> p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    T mx = logits.at(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j)
      mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j)
      z += std::exp(static_cast<double>(logits.at(i, j) - mx));
    for (std::size_t j = 0; j < logits.cols; ++j)
      p.at(i, j) = static_cast<T>(
          std::exp(static_cast<double>(logits.at(i, j) - mx)) / z);
  }
  return p;
}

// Mean over the batch of w_label * (-log softmax(logits)[label]).
template <typename T>
double weighted_cross_entropy(const Matrix<T>& logits,
                              const std::vector<int>& labels,
                              const std::array<double, kNumClasses>& weights) {
  if (logits.rows != labels.size())
    throw ShapeMismatch("logits/labels size mismatch");
  const auto p = softmax(logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    const double py =
        std::max(static_cast<double>(p.at(i, static_cast<std::size_t>(y))),
                 1e-300);
    loss += weights[static_cast<std::size_t>(y)] * (-std::log(py));
  }
  return loss / static_cast<double>(logits.rows);
}

template <typename T>
Matrix<T> weighted_cross_entropy_grad(
    const Matrix<T>& logits, const std::vector<int>& labels,
    const std::array<double, kNumClasses>& weights) {
  const auto p = softmax(logits);
  Matrix<T> dlogits(logits.rows, logits.cols);
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    const double w = weights[static_cast<std::size_t>(y)] * inv_b;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      const double indicator = (static_cast<int>(j) == y) ? 1.0 : 0.0;
      dlogits.at(i, j) =
          static_cast<T>(w * (static_cast<double>(p.at(i, j)) - indicator));
    }
  }
  return dlogits;
}

// Reverse-mode gradients for every trainable tensor, given the forward
// cache and dL/dlogits.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params,
                        const ForwardContext<T>& ctx,
                        const Matrix<T>& dlogits) {
  const ModelSpec& spec = params.spec;
  ModelParams<T> grads = zeros_like(params);

  // Classifier.
  const std::size_t last = spec.hidden_dims.size();
  add_at_b(ctx.classifier_input, dlogits, grads.linear_weights[last]);
  for (std::size_t i = 0; i < dlogits.rows; ++i)
    for (std::size_t j = 0; j < dlogits.cols; ++j)
      grads.linear_biases[last][j] += dlogits.at(i, j);
  Matrix<T> dx = matmul_bt(dlogits, params.linear_weights[last]);

  // Hidden linear layers, in reverse.
  for (std::size_t li = spec.hidden_dims.size(); li-- > 0;) {
    const auto& cache = ctx.hidden_layers[li];
    detail::relu_dropout_backward(cache, dx);
    Matrix<T> dz = detail::batch_norm_backward(
        cache, params.linear_norms[li], dx, grads.linear_norms[li].gamma,
        grads.linear_norms[li].beta);
    add_at_b(cache.input, dz, grads.linear_weights[li]);
    for (std::size_t i = 0; i < dz.rows; ++i)
      for (std::size_t j = 0; j < dz.cols; ++j)
        grads.linear_biases[li][j] += dz.at(i, j);
    dx = matmul_bt(dz, params.linear_weights[li]);
  }

  if (spec.arch != Architecture::Fcnn) {
    // Un-pool: distribute each window gradient evenly over its 8 nodes.
    const std::size_t b = dx.rows, d = dx.cols;
    Matrix<T> dh(b * kNumChannels, d);
    for (std::size_t w = 0; w < b; ++w)
      for (int r = 0; r < kNumChannels; ++r)
        for (std::size_t j = 0; j < d; ++j)
          dh.at(w * kNumChannels + static_cast<std::size_t>(r), j) =
              dx.at(w, j) / static_cast<T>(kNumChannels);

    for (std::size_t li = spec.gcn_dims.size(); li-- > 0;) {
      const auto& cache = ctx.gcn_layers[li];
      detail::relu_dropout_backward(cache, dh);
      Matrix<T> dz = detail::batch_norm_backward(
          cache, params.gcn_norms[li], dh, grads.gcn_norms[li].gamma,
          grads.gcn_norms[li].beta);
      add_at_b(cache.agg, dz, grads.gcn_weights[li]);
      // dH = A^T (dZ W^T); A is symmetric.
      Matrix<T> dagg = matmul_bt(dz, params.gcn_weights[li]);
      dh = detail::adj_aggregate(dagg, ctx.adjacencies);
    }
  }

  for (auto* t : trainable_tensors(grads))
    for (const T v : *t)
      if (!std::isfinite(static_cast<double>(v)))
        throw NonFiniteGradient("non-finite gradient");
  return grads;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  ModelParams<T> m, v;
  long step = 0;

  explicit AdamState(const ModelParams<T>& params)
      : m(zeros_like(params)), v(zeros_like(params)) {}
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update of a flat tensor; `step` is the post-increment step count.
template <typename T>
void adam_update_tensor(std::vector<T>& p, const std::vector<T>& g,
                        std::vector<T>& m, std::vector<T>& v, long step,
                        double lr, const AdamConfig& cfg = {}) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    p[i] -= static_cast<T>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
  }
}

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads,
               AdamState<T>& state, double lr, const AdamConfig& cfg = {}) {
  state.step += 1;
  auto ps = trainable_tensors(params);
  const auto gs = trainable_tensors(grads);
  auto ms = trainable_tensors(state.m);
  auto vs = trainable_tensors(state.v);
  for (std::size_t t = 0; t < ps.size(); ++t)
    adam_update_tensor(*ps[t], *gs[t], *ms[t], *vs[t], state.step, lr, cfg);
}

// Learning rate after `epoch` epochs: decayed by 10x every decay_every.
inline double scheduled_lr(double initial_lr, std::size_t epoch,
                           std::size_t decay_every) {
  if (decay_every == 0) return initial_lr;
  return initial_lr * std::pow(0.1, static_cast<double>(epoch / decay_every));
}

// ---------------------------------------------------------------------------
// Single-window convenience API
// ---------------------------------------------------------------------------

template <typename T>
struct Prediction {
  std::array<T, kNumClasses> logits;
  double patient_prob = 0.0;  // Y_n
  std::vector<T> embedding;
};

template <typename T>
Prediction<T> model_forward(ModelParams<T>& params, const Matrix<T>& features,
                            const NormalizedAdjacency* adj, Mode mode,
                            Rng* dropout_rng = nullptr) {
  std::vector<SampleView<T>> batch{{&features, adj, 0}};
  auto ctx = forward_batch(params, batch, mode, dropout_rng, false);
  Prediction<T> pred;
  pred.logits = {ctx.logits.at(0, 0), ctx.logits.at(0, 1)};
  const auto probs = softmax(ctx.logits);
  pred.patient_prob =
      static_cast<double>(probs.at(0, static_cast<std::size_t>(kPatientClass)));
  if (params.spec.arch == Architecture::Fcnn) {
    const Matrix<T>& emb = ctx.classifier_input;
    pred.embedding.assign(emb.data.begin(), emb.data.end());
  } else {
    pred.embedding.assign(ctx.pooled.data.begin(), ctx.pooled.data.end());
  }
  return pred;
}

}  // namespace eeggraph
