// SPDX-License-Identifier: Apache-2.0
#include "mgtd/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mgtd/kernels.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                     " differ");
  }
}

[[noreturn]] void dimension_error(const char* what, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(what) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows() || b.ndim() != 2) dimension_error("matmul", a.shape(), b.shape());
  Tensor<T> c = Tensor<T>::matrix(a.rows(), b.cols());
  kernels::gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data(), false);
  return c;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.cols()) dimension_error("matmul_nt", a.shape(), b.shape());
  Tensor<T> c = Tensor<T>::matrix(a.rows(), b.rows());
  kernels::gemm_nt(a.rows(), b.rows(), a.cols(), a.data(), b.data(), c.data(), false);
  return c;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) dimension_error("matmul_tn", a.shape(), b.shape());
  Tensor<T> c = Tensor<T>::matrix(a.cols(), b.cols());
  kernels::gemm_tn(a.cols(), b.cols(), a.rows(), a.data(), b.data(), c.data(), false);
  return c;
}

template <typename T>
void matmul_tn_accumulate(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
    dimension_error("matmul_tn_accumulate", a.shape(), b.shape());
  }
  kernels::gemm_tn(a.cols(), b.cols(), a.rows(), a.data(), b.data(), c.data(), true);
}

template <typename T>
MatmulGrads<T> matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& dc) {
  if (dc.rows() != a.rows() || dc.cols() != b.cols()) dimension_error("matmul_backward", a.shape(), dc.shape());
  MatmulGrads<T> g;
  g.da = matmul_nt(dc, b);
  g.da.reshape(a.shape());
  g.db = matmul_tn(a, dc);
  g.db.reshape(b.shape());
  return g;
}

// --- pointwise -----------------------------------------------------------------

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}  // namespace

template <typename T>
T activate(Activation kind, T x) {
  switch (kind) {
    case Activation::gelu:
      return static_cast<T>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
    case Activation::tanh:
      return std::tanh(x);
    case Activation::sigmoid:
      return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
    case Activation::relu:
      return x > T(0) ? x : T(0);
  }
  return x;
}

template <typename T>
T activate_derivative(Activation kind, T x, T y) {
  switch (kind) {
    case Activation::gelu: {
      const double xd = x;
      const double cdf = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
      const double pdf = std::exp(-0.5 * xd * xd) * std::numbers::inv_sqrtpi * kInvSqrt2;
      return static_cast<T>(cdf + xd * pdf);
    }
    case Activation::tanh:
      return T(1) - y * y;
    case Activation::sigmoid:
      return y * (T(1) - y);
    case Activation::relu:
      return x > T(0) ? T(1) : T(0);
  }
  return T(1);
}

template <typename T>
Tensor<T> activate(Activation kind, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(kind, x[i]);
  return y;
}

template <typename T>
Tensor<T> activate_backward(Activation kind, const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) {
  require_same_shape(x, dy, "activate_backward");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dy[i] * activate_derivative(kind, x[i], y[i]);
  return dx;
}

// --- layer norm --------------------------------------------------------------------

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, LayerNormCache<T>* cache,
                     double eps) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d) dimension_error("layer_norm", x.shape(), gain.shape());
  const std::size_t rows = x.rows();
  Tensor<T> y(x.shape());
  Tensor<T> normalized(x.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = x.row(r);
    double mean = 0.0;
    for (auto v : xr) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (auto v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<T>(is);
    for (std::size_t c = 0; c < d; ++c) {
      const T n = static_cast<T>((xr[c] - mean) * is);
      normalized(r, c) = n;
      y(r, c) = n * gain[c] + bias[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& dy, const LayerNormCache<T>& cache, const Tensor<T>& gain,
                              Tensor<T>* dgain, Tensor<T>* dbias) {
  const auto& xhat = cache.normalized;
  require_same_shape(dy, xhat, "layer_norm_backward");
  const std::size_t d = dy.cols();
  const std::size_t rows = dy.rows();
  Tensor<T> dx(dy.shape());
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean_g = 0.0;
    double mean_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double g = static_cast<double>(dy(r, c)) * gain[c];
      dxhat[c] = g;
      mean_g += g;
      mean_gx += g * xhat(r, c);
      if (dgain) (*dgain)[c] += dy(r, c) * xhat(r, c);
      if (dbias) (*dbias)[c] += dy(r, c);
    }
    mean_g /= static_cast<double>(d);
    mean_gx /= static_cast<double>(d);
    const double is = cache.inv_std[r];
    for (std::size_t c = 0; c < d; ++c) {
      dx(r, c) = static_cast<T>(is * (dxhat[c] - mean_g - xhat(r, c) * mean_gx));
    }
  }
  return dx;
}

// --- softmax / cross-entropy ------------------------------------------------------------

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  Tensor<T> p(logits.shape());
  const std::size_t c = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (auto v : z) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (auto v : z) sum += std::exp(v - mx);
    for (std::size_t j = 0; j < c; ++j) p(r, j) = static_cast<T>(std::exp(z[j] - mx) / sum);
  }
  return p;
}

template <typename T>
CrossEntropy<T> softmax_ce(const Tensor<T>& logits, std::span<const int> labels, double normalizer) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) {
    throw ShapeError("softmax_ce: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_string(logits.shape()));
  }
  if (normalizer <= 0.0) normalizer = static_cast<double>(n);
  CrossEntropy<T> out;
  out.row_losses.resize(n);
  out.dlogits = Tensor<T>(logits.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw DataError("softmax_ce: label " + std::to_string(label) + " out of range for " + std::to_string(c) +
                      " classes");
    }
    auto z = logits.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (auto v : z) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (auto v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    const double loss = lse - static_cast<double>(z[label]);
    out.row_losses[r] = loss;
    total += loss;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(z[j] - lse);
      const double target = static_cast<int>(j) == label ? 1.0 : 0.0;
      out.dlogits(r, j) = static_cast<T>((p - target) / normalizer);
    }
  }
  out.loss = n == 0 ? 0.0 : total / normalizer;
  return out;
}

// --- dropout ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed, bool training, Tensor<T>* mask) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) {
    if (mask) *mask = Tensor<T>();
    return x;
  }
  Rng rng(seed);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  Tensor<T> m(x.shape());
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.bernoulli(p) ? T(0) : scale;
    y[i] = x[i] * m[i];
  }
  if (mask) *mask = std::move(m);
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const Tensor<T>& mask) {
  if (mask.empty()) return dy;
  require_same_shape(dy, mask, "dropout_backward");
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
  return dx;
}

// --- attention --------------------------------------------------------------------------

bool attention_allowed(std::size_t i, std::size_t j, std::span<const std::uint8_t> key_mask,
                       const AttentionSpec& spec) {
  if (!key_mask.empty() && key_mask[j] == 0) return false;
  if (spec.causal && j > i) return false;
  if (spec.window > 0) {
    const std::size_t half = (spec.window - 1) / 2;
    const std::size_t dist = i > j ? i - j : j - i;
    if (dist > half) return false;
  }
  return true;
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::span<const std::uint8_t> key_mask,
                    const AttentionSpec& spec, AttentionCache<T>* cache) {
  if (q.cols() != k.cols() || q.rows() != k.rows() || k.rows() != v.rows()) {
    dimension_error("attention", q.shape(), k.shape());
  }
  const std::size_t n = q.rows();
  if (!key_mask.empty() && key_mask.size() != n) throw ShapeError("attention: key mask length mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor<T> scores = matmul_nt(q, k);
  Tensor<T> probs = Tensor<T>::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (attention_allowed(i, j, key_mask, spec)) mx = std::max(mx, scores(i, j) * scale);
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (attention_allowed(i, j, key_mask, spec)) sum += std::exp(scores(i, j) * scale - mx);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (attention_allowed(i, j, key_mask, spec)) {
        probs(i, j) = static_cast<T>(std::exp(scores(i, j) * scale - mx) / sum);
      }
    }
  }
  Tensor<T> out = matmul(probs, v);
  if (cache) cache->probs = std::move(probs);
  return out;
}

template <typename T>
AttentionGrads<T> attention_backward(const Tensor<T>& dout, const Tensor<T>& q, const Tensor<T>& k,
                                     const Tensor<T>& v, const AttentionCache<T>& cache) {
  const auto& probs = cache.probs;
  const std::size_t n = q.rows();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.cols())));
  AttentionGrads<T> g;
  Tensor<T> dprobs = matmul_nt(dout, v);
  g.dv = matmul_tn(probs, dout);
  Tensor<T> dscores = Tensor<T>::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(probs(i, j)) * dprobs(i, j);
    for (std::size_t j = 0; j < n; ++j) {
      dscores(i, j) = static_cast<T>(probs(i, j) * (dprobs(i, j) - dot)) * scale;
    }
  }
  g.dq = matmul(dscores, k);
  g.dk = matmul_tn(dscores, q);
  return g;
}

// --- helpers -----------------------------------------------------------------------------

template <typename T>
Tensor<T> slice_columns(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  Tensor<T> out = Tensor<T>::matrix(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, begin + c);
  }
  return out;
}

template <typename T>
void add_columns(Tensor<T>& dst, const Tensor<T>& src, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) += src(r, c);
  }
}

template <typename T>
void add_row_bias(Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t d = x.cols();
  if (bias.size() != d) dimension_error("add_row_bias", x.shape(), bias.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) x(r, c) += bias[c];
  }
}

template <typename T>
void accumulate_column_sums(const Tensor<T>& x, Tensor<T>& acc) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) acc[c] += x(r, c);
  }
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) dimension_error("add_inplace", a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

#define MGTD_INSTANTIATE(T)                                                                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> matmul_tn(const Tensor<T>&, const Tensor<T>&);                                             \
  template void matmul_tn_accumulate(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                           \
  template MatmulGrads<T> matmul_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template T activate(Activation, T);                                                                           \
  template T activate_derivative(Activation, T, T);                                                             \
  template Tensor<T> activate(Activation, const Tensor<T>&);                                                    \
  template Tensor<T> activate_backward(Activation, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, LayerNormCache<T>*,       \
                                double);                                                                        \
  template Tensor<T> layer_norm_backward(const Tensor<T>&, const LayerNormCache<T>&, const Tensor<T>&,          \
                                         Tensor<T>*, Tensor<T>*);                                               \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                                            \
  template CrossEntropy<T> softmax_ce(const Tensor<T>&, std::span<const int>, double);                          \
  template Tensor<T> dropout(const Tensor<T>&, double, std::uint64_t, bool, Tensor<T>*);                        \
  template Tensor<T> dropout_backward(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                            \
                               std::span<const std::uint8_t>, const AttentionSpec&, AttentionCache<T>*);        \
  template AttentionGrads<T> attention_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                                const Tensor<T>&, const AttentionCache<T>&);                    \
  template Tensor<T> slice_columns(const Tensor<T>&, std::size_t, std::size_t);                                 \
  template void add_columns(Tensor<T>&, const Tensor<T>&, std::size_t);                                         \
  template void add_row_bias(Tensor<T>&, const Tensor<T>&);                                                     \
  template void accumulate_column_sums(const Tensor<T>&, Tensor<T>&);                                           \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);

MGTD_INSTANTIATE(float)
MGTD_INSTANTIATE(double)

#undef MGTD_INSTANTIATE

}  // namespace mgtd
