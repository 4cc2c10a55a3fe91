// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mgtd/tensor.hpp"

// Differentiable primitives on 2-D tensors. Every forward has a matching
// hand-written backward; backward functions that own parameter gradients
// accumulate into the supplied buffers instead of overwriting them.

namespace mgtd {

// --- matrix products -------------------------------------------------------

/// C = A * B.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// C = A * B^T.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

/// C = A^T * B.
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b);

/// c += A^T * B.
template <typename T>
void matmul_tn_accumulate(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);

template <typename T>
struct MatmulGrads {
  Tensor<T> da;
  Tensor<T> db;
};

/// dA = dC * B^T, dB = A^T * dC.
template <typename T>
MatmulGrads<T> matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& dc);

// --- pointwise ---------------------------------------------------------------

enum class Activation { gelu, tanh, sigmoid, relu };

template <typename T>
T activate(Activation kind, T x);

/// Derivative expressed through the input x and output y.
template <typename T>
T activate_derivative(Activation kind, T x, T y);

template <typename T>
Tensor<T> activate(Activation kind, const Tensor<T>& x);

template <typename T>
Tensor<T> activate_backward(Activation kind, const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy);

// --- layer norm ----------------------------------------------------------------

template <typename T>
struct LayerNormCache {
  Tensor<T> normalized;     // (x - mean) / std per row
  std::vector<T> inv_std;   // one per row
};

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, LayerNormCache<T>* cache,
                     double eps = 1e-5);

/// Returns dx. dgain/dbias, when non-null, are accumulated.
template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& dy, const LayerNormCache<T>& cache, const Tensor<T>& gain,
                              Tensor<T>* dgain, Tensor<T>* dbias);

// --- softmax / cross-entropy -----------------------------------------------------

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

template <typename T>
struct CrossEntropy {
  double loss = 0.0;                // mean over rows (or over `normalizer`)
  std::vector<double> row_losses;   // -log softmax(row)[label]
  Tensor<T> dlogits;                // (softmax - onehot) / normalizer
};

/// Softmax cross-entropy over rows of an n x C logit matrix. `normalizer`
/// defaults to n.
template <typename T>
CrossEntropy<T> softmax_ce(const Tensor<T>& logits, std::span<const int> labels, double normalizer = 0.0);

// --- dropout ---------------------------------------------------------------------

/// Inverted dropout. In training mode each element is zeroed with probability
/// p and survivors scaled by 1/(1-p); the mask depends only on `seed`. When
/// `mask` is non-null it receives the per-element multiplier (empty when the
/// call was an identity).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed, bool training, Tensor<T>* mask);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const Tensor<T>& mask);

// --- attention ----------------------------------------------------------------------

struct AttentionSpec {
  std::size_t window = 0;  // 0 = full attention, otherwise odd width
  bool causal = false;
};

/// Whether query i may attend to key j. An empty key mask allows every key.
bool attention_allowed(std::size_t i, std::size_t j, std::span<const std::uint8_t> key_mask, const AttentionSpec& spec);

template <typename T>
struct AttentionCache {
  Tensor<T> probs;  // T x T, zero where attention is disallowed
};

/// Scaled dot-product attention for one head. Rows with no admissible key
/// produce zeros.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::span<const std::uint8_t> key_mask,
                    const AttentionSpec& spec, AttentionCache<T>* cache);

template <typename T>
struct AttentionGrads {
  Tensor<T> dq;
  Tensor<T> dk;
  Tensor<T> dv;
};

template <typename T>
AttentionGrads<T> attention_backward(const Tensor<T>& dout, const Tensor<T>& q, const Tensor<T>& k,
                                     const Tensor<T>& v, const AttentionCache<T>& cache);

// --- small helpers --------------------------------------------------------------------

/// Copies columns [begin, begin + count) into a new rows x count tensor.
template <typename T>
Tensor<T> slice_columns(const Tensor<T>& x, std::size_t begin, std::size_t count);

/// dst[:, begin : begin + src.cols()] += src.
template <typename T>
void add_columns(Tensor<T>& dst, const Tensor<T>& src, std::size_t begin);

/// x[r, :] += bias for every row.
template <typename T>
void add_row_bias(Tensor<T>& x, const Tensor<T>& bias);

/// acc[c] += sum over rows of x[:, c].
template <typename T>
void accumulate_column_sums(const Tensor<T>& x, Tensor<T>& acc);

/// a += b elementwise.
template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b);

}  // namespace mgtd
