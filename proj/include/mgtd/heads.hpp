// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mgtd/linear.hpp"
#include "mgtd/tensor.hpp"

namespace mgtd {

class Rng;

enum class HeadKind { linear, bilstm, bigru };
enum class Pooling { cls, last_hidden };
enum class CellKind { lstm, gru };

struct HeadConfig {
  HeadKind kind = HeadKind::bilstm;
  std::size_t hidden_size = 256;
  std::size_t num_layers = 2;
  double dropout = 0.2;
  Pooling pooling = Pooling::last_hidden;

  void validate() const;
  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

/// W [G*h x in], U [G*h x h] and a single bias [G*h]. G = 4 (i, f, g, o) for
/// LSTM, 3 (z, r, n) for GRU.
template <typename T>
struct CellParams {
  CellKind kind = CellKind::lstm;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Parameter<T> input_weight;
  Parameter<T> recurrent_weight;
  Parameter<T> bias;

  CellParams() = default;
  CellParams(const std::string& name, CellKind kind, std::size_t input_size, std::size_t hidden_size);

  std::size_t gates() const noexcept { return kind == CellKind::lstm ? 4 : 3; }
  void init(Rng& rng);
  void collect(ParamRefs<T>& out);
  void collect(std::vector<const Parameter<T>*>& out) const;
};

std::vector<ParamSpec> cell_layout(const std::string& name, CellKind kind, std::size_t input_size,
                                   std::size_t hidden_size);

// --- single-step cells -------------------------------------------------------------

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

template <typename T>
struct LstmCellCache {
  Tensor<T> x, h_prev, c_prev;
  Tensor<T> gates;  // activated i, f, g, o
  Tensor<T> c, tanh_c;
};

template <typename T>
struct LstmCellGrads {
  Tensor<T> dx, dh_prev, dc_prev;
};

/// c = f*c_prev + i*g, h = o*tanh(c) with gates from W x + U h_prev + b.
template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const Tensor<T>& c_prev, const CellParams<T>& p,
                       LstmCellCache<T>* cache);

template <typename T>
LstmCellGrads<T> lstm_cell_backward(const Tensor<T>& dh, const Tensor<T>& dc, const LstmCellCache<T>& cache,
                                    CellParams<T>& p);

template <typename T>
struct GruCellCache {
  Tensor<T> x, h_prev;
  Tensor<T> gates;      // activated z, r, n
  Tensor<T> recurrent;  // U h_prev
};

template <typename T>
struct GruCellGrads {
  Tensor<T> dx, dh_prev;
};

/// n = tanh(W_n x + b_n + r*(U_n h_prev)), h = (1-z)*n + z*h_prev.
template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const CellParams<T>& p, GruCellCache<T>* cache);

template <typename T>
GruCellGrads<T> gru_cell_backward(const Tensor<T>& dh, const GruCellCache<T>& cache, CellParams<T>& p);

// --- sequences -----------------------------------------------------------------------

/// One direction of a recurrent layer over an n x in sequence. Output rows
/// stay aligned with input rows regardless of direction.
template <typename T>
class RecurrentLayer {
 public:
  struct Cache {
    Tensor<T> input;
    Tensor<T> gates;      // n x G*h, activated
    Tensor<T> recurrent;  // n x 3h, GRU only: U h_prev
    Tensor<T> cell;       // n x h, LSTM only
    Tensor<T> tanh_cell;  // n x h, LSTM only
    Tensor<T> hidden;     // n x h
  };

  RecurrentLayer() = default;
  RecurrentLayer(const std::string& name, CellKind kind, std::size_t input_size, std::size_t hidden_size,
                 bool reverse);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& d_hidden, const Cache& cache, bool need_input_grad);

  CellParams<T> cell;
  bool reverse = false;
};

/// Classification head over encoder states.
///
/// Recurrent kinds run `num_layers` bidirectional layers over the real
/// tokens, with dropout between layers, and pool [h_fwd(last), h_bwd(first)]
/// (2h values) into a 2-way classifier. The linear kind classifies the first
/// (CLS) state. Dropout is also applied to the pooled vector.
template <typename T>
class Head {
 public:
  struct LayerCache {
    typename RecurrentLayer<T>::Cache forward, backward;
    Tensor<T> dropout_mask;
  };

  struct Cache {
    std::size_t rows = 0;
    std::size_t real_len = 0;
    std::vector<LayerCache> layers;
    Tensor<T> pooled;  // before dropout
    Tensor<T> pooled_mask;
    typename Linear<T>::Cache classifier;
  };

  Head(const HeadConfig& config, std::size_t input_dim, std::uint64_t seed);

  const HeadConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t pooled_dim() const noexcept;

  /// 1 x 2 logits. Dropout is active exactly when `dropout_rng` is non-null.
  Tensor<T> forward(const Tensor<T>& hidden, std::size_t real_len, Cache* cache, Rng* dropout_rng) const;

  /// Returns d(hidden) with hidden's shape when requested.
  Tensor<T> backward(const Tensor<T>& dlogits, const Cache& cache, bool need_input_grad);

  ParamRefs<T> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  std::vector<RecurrentLayer<T>>& forward_layers() { return forward_layers_; }
  std::vector<RecurrentLayer<T>>& backward_layers() { return backward_layers_; }
  Linear<T>& classifier() { return classifier_; }

 private:
  HeadConfig config_;
  std::size_t input_dim_;
  std::vector<RecurrentLayer<T>> forward_layers_;
  std::vector<RecurrentLayer<T>> backward_layers_;
  Linear<T> classifier_;
};

std::vector<ParamSpec> head_layout(const HeadConfig& config, std::size_t input_dim);

}  // namespace mgtd
