// SPDX-License-Identifier: Apache-2.0
#include "mgtd/heads.hpp"

#include <cmath>

#include "mgtd/errors.hpp"
#include "mgtd/kernels.hpp"
#include "mgtd/ops.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

void HeadConfig::validate() const {
  if (hidden_size == 0 && kind != HeadKind::linear) throw ConfigError("head hidden_size must be at least 1");
  if (num_layers == 0 && kind != HeadKind::linear) throw ConfigError("head num_layers must be at least 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("head dropout must lie in [0, 1)");
  if (kind == HeadKind::linear && pooling != Pooling::cls) throw ConfigError("linear head requires cls pooling");
  if (kind != HeadKind::linear && pooling != Pooling::last_hidden) {
    throw ConfigError("recurrent heads pool the last hidden state");
  }
}

namespace {

template <typename T>
T sigmoid(T x) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

// out[r] += sum_c m[r, c] * v[c] for an R x C matrix.
template <typename T>
void matvec_add(const T* m, const T* v, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    T sum = T(0);
    for (std::size_t c = 0; c < cols; ++c) sum += m[r * cols + c] * v[c];
    out[r] += sum;
  }
}

// out[c] += sum_r m[r, c] * v[r] for an R x C matrix.
template <typename T>
void matvec_t_add(const T* m, const T* v, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T vr = v[r];
    for (std::size_t c = 0; c < cols; ++c) out[c] += m[r * cols + c] * vr;
  }
}

// ax: W x + b (4h). Writes activated gates (4h), c, tanh(c) and h.
template <typename T>
void lstm_step(const T* ax, const T* h_prev, const T* c_prev, const T* u, std::size_t h, T* gates, T* c, T* tanh_c,
               T* h_out) {
  for (std::size_t j = 0; j < 4 * h; ++j) gates[j] = ax[j];
  matvec_add(u, h_prev, 4 * h, h, gates);
  for (std::size_t j = 0; j < h; ++j) {
    const T i = sigmoid(gates[j]);
    const T f = sigmoid(gates[h + j]);
    const T g = std::tanh(gates[2 * h + j]);
    const T o = sigmoid(gates[3 * h + j]);
    gates[j] = i;
    gates[h + j] = f;
    gates[2 * h + j] = g;
    gates[3 * h + j] = o;
    c[j] = f * c_prev[j] + i * g;
    tanh_c[j] = std::tanh(c[j]);
    h_out[j] = o * tanh_c[j];
  }
}

// Gradient w.r.t. the gate pre-activation (4h) and c_prev. dc is the gradient
// flowing into c from the next step.
template <typename T>
void lstm_step_backward(const T* dh, const T* dc, const T* gates, const T* c_prev, const T* tanh_c, std::size_t h,
                        T* da, T* dc_prev) {
  for (std::size_t j = 0; j < h; ++j) {
    const T i = gates[j];
    const T f = gates[h + j];
    const T g = gates[2 * h + j];
    const T o = gates[3 * h + j];
    const T tc = tanh_c[j];
    const T dct = dc[j] + dh[j] * o * (T(1) - tc * tc);
    da[j] = dct * g * i * (T(1) - i);
    da[h + j] = dct * c_prev[j] * f * (T(1) - f);
    da[2 * h + j] = dct * i * (T(1) - g * g);
    da[3 * h + j] = dh[j] * tc * o * (T(1) - o);
    dc_prev[j] = dct * f;
  }
}

// ax: W x + b (3h). Writes recurrent U h_prev (3h), activated gates and h.
template <typename T>
void gru_step(const T* ax, const T* h_prev, const T* u, std::size_t h, T* recurrent, T* gates, T* h_out) {
  for (std::size_t j = 0; j < 3 * h; ++j) recurrent[j] = T(0);
  matvec_add(u, h_prev, 3 * h, h, recurrent);
  for (std::size_t j = 0; j < h; ++j) {
    const T z = sigmoid(ax[j] + recurrent[j]);
    const T r = sigmoid(ax[h + j] + recurrent[h + j]);
    const T n = std::tanh(ax[2 * h + j] + r * recurrent[2 * h + j]);
    gates[j] = z;
    gates[h + j] = r;
    gates[2 * h + j] = n;
    h_out[j] = (T(1) - z) * n + z * h_prev[j];
  }
}

// dax: gradient w.r.t. W x + b; drec: w.r.t. U h_prev; dh_direct: the part of
// dh_prev that bypasses U.
template <typename T>
void gru_step_backward(const T* dh, const T* h_prev, const T* gates, const T* recurrent, std::size_t h, T* dax,
                       T* drec, T* dh_direct) {
  for (std::size_t j = 0; j < h; ++j) {
    const T z = gates[j];
    const T r = gates[h + j];
    const T n = gates[2 * h + j];
    const T dz = dh[j] * (h_prev[j] - n);
    const T dn = dh[j] * (T(1) - z);
    dh_direct[j] = dh[j] * z;
    const T dan = dn * (T(1) - n * n);
    const T dr = dan * recurrent[2 * h + j];
    const T daz = dz * z * (T(1) - z);
    const T dar = dr * r * (T(1) - r);
    dax[j] = daz;
    dax[h + j] = dar;
    dax[2 * h + j] = dan;
    drec[j] = daz;
    drec[h + j] = dar;
    drec[2 * h + j] = dan * r;
  }
}

template <typename T>
Tensor<T> input_projection(const Tensor<T>& x, const CellParams<T>& p) {
  Tensor<T> ax = matmul_nt(x, p.input_weight.value);
  add_row_bias(ax, p.bias.value);
  return ax;
}

template <typename T>
void check_cell_inputs(const Tensor<T>& x, const Tensor<T>& h_prev, const CellParams<T>& p) {
  if (x.size() != p.input_size || h_prev.size() != p.hidden_size) {
    throw ShapeError("cell: input " + shape_string(x.shape()) + " / state " + shape_string(h_prev.shape()) +
                     " do not match cell (" + std::to_string(p.input_size) + ", " + std::to_string(p.hidden_size) +
                     ")");
  }
}

// Accumulates W, b from dax (rows x G*h) against inputs x (rows x in), and
// U from drec against previous states.
template <typename T>
void accumulate_cell_grads(CellParams<T>& p, const Tensor<T>& dax, const Tensor<T>& x, const Tensor<T>& drec,
                           const Tensor<T>& h_prev) {
  if (!p.input_weight.frozen) matmul_tn_accumulate(dax, x, p.input_weight.grad);
  if (!p.bias.frozen) accumulate_column_sums(dax, p.bias.grad);
  if (!p.recurrent_weight.frozen) matmul_tn_accumulate(drec, h_prev, p.recurrent_weight.grad);
}

}  // namespace

// --- CellParams ----------------------------------------------------------------------

template <typename T>
CellParams<T>::CellParams(const std::string& name, CellKind kind_, std::size_t input_size_, std::size_t hidden_size_)
    : kind(kind_), input_size(input_size_), hidden_size(hidden_size_) {
  const std::size_t g = gates() * hidden_size;
  input_weight = Parameter<T>(name + ".input_weight", {g, input_size});
  recurrent_weight = Parameter<T>(name + ".recurrent_weight", {g, hidden_size});
  bias = Parameter<T>(name + ".bias", {g});
}

template <typename T>
void CellParams<T>::init(Rng& rng) {
  init_uniform(input_weight.value, rng, 1.0 / std::sqrt(static_cast<double>(input_size)));
  init_uniform(recurrent_weight.value, rng, 1.0 / std::sqrt(static_cast<double>(hidden_size)));
  bias.value.fill(T(0));
}

template <typename T>
void CellParams<T>::collect(ParamRefs<T>& out) {
  out.push_back(&input_weight);
  out.push_back(&recurrent_weight);
  out.push_back(&bias);
}

template <typename T>
void CellParams<T>::collect(std::vector<const Parameter<T>*>& out) const {
  out.push_back(&input_weight);
  out.push_back(&recurrent_weight);
  out.push_back(&bias);
}

std::vector<ParamSpec> cell_layout(const std::string& name, CellKind kind, std::size_t input_size,
                                   std::size_t hidden_size) {
  const std::size_t g = (kind == CellKind::lstm ? 4 : 3) * hidden_size;
  return {{name + ".input_weight", {g, input_size}, false},
          {name + ".recurrent_weight", {g, hidden_size}, false},
          {name + ".bias", {g}, false}};
}

// --- single-step cells ------------------------------------------------------------------

template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const Tensor<T>& c_prev, const CellParams<T>& p,
                       LstmCellCache<T>* cache) {
  check_cell_inputs(x, h_prev, p);
  const std::size_t h = p.hidden_size;
  Tensor<T> xr = x;
  xr.reshape({1, p.input_size});
  Tensor<T> ax = input_projection(xr, p);
  Tensor<T> gates({4 * h});
  LstmState<T> state{Tensor<T>({h}), Tensor<T>({h})};
  Tensor<T> tanh_c({h});
  lstm_step(ax.data(), h_prev.data(), c_prev.data(), p.recurrent_weight.value.data(), h, gates.data(),
            state.c.data(), tanh_c.data(), state.h.data());
  if (cache) {
    cache->x = xr;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->gates = std::move(gates);
    cache->c = state.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return state;
}

template <typename T>
LstmCellGrads<T> lstm_cell_backward(const Tensor<T>& dh, const Tensor<T>& dc, const LstmCellCache<T>& cache,
                                    CellParams<T>& p) {
  const std::size_t h = p.hidden_size;
  Tensor<T> da = Tensor<T>::matrix(1, 4 * h);
  LstmCellGrads<T> g{Tensor<T>(), Tensor<T>({h}), Tensor<T>({h})};
  lstm_step_backward(dh.data(), dc.data(), cache.gates.data(), cache.c_prev.data(), cache.tanh_c.data(), h, da.data(),
                     g.dc_prev.data());
  matvec_t_add(p.recurrent_weight.value.data(), da.data(), 4 * h, h, g.dh_prev.data());
  Tensor<T> hp = cache.h_prev;
  hp.reshape({1, h});
  accumulate_cell_grads(p, da, cache.x, da, hp);
  g.dx = matmul(da, p.input_weight.value);
  g.dx.reshape({p.input_size});
  return g;
}

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const CellParams<T>& p, GruCellCache<T>* cache) {
  check_cell_inputs(x, h_prev, p);
  const std::size_t h = p.hidden_size;
  Tensor<T> xr = x;
  xr.reshape({1, p.input_size});
  Tensor<T> ax = input_projection(xr, p);
  Tensor<T> recurrent({3 * h});
  Tensor<T> gates({3 * h});
  Tensor<T> out({h});
  gru_step(ax.data(), h_prev.data(), p.recurrent_weight.value.data(), h, recurrent.data(), gates.data(), out.data());
  if (cache) {
    cache->x = xr;
    cache->h_prev = h_prev;
    cache->gates = std::move(gates);
    cache->recurrent = std::move(recurrent);
  }
  return out;
}

template <typename T>
GruCellGrads<T> gru_cell_backward(const Tensor<T>& dh, const GruCellCache<T>& cache, CellParams<T>& p) {
  const std::size_t h = p.hidden_size;
  Tensor<T> dax = Tensor<T>::matrix(1, 3 * h);
  Tensor<T> drec = Tensor<T>::matrix(1, 3 * h);
  GruCellGrads<T> g{Tensor<T>(), Tensor<T>({h})};
  gru_step_backward(dh.data(), cache.h_prev.data(), cache.gates.data(), cache.recurrent.data(), h, dax.data(),
                    drec.data(), g.dh_prev.data());
  matvec_t_add(p.recurrent_weight.value.data(), drec.data(), 3 * h, h, g.dh_prev.data());
  Tensor<T> hp = cache.h_prev;
  hp.reshape({1, h});
  accumulate_cell_grads(p, dax, cache.x, drec, hp);
  g.dx = matmul(dax, p.input_weight.value);
  g.dx.reshape({p.input_size});
  return g;
}

// --- RecurrentLayer -------------------------------------------------------------------------

template <typename T>
RecurrentLayer<T>::RecurrentLayer(const std::string& name, CellKind kind, std::size_t input_size,
                                  std::size_t hidden_size, bool reverse_)
    : cell(name, kind, input_size, hidden_size), reverse(reverse_) {}

template <typename T>
Tensor<T> RecurrentLayer<T>::forward(const Tensor<T>& x, Cache* cache) const {
  const std::size_t n = x.rows();
  const std::size_t h = cell.hidden_size;
  const std::size_t g = cell.gates() * h;
  if (x.cols() != cell.input_size) {
    throw ShapeError("recurrent layer " + cell.input_weight.name + ": input " + shape_string(x.shape()));
  }
  Tensor<T> ax = input_projection(x, cell);
  Tensor<T> gates = Tensor<T>::matrix(n, g);
  Tensor<T> hidden = Tensor<T>::matrix(n, h);
  Tensor<T> recurrent, c, tanh_c;
  if (cell.kind == CellKind::lstm) {
    c = Tensor<T>::matrix(n, h);
    tanh_c = Tensor<T>::matrix(n, h);
  } else {
    recurrent = Tensor<T>::matrix(n, g);
  }
  const std::vector<T> zeros(h, T(0));
  const T* u = cell.recurrent_weight.value.data();
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reverse ? n - 1 - s : s;
    const T* h_prev = s == 0 ? zeros.data() : hidden.row(reverse ? t + 1 : t - 1).data();
    if (cell.kind == CellKind::lstm) {
      const T* c_prev = s == 0 ? zeros.data() : c.row(reverse ? t + 1 : t - 1).data();
      lstm_step(ax.row(t).data(), h_prev, c_prev, u, h, gates.row(t).data(), c.row(t).data(), tanh_c.row(t).data(),
                hidden.row(t).data());
    } else {
      gru_step(ax.row(t).data(), h_prev, u, h, recurrent.row(t).data(), gates.row(t).data(), hidden.row(t).data());
    }
  }
  if (cache) {
    cache->input = x;
    cache->gates = std::move(gates);
    cache->recurrent = std::move(recurrent);
    cache->cell = std::move(c);
    cache->tanh_cell = std::move(tanh_c);
    cache->hidden = hidden;
  }
  return hidden;
}

template <typename T>
Tensor<T> RecurrentLayer<T>::backward(const Tensor<T>& d_hidden, const Cache& cache, bool need_input_grad) {
  const std::size_t n = d_hidden.rows();
  const std::size_t h = cell.hidden_size;
  const std::size_t g = cell.gates() * h;
  Tensor<T> dax = Tensor<T>::matrix(n, g);
  Tensor<T> drec = Tensor<T>::matrix(n, g);
  Tensor<T> h_prev_all = Tensor<T>::matrix(n, h);
  std::vector<T> dh_carry(h, T(0)), dc_carry(h, T(0)), dh(h), dc_prev(h), dh_direct(h);
  const std::vector<T> zeros(h, T(0));
  const T* u = cell.recurrent_weight.value.data();

  for (std::size_t s = n; s-- > 0;) {
    const std::size_t t = reverse ? n - 1 - s : s;
    const bool first = s == 0;
    const std::size_t prev = reverse ? t + 1 : t - 1;
    const T* h_prev = first ? zeros.data() : cache.hidden.row(prev).data();
    std::copy(h_prev, h_prev + h, h_prev_all.row(t).data());
    for (std::size_t j = 0; j < h; ++j) dh[j] = d_hidden(t, j) + dh_carry[j];

    if (cell.kind == CellKind::lstm) {
      const T* c_prev = first ? zeros.data() : cache.cell.row(prev).data();
      lstm_step_backward(dh.data(), dc_carry.data(), cache.gates.row(t).data(), c_prev, cache.tanh_cell.row(t).data(),
                         h, dax.row(t).data(), dc_prev.data());
      std::copy(dax.row(t).begin(), dax.row(t).end(), drec.row(t).begin());
      std::fill(dh_carry.begin(), dh_carry.end(), T(0));
      matvec_t_add(u, drec.row(t).data(), g, h, dh_carry.data());
      dc_carry = dc_prev;
    } else {
      gru_step_backward(dh.data(), h_prev, cache.gates.row(t).data(), cache.recurrent.row(t).data(), h,
                        dax.row(t).data(), drec.row(t).data(), dh_direct.data());
      dh_carry = dh_direct;
      matvec_t_add(u, drec.row(t).data(), g, h, dh_carry.data());
    }
  }

  accumulate_cell_grads(cell, dax, cache.input, drec, h_prev_all);
  if (!need_input_grad) return {};
  return matmul(dax, cell.input_weight.value);
}

// --- Head ------------------------------------------------------------------------------------

namespace {

std::string layer_name(std::size_t l, bool backward) {
  return "head.layer" + std::to_string(l) + (backward ? ".backward" : ".forward");
}

CellKind cell_kind(HeadKind kind) { return kind == HeadKind::bigru ? CellKind::gru : CellKind::lstm; }

}  // namespace

template <typename T>
Head<T>::Head(const HeadConfig& config, std::size_t input_dim, std::uint64_t seed)
    : config_(config), input_dim_(input_dim) {
  config_.validate();
  Rng rng(derive_seed(seed, "head"));
  if (config_.kind != HeadKind::linear) {
    const CellKind kind = cell_kind(config_.kind);
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
      forward_layers_.emplace_back(layer_name(l, false), kind, in, config_.hidden_size, false);
      backward_layers_.emplace_back(layer_name(l, true), kind, in, config_.hidden_size, true);
      forward_layers_.back().cell.init(rng);
      backward_layers_.back().cell.init(rng);
      in = 2 * config_.hidden_size;
    }
  }
  classifier_ = Linear<T>("head.classifier", pooled_dim(), 2);
  classifier_.init(rng);
}

template <typename T>
std::size_t Head<T>::pooled_dim() const noexcept {
  return config_.kind == HeadKind::linear ? input_dim_ : 2 * config_.hidden_size;
}

template <typename T>
Tensor<T> Head<T>::forward(const Tensor<T>& hidden, std::size_t real_len, Cache* cache, Rng* dropout_rng) const {
  if (real_len == 0) throw DataError("head input has no real tokens (all-PAD sequence)");
  if (hidden.cols() != input_dim_ || hidden.rows() < real_len) {
    throw ShapeError("head: hidden states " + shape_string(hidden.shape()) + " for input_dim " +
                     std::to_string(input_dim_));
  }
  const bool training = dropout_rng != nullptr;
  auto next_seed = [&] { return training ? dropout_rng->next() : 0; };
  if (cache) {
    cache->rows = hidden.rows();
    cache->real_len = real_len;
    cache->layers.resize(forward_layers_.size());
  }

  Tensor<T> pooled;
  if (config_.kind == HeadKind::linear) {
    Tensor<T> first = Tensor<T>::matrix(1, input_dim_);
    std::copy(hidden.row(0).begin(), hidden.row(0).end(), first.data());
    pooled = std::move(first);
  } else {
    Tensor<T> x = Tensor<T>::matrix(real_len, input_dim_);
    std::copy(hidden.data(), hidden.data() + real_len * input_dim_, x.data());
    const std::size_t h = config_.hidden_size;
    Tensor<T> out;
    for (std::size_t l = 0; l < forward_layers_.size(); ++l) {
      auto* lc = cache ? &cache->layers[l] : nullptr;
      Tensor<T> hf = forward_layers_[l].forward(x, lc ? &lc->forward : nullptr);
      Tensor<T> hb = backward_layers_[l].forward(x, lc ? &lc->backward : nullptr);
      out = Tensor<T>::matrix(real_len, 2 * h);
      add_columns(out, hf, 0);
      add_columns(out, hb, h);
      if (l + 1 < forward_layers_.size()) {
        x = dropout(out, config_.dropout, next_seed(), training, lc ? &lc->dropout_mask : nullptr);
      }
    }
    pooled = Tensor<T>::matrix(1, 2 * h);
    for (std::size_t j = 0; j < h; ++j) {
      pooled(0, j) = out(real_len - 1, j);
      pooled(0, h + j) = out(0, h + j);
    }
  }
  Tensor<T> dropped = dropout(pooled, config_.dropout, next_seed(), training, cache ? &cache->pooled_mask : nullptr);
  Tensor<T> logits = classifier_.forward(dropped, cache ? &cache->classifier : nullptr);
  if (cache) cache->pooled = std::move(pooled);
  return logits;
}

template <typename T>
Tensor<T> Head<T>::backward(const Tensor<T>& dlogits, const Cache& cache, bool need_input_grad) {
  const bool recurrent = config_.kind != HeadKind::linear;
  Tensor<T> dpooled = classifier_.backward(dlogits, cache.classifier, need_input_grad || recurrent);
  if (!need_input_grad && !recurrent) return {};
  dpooled = dropout_backward(dpooled, cache.pooled_mask);

  Tensor<T> dhidden = Tensor<T>::matrix(cache.rows, input_dim_);
  if (!recurrent) {
    for (std::size_t c = 0; c < input_dim_; ++c) dhidden(0, c) = dpooled[c];
    return dhidden;
  }

  const std::size_t n = cache.real_len;
  const std::size_t h = config_.hidden_size;
  Tensor<T> dout = Tensor<T>::matrix(n, 2 * h);
  for (std::size_t j = 0; j < h; ++j) {
    dout(n - 1, j) += dpooled[j];
    dout(0, h + j) += dpooled[h + j];
  }
  Tensor<T> dx;
  for (std::size_t l = forward_layers_.size(); l-- > 0;) {
    const bool need_dx = l > 0 || need_input_grad;
    const auto& lc = cache.layers[l];
    Tensor<T> df = forward_layers_[l].backward(slice_columns(dout, 0, h), lc.forward, need_dx);
    Tensor<T> db = backward_layers_[l].backward(slice_columns(dout, h, h), lc.backward, need_dx);
    if (!need_dx) return {};
    add_inplace(df, db);
    if (l > 0) {
      dout = dropout_backward(df, cache.layers[l - 1].dropout_mask);
    } else {
      dx = std::move(df);
    }
  }
  std::copy(dx.data(), dx.data() + dx.size(), dhidden.data());
  return dhidden;
}

template <typename T>
ParamRefs<T> Head<T>::parameters() {
  ParamRefs<T> out;
  for (std::size_t l = 0; l < forward_layers_.size(); ++l) {
    forward_layers_[l].cell.collect(out);
    backward_layers_[l].cell.collect(out);
  }
  classifier_.collect(out);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Head<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (std::size_t l = 0; l < forward_layers_.size(); ++l) {
    forward_layers_[l].cell.collect(out);
    backward_layers_[l].cell.collect(out);
  }
  classifier_.collect(out);
  return out;
}

std::vector<ParamSpec> head_layout(const HeadConfig& config, std::size_t input_dim) {
  config.validate();
  std::vector<ParamSpec> specs;
  std::size_t pooled = input_dim;
  if (config.kind != HeadKind::linear) {
    const CellKind kind = cell_kind(config.kind);
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      for (bool backward : {false, true}) {
        auto cell = cell_layout(layer_name(l, backward), kind, in, config.hidden_size);
        specs.insert(specs.end(), cell.begin(), cell.end());
      }
      in = 2 * config.hidden_size;
    }
    pooled = 2 * config.hidden_size;
  }
  auto cls = linear_layout("head.classifier", pooled, 2);
  specs.insert(specs.end(), cls.begin(), cls.end());
  return specs;
}

#define MGTD_INSTANTIATE(T)                                                                                   \
  template struct CellParams<T>;                                                                              \
  template class RecurrentLayer<T>;                                                                           \
  template class Head<T>;                                                                                     \
  template LstmState<T> lstm_cell(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const CellParams<T>&, \
                                  LstmCellCache<T>*);                                                         \
  template LstmCellGrads<T> lstm_cell_backward(const Tensor<T>&, const Tensor<T>&, const LstmCellCache<T>&,   \
                                               CellParams<T>&);                                               \
  template Tensor<T> gru_cell(const Tensor<T>&, const Tensor<T>&, const CellParams<T>&, GruCellCache<T>*);    \
  template GruCellGrads<T> gru_cell_backward(const Tensor<T>&, const GruCellCache<T>&, CellParams<T>&);

MGTD_INSTANTIATE(float)
MGTD_INSTANTIATE(double)

#undef MGTD_INSTANTIATE

}  // namespace mgtd
