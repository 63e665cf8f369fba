#pragma once

// Stacked recurrent cells (vanilla RNN, GRU, LSTM) with a linear read-out
// and full backpropagation through time.
//
// Sequences are processed as batches of rows: a time step is a B x dim
// matrix, one row per tracked entity (user, item, or flattened decoder
// matrix). Rows never interact, so one parameter set serves every row.
//
// Gate layouts (blocks of hidden_dim rows in w_in / w_rec / bias):
//   vanilla  [a]            h = tanh(W x + R h' + b)
//   gru      [r, z, n]      n = tanh(W_n x + b_n + r * (R_n h'))
//                           h = (1 - z) * n + z * h'
//   lstm     [i, f, g, o]   c = f * c' + i * g,  h = o * tanh(c)

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tgmc/checkpoint.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/optim.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/tensor.hpp"

namespace tgmc {

enum class CellType { vanilla, gru, lstm };

inline CellType parse_cell_type(std::string_view s) {
  if (s == "vanilla" || s == "rnn") return CellType::vanilla;
  if (s == "gru") return CellType::gru;
  if (s == "lstm") return CellType::lstm;
  throw ValidationError("unknown cell type '" + std::string(s) + "'");
}

inline std::string to_string(CellType c) {
  switch (c) {
    case CellType::vanilla: return "vanilla";
    case CellType::gru: return "gru";
    case CellType::lstm: return "lstm";
  }
  return "?";
}

inline std::size_t gate_count(CellType c) {
  switch (c) {
    case CellType::vanilla: return 1;
    case CellType::gru: return 3;
    case CellType::lstm: return 4;
  }
  return 0;
}

inline std::vector<std::string> gate_names(CellType c) {
  switch (c) {
    case CellType::vanilla: return {"a"};
    case CellType::gru: return {"r", "z", "n"};
    case CellType::lstm: return {"i", "f", "g", "o"};
  }
  return {};
}

struct SeqModelConfig {
  CellType cell = CellType::lstm;
  std::size_t layers = 2;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t hidden_dim = 1;

  void validate() const {
    if (layers < 1 || layers > 3) throw ValidationError("sequence model layers must be 1..3");
    if (input_dim == 0 || output_dim == 0 || hidden_dim == 0)
      throw ValidationError("sequence model dimensions must be positive");
  }
};

template <typename T>
struct SeqLayer {
  Tensor2<T> w_in;   // G*hid x in
  Tensor2<T> w_rec;  // G*hid x hid
  Tensor2<T> bias;   // 1 x G*hid
};

template <typename T>
struct SeqModel {
  SeqModelConfig config;
  std::vector<SeqLayer<T>> layers;
  Tensor2<T> w_out;  // out x hid
  Tensor2<T> b_out;  // 1 x out

  static SeqModel zeros(const SeqModelConfig& cfg) {
    cfg.validate();
    SeqModel m;
    m.config = cfg;
    const std::size_t g = gate_count(cfg.cell) * cfg.hidden_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::size_t in = l == 0 ? cfg.input_dim : cfg.hidden_dim;
      m.layers.push_back({Tensor2<T>(g, in), Tensor2<T>(g, cfg.hidden_dim), Tensor2<T>(1, g)});
    }
    m.w_out = Tensor2<T>(cfg.output_dim, cfg.hidden_dim);
    m.b_out = Tensor2<T>(1, cfg.output_dim);
    return m;
  }

  /// Glorot-uniform weights (per gate block), zero biases.
  static SeqModel glorot(const SeqModelConfig& cfg, Rng& rng) {
    auto m = zeros(cfg);
    for (auto& layer : m.layers) {
      xavier_uniform(layer.w_in, layer.w_in.cols(), cfg.hidden_dim, rng);
      xavier_uniform(layer.w_rec, layer.w_rec.cols(), cfg.hidden_dim, rng);
    }
    xavier_uniform(m.w_out, cfg.hidden_dim, cfg.output_dim, rng);
    return m;
  }

  SeqModel zeros_like() const { return zeros(config); }

  template <typename Fn>
  void for_each_named(Fn&& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto p = "seq/" + std::to_string(l);
      fn(p + "/w_in", layers[l].w_in);
      fn(p + "/w_rec", layers[l].w_rec);
      fn(p + "/bias", layers[l].bias);
    }
    fn("seq/out/w", w_out);
    fn("seq/out/b", b_out);
  }
};

template <typename T>
std::vector<ParamRef<T>> param_refs(SeqModel<T>& params, SeqModel<T>& grads) {
  std::vector<ParamRef<T>> refs;
  params.for_each_named([&](const std::string& name, Tensor2<T>& v) { refs.push_back({name, &v, nullptr}); });
  std::size_t k = 0;
  grads.for_each_named([&](const std::string&, Tensor2<T>& g) { refs.at(k++).grad = &g; });
  return refs;
}

/// A sequence of time steps; every step is a B x dim matrix.
template <typename T>
using StepSequence = std::vector<Tensor2<T>>;

template <typename T>
struct SeqState {
  std::vector<Tensor2<T>> h;  // per layer, B x hid
  std::vector<Tensor2<T>> c;  // per layer (LSTM only)

  static SeqState zeros(const SeqModelConfig& cfg, std::size_t batch) {
    SeqState s;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      s.h.emplace_back(batch, cfg.hidden_dim);
      if (cfg.cell == CellType::lstm) s.c.emplace_back(batch, cfg.hidden_dim);
    }
    return s;
  }
};

namespace detail {

template <typename T>
struct CellCache {
  Tensor2<T> x;       // layer input
  Tensor2<T> h_prev;
  Tensor2<T> c_prev;  // lstm
  Tensor2<T> gates;   // post-nonlinearity gate values, B x G*hid
  Tensor2<T> rec_n;   // gru: R_n h_prev, B x hid
  Tensor2<T> c;       // lstm cell state
  Tensor2<T> h;
};

/// One cell update. Returns the new hidden state; `c` is updated in place
/// for LSTM. Records intermediates into `cache` when given.
template <typename T>
Tensor2<T> cell_step(const SeqLayer<T>& layer, CellType cell, std::size_t hid, const Tensor2<T>& x,
                     const Tensor2<T>& h_prev, Tensor2<T>* c, CellCache<T>* cache) {
  const std::size_t B = x.rows();
  Tensor2<T> xw = matmul_nt(x, layer.w_in);
  add_row_bias<T>(xw, layer.bias.row(0));
  Tensor2<T> hr = matmul_nt(h_prev, layer.w_rec);
  Tensor2<T> h(B, hid);
  Tensor2<T> gates(B, xw.cols());
  Tensor2<T> rec_n;
  Tensor2<T> c_prev;

  switch (cell) {
    case CellType::vanilla:
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < hid; ++k) {
          const T a = std::tanh(xw(b, k) + hr(b, k));
          gates(b, k) = a;
          h(b, k) = a;
        }
      break;
    case CellType::gru:
      rec_n = Tensor2<T>(B, hid);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < hid; ++k) {
          const T r = sigmoid(xw(b, k) + hr(b, k));
          const T z = sigmoid(xw(b, hid + k) + hr(b, hid + k));
          const T rn = hr(b, 2 * hid + k);
          const T n = std::tanh(xw(b, 2 * hid + k) + r * rn);
          gates(b, k) = r;
          gates(b, hid + k) = z;
          gates(b, 2 * hid + k) = n;
          rec_n(b, k) = rn;
          h(b, k) = (T(1) - z) * n + z * h_prev(b, k);
        }
      break;
    case CellType::lstm:
      c_prev = *c;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < hid; ++k) {
          const T i = sigmoid(xw(b, k) + hr(b, k));
          const T f = sigmoid(xw(b, hid + k) + hr(b, hid + k));
          const T g = std::tanh(xw(b, 2 * hid + k) + hr(b, 2 * hid + k));
          const T o = sigmoid(xw(b, 3 * hid + k) + hr(b, 3 * hid + k));
          gates(b, k) = i;
          gates(b, hid + k) = f;
          gates(b, 2 * hid + k) = g;
          gates(b, 3 * hid + k) = o;
          const T cn = f * c_prev(b, k) + i * g;
          (*c)(b, k) = cn;
          h(b, k) = o * std::tanh(cn);
        }
      break;
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->gates = std::move(gates);
    cache->rec_n = std::move(rec_n);
    if (cell == CellType::lstm) {
      cache->c_prev = std::move(c_prev);
      cache->c = *c;
    }
    cache->h = h;
  }
  return h;
}

template <typename T>
Tensor2<T> read_out(const SeqModel<T>& m, const Tensor2<T>& h_top) {
  Tensor2<T> y = matmul_nt(h_top, m.w_out);
  add_row_bias<T>(y, m.b_out.row(0));
  return y;
}

template <typename T>
void check_input(const SeqModel<T>& m, const Tensor2<T>& x, std::size_t batch) {
  if (x.cols() != m.config.input_dim || x.rows() != batch)
    throw ShapeError("sequence step is " + x.shape_string() + ", expected " + std::to_string(batch) + "x" +
                     std::to_string(m.config.input_dim));
}

}  // namespace detail

/// Advances `state` by one input step and returns the read-out.
template <typename T>
Tensor2<T> seq_step(const SeqModel<T>& model, const Tensor2<T>& x, SeqState<T>& state) {
  detail::check_input(model, x, state.h.at(0).rows());
  const auto& cfg = model.config;
  Tensor2<T> input = x;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor2<T>* c = cfg.cell == CellType::lstm ? &state.c[l] : nullptr;
    state.h[l] = detail::cell_step(model.layers[l], cfg.cell, cfg.hidden_dim, input, state.h[l], c,
                                   static_cast<detail::CellCache<T>*>(nullptr));
    input = state.h[l];
  }
  return detail::read_out(model, input);
}

/// Cached forward pass for training.
template <typename T>
struct SeqForward {
  StepSequence<T> outputs;                            // y_2 .. y_{k+1}
  std::vector<std::vector<detail::CellCache<T>>> caches;  // [layer][step]
};

/// Runs inputs x_1..x_k from zero initial state; outputs[t] predicts x_{t+2}.
template <typename T>
SeqForward<T> seq_forward(const SeqModel<T>& model, const StepSequence<T>& inputs) {
  if (inputs.empty()) throw ValidationError("seq_forward: empty sequence");
  const auto& cfg = model.config;
  const std::size_t B = inputs[0].rows();
  SeqForward<T> fw;
  fw.caches.assign(cfg.layers, std::vector<detail::CellCache<T>>(inputs.size()));
  auto state = SeqState<T>::zeros(cfg, B);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    detail::check_input(model, inputs[t], B);
    Tensor2<T> input = inputs[t];
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      Tensor2<T>* c = cfg.cell == CellType::lstm ? &state.c[l] : nullptr;
      state.h[l] = detail::cell_step(model.layers[l], cfg.cell, cfg.hidden_dim, input, state.h[l], c,
                                     &fw.caches[l][t]);
      input = state.h[l];
    }
    fw.outputs.push_back(detail::read_out(model, input));
  }
  return fw;
}

/// Gradients of all parameters given upstream gradients w.r.t. every output.
template <typename T>
SeqModel<T> seq_backward(const SeqModel<T>& model, const SeqForward<T>& fw, const StepSequence<T>& grad_outputs) {
  if (fw.caches.empty() || fw.caches[0].empty()) throw MissingArtifactError("seq_backward: no cached forward");
  const auto& cfg = model.config;
  const std::size_t steps = fw.outputs.size();
  if (grad_outputs.size() != steps) throw ShapeError("seq_backward: gradient step count mismatch");
  const std::size_t hid = cfg.hidden_dim;
  SeqModel<T> g = model.zeros_like();

  // Gradients flowing into the top layer's hidden states.
  StepSequence<T> dh_ext(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& dy = grad_outputs[t];
    if (!dy.same_shape(fw.outputs[t])) throw ShapeError("seq_backward: gradient shape mismatch");
    g.w_out += matmul_tn(dy, fw.caches.back()[t].h);
    accumulate_column_sums<T>(dy, g.b_out.row(0));
    dh_ext[t] = matmul(dy, model.w_out);
  }

  for (std::size_t li = cfg.layers; li-- > 0;) {
    const auto& layer = model.layers[li];
    auto& gl = g.layers[li];
    const auto& caches = fw.caches[li];
    const std::size_t B = caches[0].h.rows();
    Tensor2<T> dh_next(B, hid);
    Tensor2<T> dc_next(B, hid);
    StepSequence<T> dx(steps);
    for (std::size_t t = steps; t-- > 0;) {
      const auto& cc = caches[t];
      Tensor2<T> dh = dh_ext[t];
      dh += dh_next;
      Tensor2<T> d_in;   // gradient w.r.t. the input-side pre-activations
      Tensor2<T> d_rec;  // gradient w.r.t. the recurrent-side pre-activations
      Tensor2<T> dh_direct(B, hid);
      switch (cfg.cell) {
        case CellType::vanilla: {
          d_in = Tensor2<T>(B, hid);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < hid; ++k) {
              const T a = cc.gates(b, k);
              d_in(b, k) = dh(b, k) * (T(1) - a * a);
            }
          d_rec = d_in;
          break;
        }
        case CellType::gru: {
          d_in = Tensor2<T>(B, 3 * hid);
          d_rec = Tensor2<T>(B, 3 * hid);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < hid; ++k) {
              const T r = cc.gates(b, k);
              const T z = cc.gates(b, hid + k);
              const T n = cc.gates(b, 2 * hid + k);
              const T hp = cc.h_prev(b, k);
              const T d = dh(b, k);
              const T dn = d * (T(1) - z);
              const T dz = d * (hp - n);
              dh_direct(b, k) = d * z;
              const T dan = dn * (T(1) - n * n);
              const T dr = dan * cc.rec_n(b, k);
              const T dar = dr * r * (T(1) - r);
              const T daz = dz * z * (T(1) - z);
              d_in(b, k) = dar;
              d_in(b, hid + k) = daz;
              d_in(b, 2 * hid + k) = dan;
              d_rec(b, k) = dar;
              d_rec(b, hid + k) = daz;
              d_rec(b, 2 * hid + k) = dan * r;
            }
          break;
        }
        case CellType::lstm: {
          d_in = Tensor2<T>(B, 4 * hid);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < hid; ++k) {
              const T i = cc.gates(b, k);
              const T f = cc.gates(b, hid + k);
              const T gg = cc.gates(b, 2 * hid + k);
              const T o = cc.gates(b, 3 * hid + k);
              const T tc = std::tanh(cc.c(b, k));
              const T d = dh(b, k);
              const T dc = dc_next(b, k) + d * o * (T(1) - tc * tc);
              d_in(b, k) = dc * gg * i * (T(1) - i);
              d_in(b, hid + k) = dc * cc.c_prev(b, k) * f * (T(1) - f);
              d_in(b, 2 * hid + k) = dc * i * (T(1) - gg * gg);
              d_in(b, 3 * hid + k) = d * tc * o * (T(1) - o);
              dc_next(b, k) = dc * f;
            }
          d_rec = d_in;
          break;
        }
      }
      gl.w_in += matmul_tn(d_in, cc.x);
      accumulate_column_sums<T>(d_in, gl.bias.row(0));
      gl.w_rec += matmul_tn(d_rec, cc.h_prev);
      dx[t] = matmul(d_in, layer.w_in);
      dh_next = matmul(d_rec, layer.w_rec);
      dh_next += dh_direct;
    }
    dh_ext = std::move(dx);
  }
  return g;
}

struct SeqTrainOptions {
  std::size_t epochs = 250;
  double learning_rate = 1e-2;
  /// Drop loss terms for rows whose inputs have been all-zero so far.
  bool mask_inactive = false;
};

namespace detail {

/// Per-row 0/1 weights for each predicted step (k-1 steps).
template <typename T>
std::vector<std::vector<T>> activity_masks(const StepSequence<T>& seq, bool enabled) {
  const std::size_t B = seq[0].rows();
  std::vector<std::vector<T>> masks(seq.size() - 1, std::vector<T>(B, T(1)));
  if (!enabled) return masks;
  std::vector<bool> active(B, false);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      if (!active[b]) {
        const auto row = seq[t].row(b);
        active[b] = std::any_of(row.begin(), row.end(), [](T v) { return v != T(0); });
      }
      masks[t][b] = active[b] ? T(1) : T(0);
    }
  }
  return masks;
}

}  // namespace detail

template <typename T>
struct SeqLoss {
  T loss = T(0);
  StepSequence<T> grad_outputs;
};

/// L = (1/N) sum_t ||Y_hat_t - Y_t||_F^2 over N predicted steps, with
/// optional per-row weights.
template <typename T>
SeqLoss<T> mse_loss(const StepSequence<T>& predictions, const StepSequence<T>& targets,
                    const std::vector<std::vector<T>>* row_weights = nullptr) {
  if (predictions.size() != targets.size() || predictions.empty()) throw ShapeError("mse_loss: step mismatch");
  SeqLoss<T> out;
  const T n = static_cast<T>(predictions.size());
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    const auto& p = predictions[t];
    const auto& y = targets[t];
    if (!p.same_shape(y)) throw ShapeError("mse_loss: shape mismatch");
    Tensor2<T> g(p.rows(), p.cols());
    for (std::size_t b = 0; b < p.rows(); ++b) {
      const T w = row_weights ? (*row_weights)[t][b] : T(1);
      if (w == T(0)) continue;
      for (std::size_t k = 0; k < p.cols(); ++k) {
        const T diff = p(b, k) - y(b, k);
        out.loss += w * diff * diff / n;
        g(b, k) = T(2) * w * diff / n;
      }
    }
    out.grad_outputs.push_back(std::move(g));
  }
  return out;
}

/// Teacher-forced loss of `model` on `sequence`: inputs x_1..x_{k-1},
/// targets x_2..x_k. Also returns parameter gradients.
template <typename T>
T seq_loss_and_grad(const SeqModel<T>& model, const StepSequence<T>& sequence, bool mask_inactive,
                    SeqModel<T>* grads) {
  if (sequence.size() < 2) throw ValidationError("sequence model needs at least two steps");
  StepSequence<T> inputs(sequence.begin(), sequence.end() - 1);
  StepSequence<T> targets(sequence.begin() + 1, sequence.end());
  const auto masks = detail::activity_masks(sequence, mask_inactive);
  auto fw = seq_forward(model, inputs);
  auto loss = mse_loss(fw.outputs, targets, &masks);
  if (grads) assign_params(*grads, seq_backward(model, fw, loss.grad_outputs));
  return loss.loss;
}

/// Full-batch Adam training with teacher forcing; one update per epoch.
/// Returns the loss before each update plus the final loss.
template <typename T>
std::vector<double> seq_train(SeqModel<T>& model, const StepSequence<T>& sequence, const SeqTrainOptions& opt) {
  if (sequence.empty() || sequence[0].rows() == 0) throw ValidationError("seq_train: empty training data");
  if (sequence.size() < 2) throw ValidationError("seq_train: sequences need length >= 2");
  AdamState<T> adam(AdamConfig{opt.learning_rate});
  SeqModel<T> grads = model.zeros_like();
  auto refs = param_refs(model, grads);
  std::vector<double> curve;
  curve.reserve(opt.epochs + 1);
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    curve.push_back(seq_loss_and_grad(model, sequence, opt.mask_inactive, &grads));
    adam_step(refs, adam);
  }
  curve.push_back(seq_loss_and_grad(model, sequence, opt.mask_inactive, static_cast<SeqModel<T>*>(nullptr)));
  return curve;
}

/// Autoregressive roll-out: conditions on x_1..x_T, then feeds each
/// prediction back as the next input. Returns x_hat_{T+1}..x_hat_{T+steps}.
template <typename T>
StepSequence<T> predict_next(const SeqModel<T>& model, const StepSequence<T>& sequence, std::size_t steps) {
  if (steps < 1) throw ValidationError("predict_next: steps must be >= 1");
  if (sequence.empty()) throw ValidationError("predict_next: empty sequence");
  if (model.config.input_dim != model.config.output_dim)
    throw ShapeError("predict_next: roll-out needs input_dim == output_dim");
  auto state = SeqState<T>::zeros(model.config, sequence[0].rows());
  Tensor2<T> y;
  for (const auto& x : sequence) y = seq_step(model, x, state);
  StepSequence<T> out;
  out.push_back(y);
  for (std::size_t s = 1; s < steps; ++s) {
    y = seq_step(model, out.back(), state);
    out.push_back(y);
  }
  return out;
}

// Decoder-weight sequences: each level's d x d matrix becomes one row of d^2
// entries, position (a, b) at index a*d + b.

template <typename T>
Tensor2<T> flatten_levels(const std::vector<Tensor2<T>>& levels) {
  if (levels.empty()) throw ValidationError("flatten_levels: no levels");
  const std::size_t d = levels[0].rows();
  Tensor2<T> out(levels.size(), d * d);
  for (std::size_t r = 0; r < levels.size(); ++r) {
    if (levels[r].rows() != d || levels[r].cols() != d) throw ShapeError("decoder matrices must all be d x d");
    std::copy(levels[r].flat().begin(), levels[r].flat().end(), out.row(r).begin());
  }
  return out;
}

template <typename T>
std::vector<Tensor2<T>> unflatten_levels(const Tensor2<T>& flat, std::size_t d) {
  if (flat.cols() != d * d) throw ShapeError("unflatten_levels: width is not d^2");
  std::vector<Tensor2<T>> out;
  for (std::size_t r = 0; r < flat.rows(); ++r) {
    Tensor2<T> m(d, d);
    std::copy(flat.row(r).begin(), flat.row(r).end(), m.flat().begin());
    out.push_back(std::move(m));
  }
  return out;
}

inline constexpr std::size_t kDecoderHiddenCap = 2500;

/// Model configuration for predicting d x d decoder matrices.
inline SeqModelConfig decoder_weight_config(std::size_t d, std::size_t layers) {
  SeqModelConfig cfg;
  cfg.cell = CellType::lstm;
  cfg.layers = layers;
  cfg.input_dim = d * d;
  cfg.output_dim = d * d;
  cfg.hidden_dim = std::min(d * d, kDecoderHiddenCap);
  return cfg;
}

/// Steps of R x d^2 matrices from per-window level matrices.
template <typename T>
StepSequence<T> decoder_weight_sequence(const std::vector<std::vector<Tensor2<T>>>& per_window) {
  if (per_window.size() < 2) throw ValidationError("decoder-weight model needs at least two windows");
  StepSequence<T> seq;
  const std::size_t d = per_window[0].at(0).rows();
  for (const auto& levels : per_window) {
    if (levels.at(0).rows() != d) throw ShapeError("decoder dimension changes across windows");
    seq.push_back(flatten_levels(levels));
  }
  return seq;
}

// Checkpoint layout: seq/{role}/{layer}/{gate} holds [w_in | w_rec | bias]
// for that gate block (hid x (in + hid + 1)); seq/{role}/out holds
// [w_out | b_out^T] (out x (hid + 1)).

template <typename T>
void save_seq_model(Checkpoint& ckpt, const std::string& role, const SeqModel<T>& m) {
  const auto& cfg = m.config;
  const auto names = gate_names(cfg.cell);
  const std::size_t hid = cfg.hidden_dim;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    const std::size_t in = layer.w_in.cols();
    for (std::size_t g = 0; g < names.size(); ++g) {
      Tensor2<T> block(hid, in + hid + 1);
      for (std::size_t k = 0; k < hid; ++k) {
        const std::size_t row = g * hid + k;
        for (std::size_t c = 0; c < in; ++c) block(k, c) = layer.w_in(row, c);
        for (std::size_t c = 0; c < hid; ++c) block(k, in + c) = layer.w_rec(row, c);
        block(k, in + hid) = layer.bias(0, row);
      }
      ckpt.put("seq/" + role + "/" + std::to_string(l) + "/" + names[g], block);
    }
  }
  Tensor2<T> out(cfg.output_dim, hid + 1);
  for (std::size_t o = 0; o < cfg.output_dim; ++o) {
    for (std::size_t c = 0; c < hid; ++c) out(o, c) = m.w_out(o, c);
    out(o, hid) = m.b_out(0, o);
  }
  ckpt.put("seq/" + role + "/out", out);
}

template <typename T>
SeqModel<T> load_seq_model(const Checkpoint& ckpt, const std::string& role, const SeqModelConfig& cfg) {
  auto m = SeqModel<T>::zeros(cfg);
  const auto names = gate_names(cfg.cell);
  const std::size_t hid = cfg.hidden_dim;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const std::size_t in = layer.w_in.cols();
    for (std::size_t g = 0; g < names.size(); ++g) {
      Tensor2<T> block(hid, in + hid + 1);
      ckpt.get("seq/" + role + "/" + std::to_string(l) + "/" + names[g], block);
      for (std::size_t k = 0; k < hid; ++k) {
        const std::size_t row = g * hid + k;
        for (std::size_t c = 0; c < in; ++c) layer.w_in(row, c) = block(k, c);
        for (std::size_t c = 0; c < hid; ++c) layer.w_rec(row, c) = block(k, in + c);
        layer.bias(0, row) = block(k, in + hid);
      }
    }
  }
  Tensor2<T> out(cfg.output_dim, hid + 1);
  ckpt.get("seq/" + role + "/out", out);
  for (std::size_t o = 0; o < cfg.output_dim; ++o) {
    for (std::size_t c = 0; c < hid; ++c) m.w_out(o, c) = out(o, c);
    m.b_out(0, o) = out(o, hid);
  }
  return m;
}

}  // namespace tgmc
