#pragma once

// Graph-convolutional encoder for one window.
//
// For a receiving node n and rating level r the level message is
//   m_r(n) = sum_{k in N_{n,r}} (1 / c_{n,k}) * W_msg[dir][r][:, k]
// (one-hot node features turn the message transform into a column gather).
// Levels are combined by summation or stacking, then
//   h = ReLU(accum(m_1..m_R)) (dropout applied here in training)
//   z = ReLU(W_dense * h)
// Users and items are encoded symmetrically with separate weights.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tgmc/errors.hpp"
#include "tgmc/graph.hpp"
#include "tgmc/optim.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/tensor.hpp"

namespace tgmc {

enum class Accum { sum, stack };

inline Accum parse_accum(std::string_view s) {
  if (s == "sum") return Accum::sum;
  if (s == "stack") return Accum::stack;
  throw ValidationError("unknown accumulation '" + std::string(s) + "'");
}
inline std::string to_string(Accum a) { return a == Accum::sum ? "sum" : "stack"; }

enum class Side : std::size_t { user = 0, item = 1 };

inline std::string to_string(Side s) { return s == Side::user ? "user" : "item"; }

/// Messages that reach `side` travel along this direction.
inline Direction incoming_direction(Side side) {
  return side == Side::user ? Direction::item_to_user : Direction::user_to_item;
}

inline std::string to_string(Direction d) {
  return d == Direction::item_to_user ? "item_to_user" : "user_to_item";
}

template <typename T>
struct EncoderParams {
  Accum accum = Accum::sum;
  std::size_t hidden = 0;  // H
  std::size_t embed = 0;   // d
  /// msg[side][r-1] carries messages into `side`: H x N_V for users, H x N_U for items.
  std::array<std::vector<Tensor2<T>>, 2> msg;
  /// dense[side]: d x H_acc
  std::array<Tensor2<T>, 2> dense;

  int max_rating() const { return static_cast<int>(msg[0].size()); }
  std::size_t acc_width() const { return accum == Accum::sum ? hidden : hidden * msg[0].size(); }
  std::size_t num_users() const { return msg[1].empty() ? 0 : msg[1][0].cols(); }
  std::size_t num_items() const { return msg[0].empty() ? 0 : msg[0][0].cols(); }

  static EncoderParams zeros(std::size_t num_users, std::size_t num_items, int max_rating, std::size_t hidden,
                             std::size_t embed, Accum accum) {
    if (hidden == 0 || embed == 0 || max_rating < 1) throw ValidationError("encoder widths must be positive");
    EncoderParams p;
    p.accum = accum;
    p.hidden = hidden;
    p.embed = embed;
    for (int r = 0; r < max_rating; ++r) {
      p.msg[0].emplace_back(hidden, num_items);
      p.msg[1].emplace_back(hidden, num_users);
    }
    p.dense[0] = Tensor2<T>(embed, p.acc_width());
    p.dense[1] = Tensor2<T>(embed, p.acc_width());
    return p;
  }

  static EncoderParams glorot(std::size_t num_users, std::size_t num_items, int max_rating, std::size_t hidden,
                              std::size_t embed, Accum accum, Rng& rng) {
    auto p = zeros(num_users, num_items, max_rating, hidden, embed, accum);
    for (auto& side : p.msg)
      for (auto& w : side) xavier_uniform(w, w.cols(), w.rows(), rng);
    for (auto& w : p.dense) xavier_uniform(w, w.cols(), w.rows(), rng);
    return p;
  }

  EncoderParams zeros_like() const {
    return zeros(num_users(), num_items(), max_rating(), hidden, embed, accum);
  }

  template <typename Fn>
  void for_each_named(Fn&& fn) {
    for (std::size_t s = 0; s < 2; ++s) {
      const auto side = static_cast<Side>(s);
      for (std::size_t r = 0; r < msg[s].size(); ++r)
        fn("enc/" + to_string(side) + "/" + to_string(incoming_direction(side)) + "/r" + std::to_string(r + 1),
           msg[s][r]);
    }
    for (std::size_t s = 0; s < 2; ++s) fn("enc/" + to_string(static_cast<Side>(s)) + "/dense", dense[s]);
  }
};

/// Pairs every tensor of `params` with the matching tensor of `grads`.
template <typename T>
std::vector<ParamRef<T>> param_refs(EncoderParams<T>& params, EncoderParams<T>& grads) {
  std::vector<ParamRef<T>> refs;
  params.for_each_named([&](const std::string& name, Tensor2<T>& v) { refs.push_back({name, &v, nullptr}); });
  std::size_t k = 0;
  grads.for_each_named([&](const std::string&, Tensor2<T>& g) { refs.at(k++).grad = &g; });
  return refs;
}

template <typename T>
struct EncoderActivations {
  bool valid = false;
  std::array<Tensor2<T>, 2> accum_pre;  // aggregated messages before the activation
  std::array<Tensor2<T>, 2> mask;       // dropout mask on h
  std::array<Tensor2<T>, 2> hidden;     // h after activation and dropout
  std::array<Tensor2<T>, 2> dense_pre;  // W_dense * h before the activation
  std::array<Tensor2<T>, 2> embedding;  // z: U_t (users) and V_t (items)

  const Tensor2<T>& users() const { return embedding[0]; }
  const Tensor2<T>& items() const { return embedding[1]; }
};

namespace detail {

/// 1 / c for an edge between `receiver` and `source` at a level.
inline double inverse_norm(const LevelAdjacency& lvl, NormMode mode, Side receiver_side, std::uint32_t receiver,
                           std::uint32_t source) {
  const double d_recv = receiver_side == Side::user ? lvl.user_degree(receiver) : lvl.item_degree(receiver);
  if (mode == NormMode::left) return 1.0 / d_recv;
  const double d_src = receiver_side == Side::user ? lvl.item_degree(source) : lvl.user_degree(source);
  return 1.0 / std::sqrt(d_recv * d_src);
}

inline std::span<const std::uint32_t> neighbors(const LevelAdjacency& lvl, Side receiver_side, std::uint32_t n) {
  return receiver_side == Side::user ? lvl.items_of(n) : lvl.users_of(n);
}

template <typename T>
void check_dims(const RatingWindow& w, const EncoderParams<T>& p) {
  if (p.max_rating() != w.max_rating() || p.num_users() != w.num_users() || p.num_items() != w.num_items())
    throw ShapeError("encoder parameters do not match window dimensions");
}

}  // namespace detail

template <typename T>
EncoderActivations<T> encoder_forward(const RatingWindow& window, const EncoderParams<T>& params,
                                      const NormalizationSpec& norm, const DropoutSpec& dropout, Rng& rng) {
  detail::check_dims(window, params);
  EncoderActivations<T> acts;
  const std::size_t H = params.hidden;
  const std::size_t width = params.acc_width();
  for (std::size_t s = 0; s < 2; ++s) {
    const auto side = static_cast<Side>(s);
    const std::uint32_t count = side == Side::user ? window.num_users() : window.num_items();
    Tensor2<T> pre(count, width);
    for (int r = 1; r <= params.max_rating(); ++r) {
      const auto& lvl = window.level(r);
      if (lvl.edges.empty()) continue;
      const Tensor2<T> cols = transpose(params.msg[s][static_cast<std::size_t>(r - 1)]);
      const std::size_t offset = params.accum == Accum::stack ? static_cast<std::size_t>(r - 1) * H : 0;
      for (std::uint32_t n = 0; n < count; ++n) {
        T* out = pre.row(n).data() + offset;
        for (std::uint32_t src : detail::neighbors(lvl, side, n)) {
          const T coef = static_cast<T>(detail::inverse_norm(lvl, norm.mode, side, n, src));
          const T* col = cols.row(src).data();
          for (std::size_t h = 0; h < H; ++h) out[h] += coef * col[h];
        }
      }
    }
    acts.mask[s] = dropout_mask<T>(count, width, dropout, rng);
    acts.hidden[s] = hadamard(relu(pre), acts.mask[s]);
    acts.accum_pre[s] = std::move(pre);
    acts.dense_pre[s] = matmul_nt(acts.hidden[s], params.dense[s]);
    acts.embedding[s] = relu(acts.dense_pre[s]);
  }
  acts.valid = true;
  return acts;
}

/// Exact gradients of the forward map given upstream gradients w.r.t. the
/// user and item embeddings.
template <typename T>
EncoderParams<T> encoder_backward(const RatingWindow& window, const EncoderParams<T>& params,
                                  const NormalizationSpec& norm, const EncoderActivations<T>& acts,
                                  const Tensor2<T>& grad_users, const Tensor2<T>& grad_items) {
  if (!acts.valid) throw MissingArtifactError("encoder_backward: no cached forward activations");
  detail::check_dims(window, params);
  if (!grad_users.same_shape(acts.embedding[0]) || !grad_items.same_shape(acts.embedding[1]))
    throw ShapeError("encoder_backward: upstream gradient shape mismatch");
  EncoderParams<T> grads = params.zeros_like();
  const std::size_t H = params.hidden;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto side = static_cast<Side>(s);
    const auto& upstream = s == 0 ? grad_users : grad_items;
    Tensor2<T> dpre(upstream.rows(), upstream.cols());
    for (std::size_t k = 0; k < dpre.size(); ++k)
      dpre.flat()[k] = upstream.flat()[k] * relu_grad(acts.dense_pre[s].flat()[k]);
    grads.dense[s] = matmul_tn(dpre, acts.hidden[s]);
    Tensor2<T> dacc = matmul(dpre, params.dense[s]);
    for (std::size_t k = 0; k < dacc.size(); ++k)
      dacc.flat()[k] *= acts.mask[s].flat()[k] * relu_grad(acts.accum_pre[s].flat()[k]);

    const std::uint32_t count = side == Side::user ? window.num_users() : window.num_items();
    for (int r = 1; r <= params.max_rating(); ++r) {
      const auto& lvl = window.level(r);
      if (lvl.edges.empty()) continue;
      const auto& w = params.msg[s][static_cast<std::size_t>(r - 1)];
      Tensor2<T> gcols(w.cols(), w.rows());
      const std::size_t offset = params.accum == Accum::stack ? static_cast<std::size_t>(r - 1) * H : 0;
      for (std::uint32_t n = 0; n < count; ++n) {
        const T* g = dacc.row(n).data() + offset;
        for (std::uint32_t src : detail::neighbors(lvl, side, n)) {
          const T coef = static_cast<T>(detail::inverse_norm(lvl, norm.mode, side, n, src));
          T* col = gcols.row(src).data();
          for (std::size_t h = 0; h < H; ++h) col[h] += coef * g[h];
        }
      }
      grads.msg[s][static_cast<std::size_t>(r - 1)] = transpose(gcols);
    }
  }
  return grads;
}

}  // namespace tgmc
