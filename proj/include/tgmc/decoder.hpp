#pragma once

// Bilinear softmax decoder: P(r | u, v) = softmax_r(u^T Q_r v).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgmc/errors.hpp"
#include "tgmc/optim.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/tensor.hpp"

namespace tgmc {

template <typename T>
struct DecoderParams {
  std::vector<Tensor2<T>> q;  // q[r-1] is d x d

  int max_rating() const { return static_cast<int>(q.size()); }
  std::size_t embed() const { return q.empty() ? 0 : q[0].rows(); }

  static DecoderParams zeros(int max_rating, std::size_t embed) {
    if (max_rating < 1 || embed == 0) throw ValidationError("decoder dimensions must be positive");
    DecoderParams p;
    p.q.assign(static_cast<std::size_t>(max_rating), Tensor2<T>(embed, embed));
    return p;
  }

  static DecoderParams glorot(int max_rating, std::size_t embed, Rng& rng) {
    auto p = zeros(max_rating, embed);
    for (auto& m : p.q) xavier_uniform(m, embed, embed, rng);
    return p;
  }

  DecoderParams zeros_like() const { return zeros(max_rating(), embed()); }

  template <typename Fn>
  void for_each_named(Fn&& fn) {
    for (std::size_t r = 0; r < q.size(); ++r) fn("dec/r" + std::to_string(r + 1), q[r]);
  }
};

template <typename T>
std::vector<ParamRef<T>> param_refs(DecoderParams<T>& params, DecoderParams<T>& grads) {
  std::vector<ParamRef<T>> refs;
  for (std::size_t r = 0; r < params.q.size(); ++r)
    refs.push_back({"dec/r" + std::to_string(r + 1), &params.q[r], &grads.q[r]});
  return refs;
}

/// u^T Q_r v for every level.
template <typename T>
std::vector<T> decoder_logits(std::span<const T> u, std::span<const T> v, const DecoderParams<T>& params) {
  const std::size_t d = params.embed();
  if (u.size() != d || v.size() != d)
    throw ShapeError("decoder: embedding width " + std::to_string(u.size()) + "/" + std::to_string(v.size()) +
                     " does not match d=" + std::to_string(d));
  std::vector<T> logits(params.q.size());
  for (std::size_t r = 0; r < params.q.size(); ++r) {
    const auto& q = params.q[r];
    T acc = T(0);
    for (std::size_t a = 0; a < d; ++a) {
      if (u[a] == T(0)) continue;
      const T* qrow = q.row(a).data();
      T inner = T(0);
      for (std::size_t b = 0; b < d; ++b) inner += qrow[b] * v[b];
      acc += u[a] * inner;
    }
    logits[r] = acc;
  }
  return logits;
}

/// Rating distribution over 1..R (index r-1).
template <typename T>
std::vector<T> decode_probs(std::span<const T> u, std::span<const T> v, const DecoderParams<T>& params) {
  const auto logits = decoder_logits(u, v, params);
  std::vector<T> probs(logits.size());
  softmax<T>(logits, probs);
  return probs;
}

/// Sum_r r * P(r).
template <typename T>
T expected_rating(std::span<const T> probs) {
  T acc = T(0);
  for (std::size_t r = 0; r < probs.size(); ++r) acc += static_cast<T>(r + 1) * probs[r];
  return acc;
}

/// Expected rating straight from logits: sum_r r e_r / sum_r e_r with
/// e_r = exp(l_r - max l). Equal logits give exactly (R + 1) / 2.
template <typename T>
T expected_rating_from_logits(std::span<const T> logits) {
  const T mx = *std::max_element(logits.begin(), logits.end());
  T num = T(0), den = T(0);
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const T e = std::exp(logits[r] - mx);
    num += static_cast<T>(r + 1) * e;
    den += e;
  }
  return num / den;
}

struct RatedPair {
  std::uint32_t user;
  std::uint32_t item;
  std::uint8_t rating;
};

template <typename T>
struct NllResult {
  T loss = T(0);
  DecoderParams<T> grad_q;
  Tensor2<T> grad_users;
  Tensor2<T> grad_items;
};

/// Negative log-likelihood summed over `batch`, with exact gradients
/// w.r.t. every Q_r and the user/item embedding matrices.
template <typename T>
NllResult<T> nll_loss(std::span<const RatedPair> batch, const Tensor2<T>& users, const Tensor2<T>& items,
                      const DecoderParams<T>& params) {
  if (batch.empty()) throw ValidationError("nll_loss: empty batch");
  const std::size_t d = params.embed();
  const auto R = static_cast<std::size_t>(params.max_rating());
  if (users.cols() != d || items.cols() != d) throw ShapeError("nll_loss: embedding width mismatch");

  NllResult<T> out;
  out.grad_q = params.zeros_like();
  out.grad_users = Tensor2<T>(users.rows(), d);
  out.grad_items = Tensor2<T>(items.rows(), d);
  std::vector<T> probs(R);
  std::vector<T> qv(d), qtu(d);
  for (const auto& e : batch) {
    if (e.rating < 1 || e.rating > R) throw ValidationError("nll_loss: rating outside [1,R]");
    if (e.user >= users.rows() || e.item >= items.rows()) throw ShapeError("nll_loss: index out of range");
    const auto u = users.row(e.user);
    const auto v = items.row(e.item);
    const auto logits = decoder_logits<T>(u, v, params);
    out.loss += log_sum_exp<T>(logits) - logits[e.rating - 1u];
    softmax<T>(logits, probs);

    auto gu = out.grad_users.row(e.user);
    auto gv = out.grad_items.row(e.item);
    for (std::size_t r = 0; r < R; ++r) {
      const T coef = probs[r] - (r + 1 == e.rating ? T(1) : T(0));
      if (coef == T(0)) continue;
      const auto& q = params.q[r];
      auto& gq = out.grad_q.q[r];
      std::fill(qtu.begin(), qtu.end(), T(0));
      for (std::size_t a = 0; a < d; ++a) {
        const T* qrow = q.row(a).data();
        T* gqrow = gq.row(a).data();
        T inner = T(0);
        for (std::size_t b = 0; b < d; ++b) {
          inner += qrow[b] * v[b];
          gqrow[b] += coef * u[a] * v[b];
          qtu[b] += qrow[b] * u[a];
        }
        qv[a] = inner;
      }
      for (std::size_t a = 0; a < d; ++a) {
        gu[a] += coef * qv[a];
        gv[a] += coef * qtu[a];
      }
    }
  }
  return out;
}

}  // namespace tgmc
