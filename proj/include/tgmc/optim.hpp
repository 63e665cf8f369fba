#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "tgmc/errors.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/tensor.hpp"

namespace tgmc {

/// Non-owning view of one learnable tensor and its gradient buffer.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor2<T>* value;
  Tensor2<T>* grad;
};

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Tensor2<T>> first_moment;
  std::vector<Tensor2<T>> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

/// One bias-corrected Adam update over every parameter in `params`.
/// Moment buffers are allocated on the first call and must keep their
/// shapes afterwards. A non-finite gradient aborts before any parameter
/// is touched.
template <typename T>
void adam_step(const std::vector<ParamRef<T>>& params, AdamState<T>& state) {
  for (const auto& p : params) {
    if (!p.value->same_shape(*p.grad))
      throw ShapeError("adam_step: gradient shape mismatch for " + p.name);
    if (!p.grad->all_finite()) throw NonFiniteError("adam_step: non-finite gradient in " + p.name);
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value->rows(), p.value->cols());
      state.second_moment.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (state.first_moment.size() != params.size())
    throw ShapeError("adam_step: parameter count changed between steps");

  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].value->flat();
    auto grad = params[k].grad->flat();
    auto m = state.first_moment[k].flat();
    auto v = state.second_moment[k].flat();
    if (m.size() != value.size()) throw ShapeError("adam_step: moment shape mismatch");
    for (std::size_t e = 0; e < value.size(); ++e) {
      const double g = grad[e];
      const double mk = c.beta1 * m[e] + (1.0 - c.beta1) * g;
      const double vk = c.beta2 * v[e] + (1.0 - c.beta2) * g * g;
      m[e] = static_cast<T>(mk);
      v[e] = static_cast<T>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      value[e] = static_cast<T>(value[e] - c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon));
    }
  }
}

/// Moves every tensor of `src` into the matching tensor of `dst` without
/// reallocating `dst`'s containers, so ParamRefs into `dst` stay valid.
template <typename Params>
void assign_params(Params& dst, Params&& src) {
  std::vector<void*> from;
  src.for_each_named([&](const std::string&, auto& t) { from.push_back(&t); });
  std::size_t k = 0;
  dst.for_each_named([&](const std::string&, auto& t) {
    using Tensor = std::remove_reference_t<decltype(t)>;
    t = std::move(*static_cast<Tensor*>(from.at(k++)));
  });
  if (k != from.size()) throw ShapeError("assign_params: parameter count mismatch");
}

template <typename T>
void zero_grads(const std::vector<ParamRef<T>>& params) {
  for (const auto& p : params) p.grad->set_zero();
}

enum class Mode { train, eval };

struct DropoutSpec {
  double rate = 0.0;
  Mode mode = Mode::eval;
};

/// Inverted-dropout mask: kept entries hold 1/(1-rate), dropped entries 0.
/// Eval mode and rate 0 produce all ones.
template <typename T>
Tensor2<T> dropout_mask(std::size_t rows, std::size_t cols, const DropoutSpec& spec, Rng& rng) {
  if (spec.rate < 0.0 || spec.rate >= 1.0) throw ValidationError("dropout rate must be in [0,1)");
  Tensor2<T> mask(rows, cols, T(1));
  if (spec.mode == Mode::eval || spec.rate == 0.0) return mask;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - spec.rate));
  for (auto& m : mask.flat()) m = rng.uniform() < spec.rate ? T(0) : keep_scale;
  return mask;
}

template <typename T>
Tensor2<T> dropout_apply(const Tensor2<T>& x, const DropoutSpec& spec, Rng& rng,
                         Tensor2<T>* mask_out = nullptr) {
  Tensor2<T> mask = dropout_mask<T>(x.rows(), x.cols(), spec, rng);
  Tensor2<T> y = hadamard(x, mask);
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

/// Glorot-uniform fill in [-s, s], s = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void xavier_uniform(Tensor2<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.flat()) v = static_cast<T>(rng.uniform(-s, s));
}

}  // namespace tgmc
