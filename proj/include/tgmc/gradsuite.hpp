#pragma once

// Randomized finite-difference checks for every differentiable component,
// run in double precision.

#include <cstdint>
#include <string>
#include <vector>

#include "tgmc/decoder.hpp"
#include "tgmc/encoder.hpp"
#include "tgmc/gradcheck.hpp"
#include "tgmc/graph.hpp"
#include "tgmc/seqmodel.hpp"

namespace tgmc {

struct GradSuiteEntry {
  std::string component;
  GradCheckResult result;
};

namespace detail {

inline RatingWindow random_window(Rng& rng, std::uint32_t nu, std::uint32_t nv, int R, double density) {
  std::vector<RatingEvent> ev;
  for (std::uint32_t u = 0; u < nu; ++u)
    for (std::uint32_t i = 0; i < nv; ++i)
      if (rng.uniform() < density) ev.push_back({u, i, static_cast<std::uint8_t>(1 + rng.below(R)), 0});
  if (ev.empty()) ev.push_back({0, 0, static_cast<std::uint8_t>(R), 0});
  return build_rating_window(ev, nu, nv, R);
}

template <typename T>
void randomize(Tensor2<T>& m, Rng& rng, double scale) {
  for (auto& v : m.flat()) v = static_cast<T>(rng.uniform(-scale, scale));
}

inline GradCheckResult check_encoder_decoder(Rng& rng, Accum accum, NormMode norm) {
  const auto nu = static_cast<std::uint32_t>(2 + rng.below(5));
  const auto nv = static_cast<std::uint32_t>(2 + rng.below(5));
  const auto w = random_window(rng, nu, nv, 5, 0.6);
  const std::size_t d = 2 + rng.below(3);
  auto enc = EncoderParams<double>::glorot(nu, nv, 5, d + 2, d, accum, rng);
  auto dec = DecoderParams<double>::glorot(5, d, rng);
  std::vector<RatedPair> batch;
  for (const auto& o : w.observed()) batch.push_back({o.user, o.item, o.rating});
  const NormalizationSpec ns{norm};
  const DropoutSpec drop{0.3, Mode::train};
  const std::uint64_t mask_seed = rng.next_u64();

  auto enc_grad = enc.zeros_like();
  auto dec_grad = dec.zeros_like();
  {
    Rng r(mask_seed);
    const auto acts = encoder_forward(w, enc, ns, drop, r);
    auto nll = nll_loss<double>(batch, acts.users(), acts.items(), dec);
    assign_params(enc_grad, encoder_backward(w, enc, ns, acts, nll.grad_users, nll.grad_items));
    assign_params(dec_grad, std::move(nll.grad_q));
  }
  auto refs = param_refs(enc, enc_grad);
  for (auto& r : param_refs(dec, dec_grad)) refs.push_back(r);
  return gradient_check(
      [&] {
        Rng r(mask_seed);
        const auto acts = encoder_forward(w, enc, ns, drop, r);
        return nll_loss<double>(batch, acts.users(), acts.items(), dec).loss;
      },
      refs);
}

inline GradCheckResult check_decoder_nll(Rng& rng) {
  const std::size_t d = 1 + rng.below(4);
  const std::size_t nu = 1 + rng.below(6), nv = 1 + rng.below(6);
  MatrixD users(nu, d), items(nv, d);
  randomize(users, rng, 1.0);
  randomize(items, rng, 1.0);
  auto dec = DecoderParams<double>::glorot(5, d, rng);
  std::vector<RatedPair> batch;
  for (std::uint32_t u = 0; u < nu; ++u)
    for (std::uint32_t i = 0; i < nv; ++i)
      if (rng.uniform() < 0.7) batch.push_back({u, i, static_cast<std::uint8_t>(1 + rng.below(5))});
  if (batch.empty()) batch.push_back({0, 0, 3});

  auto nll = nll_loss<double>(batch, users, items, dec);
  auto dq = std::move(nll.grad_q);
  std::vector<ParamRef<double>> refs = param_refs(dec, dq);
  refs.push_back({"dec/users", &users, &nll.grad_users});
  refs.push_back({"dec/items", &items, &nll.grad_items});
  return gradient_check([&] { return nll_loss<double>(batch, users, items, dec).loss; }, refs);
}

inline GradCheckResult check_sequence(SeqModel<double>& model, const StepSequence<double>& seq, Rng& rng) {
  for (auto& l : model.layers) randomize(l.bias, rng, 0.5);
  randomize(model.b_out, rng, 0.5);
  auto grads = model.zeros_like();
  seq_loss_and_grad(model, seq, false, &grads);
  return gradient_check([&] { return seq_loss_and_grad(model, seq, false, static_cast<SeqModel<double>*>(nullptr)); },
                        param_refs(model, grads));
}

inline StepSequence<double> random_sequence(Rng& rng, std::size_t steps, std::size_t rows, std::size_t cols) {
  StepSequence<double> seq;
  for (std::size_t t = 0; t < steps; ++t) {
    MatrixD x(rows, cols);
    randomize(x, rng, 1.0);
    seq.push_back(std::move(x));
  }
  return seq;
}

}  // namespace detail

/// Runs every gradient check; `seed` picks the random instances.
inline std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 42) {
  std::vector<GradSuiteEntry> out;
  Rng root(seed);
  std::uint64_t stream = 0;

  for (auto accum : {Accum::sum, Accum::stack})
    for (auto norm : {NormMode::left, NormMode::symmetric}) {
      Rng rng = root.split(++stream);
      out.push_back({"encoder+decoder accum=" + to_string(accum) + " norm=" + to_string(norm),
                     detail::check_encoder_decoder(rng, accum, norm)});
    }
  {
    Rng rng = root.split(++stream);
    out.push_back({"decoder nll", detail::check_decoder_nll(rng)});
  }
  for (auto cell : {CellType::vanilla, CellType::gru, CellType::lstm})
    for (std::size_t layers = 1; layers <= 3; ++layers) {
      Rng rng = root.split(++stream);
      const std::size_t d = 1 + rng.below(4);
      SeqModelConfig cfg{cell, layers, d, d, 1 + rng.below(4)};
      auto model = SeqModel<double>::glorot(cfg, rng);
      const auto seq = detail::random_sequence(rng, 2 + rng.below(4), 1 + rng.below(6), d);
      out.push_back({to_string(cell) + " layers=" + std::to_string(layers), detail::check_sequence(model, seq, rng)});
    }
  for (std::size_t d = 1; d <= 2; ++d) {
    Rng rng = root.split(++stream);
    auto model = SeqModel<double>::glorot(decoder_weight_config(d, 2), rng);
    std::vector<std::vector<MatrixD>> qs;
    for (std::size_t t = 0; t < 4; ++t) {
      std::vector<MatrixD> levels(5, MatrixD(d, d));
      for (auto& q : levels) detail::randomize(q, rng, 1.0);
      qs.push_back(std::move(levels));
    }
    out.push_back({"decoder-weight lstm d=" + std::to_string(d),
                   detail::check_sequence(model, decoder_weight_sequence(qs), rng)});
  }
  return out;
}

}  // namespace tgmc
