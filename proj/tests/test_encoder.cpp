#include <gtest/gtest.h>

#include <numeric>

#include "support/oracles.hpp"
#include "tgmc/decoder.hpp"
#include "tgmc/encoder.hpp"
#include "tgmc/gradcheck.hpp"
#include "tgmc/gradsuite.hpp"

using namespace tgmc;

namespace {

const DropoutSpec kEval{0.0, Mode::eval};

}  // namespace

TEST(Encoder, SingleEdgeHidden) {
  const auto w = build_rating_window(std::vector<RatingEvent>{{0, 0, 2, 0}}, 1, 1, 5);
  auto p = EncoderParams<double>::zeros(1, 1, 5, 3, 3, Accum::sum);
  p.msg[0][1](0, 0) = 1.0;
  p.msg[0][1](1, 0) = -1.0;
  p.msg[0][1](2, 0) = 2.0;
  p.dense[0] = MatrixD{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Rng rng(1);
  const auto acts = encoder_forward(w, p, NormalizationSpec{}, kEval, rng);
  EXPECT_EQ(acts.hidden[0](0, 0), 1.0);
  EXPECT_EQ(acts.hidden[0](0, 1), 0.0);
  EXPECT_EQ(acts.hidden[0](0, 2), 2.0);
  EXPECT_EQ(acts.users()(0, 2), 2.0);
}

TEST(Encoder, IsolatedNodesMapToZero) {
  Rng rng(2);
  const auto w = build_rating_window(std::vector<RatingEvent>{{0, 0, 4, 0}, {1, 2, 1, 0}}, 4, 4, 5);
  for (auto accum : {Accum::sum, Accum::stack}) {
    const auto p = EncoderParams<double>::glorot(4, 4, 5, 6, 3, accum, rng);
    const auto acts = encoder_forward(w, p, NormalizationSpec{}, kEval, rng);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(acts.users()(2, k), 0.0);
      EXPECT_EQ(acts.users()(3, k), 0.0);
      EXPECT_EQ(acts.items()(1, k), 0.0);
      EXPECT_EQ(acts.items()(3, k), 0.0);
    }
    for (double v : acts.hidden[0].row(3)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Encoder, MatchesDenseIncidenceOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ev = tgmc::testing::random_window_events(rng, 6, 5, 5, 0.5);
    const auto w = build_rating_window(ev, 6, 5, 5);
    const auto accum = trial % 2 ? Accum::stack : Accum::sum;
    const auto mode = trial % 3 ? NormMode::symmetric : NormMode::left;
    const auto p = EncoderParams<float>::glorot(6, 5, 5, 7, 4, accum, rng);
    const auto acts = encoder_forward(w, p, NormalizationSpec{mode}, kEval, rng);
    const auto [U, V] = tgmc::testing::dense_encoder(ev, 6, 5, 5, p, mode);
    EXPECT_LT(tgmc::testing::max_abs_diff(U, acts.users()), 1e-5);
    EXPECT_LT(tgmc::testing::max_abs_diff(V, acts.items()), 1e-5);
  }
}

TEST(Encoder, DimensionMismatchThrows) {
  Rng rng(4);
  const auto w = build_rating_window(std::vector<RatingEvent>{{0, 0, 4, 0}}, 2, 2, 5);
  const auto p = EncoderParams<float>::glorot(3, 2, 5, 4, 2, Accum::sum, rng);
  EXPECT_THROW(encoder_forward(w, p, NormalizationSpec{}, kEval, rng), ShapeError);
}

TEST(Encoder, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  const auto ev = tgmc::testing::random_window_events(rng, 5, 4, 5, 0.6);
  const auto w = build_rating_window(ev, 5, 4, 5);
  auto p = EncoderParams<double>::glorot(5, 4, 5, 6, 3, Accum::sum, rng);
  const auto acts = encoder_forward(w, p, NormalizationSpec{}, DropoutSpec{0.3, Mode::train}, rng);
  auto g = encoder_backward(w, p, NormalizationSpec{}, acts, MatrixD(5, 3), MatrixD(4, 3));
  g.for_each_named([](const std::string& name, MatrixD& t) { EXPECT_EQ(frobenius_sq(t), 0.0) << name; });
}

TEST(Encoder, AbsentLevelHasZeroGradient) {
  Rng rng(6);
  std::vector<RatingEvent> ev{{0, 0, 1, 0}, {1, 1, 5, 0}, {2, 0, 5, 0}};
  const auto w = build_rating_window(ev, 3, 2, 5);
  auto p = EncoderParams<double>::glorot(3, 2, 5, 4, 2, Accum::stack, rng);
  const auto acts = encoder_forward(w, p, NormalizationSpec{}, kEval, rng);
  MatrixD gu(3, 2, 1.0), gi(2, 2, 1.0);
  const auto g = encoder_backward(w, p, NormalizationSpec{}, acts, gu, gi);
  for (int r : {2, 3, 4}) {
    EXPECT_EQ(frobenius_sq(g.msg[0][r - 1]), 0.0);
    EXPECT_EQ(frobenius_sq(g.msg[1][r - 1]), 0.0);
  }
}

TEST(Encoder, BackwardWithoutForwardThrows) {
  Rng rng(7);
  const auto w = build_rating_window(std::vector<RatingEvent>{{0, 0, 4, 0}}, 1, 1, 5);
  const auto p = EncoderParams<double>::glorot(1, 1, 5, 2, 1, Accum::sum, rng);
  EncoderActivations<double> none;
  EXPECT_THROW(encoder_backward(w, p, NormalizationSpec{}, none, MatrixD(1, 1), MatrixD(1, 1)),
               MissingArtifactError);
}

TEST(Encoder, TinyGradientCheck) {
  // 2 users, 2 items, H=3, d=2, with dropout active on a fixed mask.
  Rng rng(8);
  std::vector<RatingEvent> ev{{0, 0, 5, 0}, {0, 1, 2, 0}, {1, 0, 4, 0}, {1, 1, 5, 0}};
  const auto w = build_rating_window(ev, 2, 2, 5);
  for (auto accum : {Accum::sum, Accum::stack}) {
    auto p = EncoderParams<double>::glorot(2, 2, 5, 3, 2, accum, rng);
    auto dec = DecoderParams<double>::glorot(5, 2, rng);
    std::vector<RatedPair> batch;
    for (const auto& o : w.observed()) batch.push_back({o.user, o.item, o.rating});
    const DropoutSpec drop{0.3, Mode::train};
    auto forward = [&] {
      Rng r(99);
      return encoder_forward(w, p, NormalizationSpec{}, drop, r);
    };
    auto gp = p.zeros_like();
    auto gd = dec.zeros_like();
    {
      const auto acts = forward();
      auto nll = nll_loss<double>(batch, acts.users(), acts.items(), dec);
      assign_params(gp, encoder_backward(w, p, NormalizationSpec{}, acts, nll.grad_users, nll.grad_items));
      assign_params(gd, std::move(nll.grad_q));
    }
    auto refs = param_refs(p, gp);
    for (auto& r : param_refs(dec, gd)) refs.push_back(r);
    const auto res = gradient_check(
        [&] {
          const auto acts = forward();
          return nll_loss<double>(batch, acts.users(), acts.items(), dec).loss;
        },
        refs);
    EXPECT_LT(res.max_relative_error, 1e-5) << res.worst_param;
  }
}

TEST(Encoder, RandomizedGradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    for (auto accum : {Accum::sum, Accum::stack})
      for (auto mode : {NormMode::left, NormMode::symmetric}) {
        const auto res = detail::check_encoder_decoder(rng, accum, mode);
        EXPECT_LT(res.max_relative_error, 1e-5) << res.worst_param;
      }
  }
}

TEST(Encoder, PermutationEquivariance) {
  Rng rng(9);
  const std::uint32_t nu = 6, nv = 5;
  const auto ev = tgmc::testing::random_window_events(rng, nu, nv, 5, 0.5);
  std::vector<std::uint32_t> perm(nu);
  std::iota(perm.begin(), perm.end(), 0u);
  rng.shuffle(std::span(perm));
  auto ev_perm = ev;
  for (auto& e : ev_perm) e.user = perm[e.user];

  const auto p = EncoderParams<double>::glorot(nu, nv, 5, 6, 3, Accum::sum, rng);
  auto q = p;
  // user-side features are one-hot: permute the columns of the user->item weights
  for (int r = 0; r < 5; ++r)
    for (std::uint32_t u = 0; u < nu; ++u)
      for (std::size_t h = 0; h < p.hidden; ++h) q.msg[1][r](h, perm[u]) = p.msg[1][r](h, u);

  const auto a = encoder_forward(build_rating_window(ev, nu, nv, 5), p, NormalizationSpec{}, kEval, rng);
  const auto b = encoder_forward(build_rating_window(ev_perm, nu, nv, 5), q, NormalizationSpec{}, kEval, rng);
  for (std::uint32_t u = 0; u < nu; ++u)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(b.users()(perm[u], k), a.users()(u, k), 1e-12);
  EXPECT_LT(max_abs_diff(a.items(), b.items()), 1e-12);
}

TEST(Encoder, CheckpointNames) {
  Rng rng(10);
  auto p = EncoderParams<float>::glorot(2, 3, 2, 4, 2, Accum::sum, rng);
  std::vector<std::string> names;
  p.for_each_named([&](const std::string& n, Matrix&) { names.push_back(n); });
  const std::vector<std::string> want{"enc/user/item_to_user/r1", "enc/user/item_to_user/r2",
                                      "enc/item/user_to_item/r1", "enc/item/user_to_item/r2",
                                      "enc/user/dense",           "enc/item/dense"};
  EXPECT_EQ(names, want);
  EXPECT_EQ(p.msg[0][0].cols(), 3u);  // item->user weights are H x N_V
  EXPECT_EQ(p.msg[1][0].cols(), 2u);
  EXPECT_EQ(EncoderParams<float>::zeros(2, 3, 5, 4, 2, Accum::stack).dense[0].cols(), 20u);
}
