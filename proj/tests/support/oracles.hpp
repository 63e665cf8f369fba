#pragma once

// Independent reference computations used by tests and the acceptance
// binary. They deliberately avoid the library's sparse paths.

#include <cmath>
#include <vector>

#include "tgmc/encoder.hpp"
#include "tgmc/graph.hpp"
#include "tgmc/rng.hpp"

namespace tgmc::testing {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense dense_matmul(const Dense& a, const Dense& b) {
  Dense out = zeros(a.size(), b.empty() ? 0 : b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

template <typename T>
Dense to_dense(const Tensor2<T>& m) {
  Dense out = zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Dense dense_transpose(const Dense& a) {
  Dense out = zeros(a.empty() ? 0 : a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[j][i] = a[i][j];
  return out;
}

/// Encoder forward in eval mode from full per-level incidence matrices:
/// pre_r = A_r W_r^T with A_r[n][src] = 1/c, then accumulate, ReLU, dense
/// projection, ReLU. Returns {U, V}.
template <typename T>
std::pair<Dense, Dense> dense_encoder(const std::vector<RatingEvent>& events, std::uint32_t nu, std::uint32_t nv,
                                      int R, const EncoderParams<T>& p, NormMode mode) {
  // incidence[r][u][i] = 1 if (u, i) rated r
  std::vector<Dense> inc(R, zeros(nu, nv));
  for (const auto& e : events) inc[e.rating - 1][e.user][e.item] = 1.0;
  std::pair<Dense, Dense> out;
  for (int side = 0; side < 2; ++side) {
    const std::size_t count = side == 0 ? nu : nv;
    const std::size_t H = p.hidden;
    const std::size_t width = p.accum == Accum::sum ? H : H * static_cast<std::size_t>(R);
    Dense pre = zeros(count, width);
    for (int r = 0; r < R; ++r) {
      const Dense M = side == 0 ? inc[r] : dense_transpose(inc[r]);
      std::vector<double> deg_recv(M.size(), 0.0), deg_src(M.empty() ? 0 : M[0].size(), 0.0);
      for (std::size_t n = 0; n < M.size(); ++n)
        for (std::size_t s = 0; s < M[n].size(); ++s) {
          deg_recv[n] += M[n][s];
          deg_src[s] += M[n][s];
        }
      Dense A = zeros(M.size(), deg_src.size());
      for (std::size_t n = 0; n < M.size(); ++n)
        for (std::size_t s = 0; s < M[n].size(); ++s)
          if (M[n][s] != 0.0)
            A[n][s] = mode == NormMode::left ? 1.0 / deg_recv[n] : 1.0 / std::sqrt(deg_recv[n] * deg_src[s]);
      const Dense part = dense_matmul(A, dense_transpose(to_dense(p.msg[side][r])));
      const std::size_t off = p.accum == Accum::sum ? 0 : static_cast<std::size_t>(r) * H;
      for (std::size_t n = 0; n < count; ++n)
        for (std::size_t h = 0; h < H; ++h) pre[n][off + h] += part[n][h];
    }
    for (auto& row : pre)
      for (auto& v : row) v = std::max(0.0, v);
    Dense z = dense_matmul(pre, dense_transpose(to_dense(p.dense[side])));
    for (auto& row : z)
      for (auto& v : row) v = std::max(0.0, v);
    (side == 0 ? out.first : out.second) = std::move(z);
  }
  return out;
}

template <typename T>
double max_abs_diff(const Dense& a, const Tensor2<T>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - double(b(i, j))));
  return worst;
}

/// Random window events with distinct (user, item) pairs.
inline std::vector<RatingEvent> random_window_events(Rng& rng, std::uint32_t nu, std::uint32_t nv, int R,
                                                     double density) {
  std::vector<RatingEvent> ev;
  for (std::uint32_t u = 0; u < nu; ++u)
    for (std::uint32_t i = 0; i < nv; ++i)
      if (rng.uniform() < density) ev.push_back({u, i, static_cast<std::uint8_t>(1 + rng.below(R)), 0});
  return ev;
}

}  // namespace tgmc::testing
