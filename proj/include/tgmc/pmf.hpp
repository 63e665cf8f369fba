#pragma once

// Probabilistic matrix factorization baseline: squared loss with L2
// regularization, plain SGD, no bias terms.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "tgmc/ingest.hpp"
#include "tgmc/metrics.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/tensor.hpp"

namespace tgmc {

struct PmfConfig {
  std::size_t dim = 50;
  double learning_rate = 0.005;
  std::size_t epochs = 100;
  double regularization = 0.02;
  double init_std = 0.1;
  std::uint64_t seed = 42;
};

struct PmfModel {
  MatrixD users;
  MatrixD items;
  int max_rating = 5;

  double raw_score(std::uint32_t u, std::uint32_t i) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < users.cols(); ++k) acc += users(u, k) * items(i, k);
    return acc;
  }

  double predict(std::uint32_t u, std::uint32_t i) const {
    return std::clamp(raw_score(u, i), 1.0, static_cast<double>(max_rating));
  }
};

inline PmfModel train_pmf(std::span<const RatingEvent> ratings, const DatasetStats& stats, const PmfConfig& cfg) {
  if (cfg.dim == 0) throw ValidationError("pmf: dim must be positive");
  Rng rng(cfg.seed);
  PmfModel m;
  m.max_rating = stats.max_rating;
  m.users = MatrixD(stats.num_users, cfg.dim);
  m.items = MatrixD(stats.num_items, cfg.dim);
  for (auto& v : m.users.flat()) v = cfg.init_std * rng.normal();
  for (auto& v : m.items.flat()) v = cfg.init_std * rng.normal();

  std::vector<std::size_t> order(ratings.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k : order) {
      const auto& ev = ratings[k];
      const double err = static_cast<double>(ev.rating) - m.raw_score(ev.user, ev.item);
      auto pu = m.users.row(ev.user);
      auto qi = m.items.row(ev.item);
      for (std::size_t f = 0; f < cfg.dim; ++f) {
        const double u = pu[f];
        const double q = qi[f];
        pu[f] += cfg.learning_rate * (err * q - cfg.regularization * u);
        qi[f] += cfg.learning_rate * (err * u - cfg.regularization * q);
      }
    }
  }
  return m;
}

/// Pools every training window's ratings (latest rating per pair), trains
/// PMF and predicts each test rating.
inline std::vector<Prediction> pmf_predictions(const WindowedDataset& ds, std::size_t train_windows,
                                               const PmfConfig& cfg) {
  const auto split = train_test_split(ds, train_windows);
  WindowEvents pooled;
  for (std::size_t t = 0; t < train_windows; ++t)
    pooled.insert(pooled.end(), ds.raw_windows[t].begin(), ds.raw_windows[t].end());
  pooled = detail::dedup_latest(pooled);
  const auto model = train_pmf(pooled, ds.stats, cfg);

  std::vector<bool> seen_user(ds.stats.num_users), seen_item(ds.stats.num_items);
  for (const auto& e : pooled) {
    seen_user[e.user] = true;
    seen_item[e.item] = true;
  }
  std::vector<Prediction> preds;
  for (std::size_t k = 0; k < split.test.size(); ++k)
    for (const auto& e : split.test[k])
      preds.push_back({e.user, e.item, train_windows + k + 1, model.predict(e.user, e.item), e.rating,
                       !seen_user[e.user] || !seen_item[e.item]});
  return preds;
}

inline EvalReport pmf_baseline(const WindowedDataset& ds, std::size_t train_windows, const PmfConfig& cfg) {
  const auto preds = pmf_predictions(ds, train_windows, cfg);
  return evaluate(preds);
}

}  // namespace tgmc
