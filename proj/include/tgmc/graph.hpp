#pragma once

// One time window as a bipartite user-item graph split by rating level.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgmc/errors.hpp"
#include "tgmc/ingest.hpp"

namespace tgmc {

enum class Direction { item_to_user, user_to_item };
enum class NormMode { left, symmetric };

struct NormalizationSpec {
  NormMode mode = NormMode::symmetric;
};

inline NormMode parse_norm_mode(std::string_view s) {
  if (s == "left") return NormMode::left;
  if (s == "symmetric") return NormMode::symmetric;
  throw ValidationError("unknown normalization '" + std::string(s) + "'");
}

inline std::string to_string(NormMode m) { return m == NormMode::left ? "left" : "symmetric"; }

struct Edge {
  std::uint32_t user;
  std::uint32_t item;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct ObservedRating {
  std::uint32_t user;
  std::uint32_t item;
  std::uint8_t rating;
};

/// Edges of a single rating level, indexed from both sides (CSR).
struct LevelAdjacency {
  std::vector<Edge> edges;                  // sorted by (user, item)
  std::vector<std::uint32_t> user_offsets;  // N_U + 1
  std::vector<std::uint32_t> user_neighbors;
  std::vector<std::uint32_t> item_offsets;  // N_V + 1
  std::vector<std::uint32_t> item_neighbors;

  std::uint32_t user_degree(std::uint32_t u) const { return user_offsets[u + 1] - user_offsets[u]; }
  std::uint32_t item_degree(std::uint32_t i) const { return item_offsets[i + 1] - item_offsets[i]; }

  std::span<const std::uint32_t> items_of(std::uint32_t u) const {
    return {user_neighbors.data() + user_offsets[u], user_degree(u)};
  }
  std::span<const std::uint32_t> users_of(std::uint32_t i) const {
    return {item_neighbors.data() + item_offsets[i], item_degree(i)};
  }

  bool contains(std::uint32_t u, std::uint32_t i) const {
    auto nb = items_of(u);
    return std::binary_search(nb.begin(), nb.end(), i);
  }
};

class RatingWindow {
 public:
  RatingWindow() = default;

  std::size_t index() const { return index_; }
  std::uint32_t num_users() const { return num_users_; }
  std::uint32_t num_items() const { return num_items_; }
  int max_rating() const { return max_rating_; }

  /// Adjacency of rating level r (1-based).
  const LevelAdjacency& level(int r) const { return levels_.at(static_cast<std::size_t>(r - 1)); }

  std::uint32_t user_degree(int r, std::uint32_t u) const { return level(r).user_degree(u); }
  std::uint32_t item_degree(int r, std::uint32_t i) const { return level(r).item_degree(i); }

  /// Omega_t: every observed (user, item, rating), sorted by (user, item).
  const std::vector<ObservedRating>& observed() const { return observed_; }
  std::size_t num_edges() const { return observed_.size(); }

  friend RatingWindow build_rating_window(std::span<const RatingEvent>, std::uint32_t, std::uint32_t, int,
                                          std::size_t);

 private:
  std::size_t index_ = 0;
  std::uint32_t num_users_ = 0;
  std::uint32_t num_items_ = 0;
  int max_rating_ = 0;
  std::vector<LevelAdjacency> levels_;
  std::vector<ObservedRating> observed_;
};

inline RatingWindow build_rating_window(std::span<const RatingEvent> events, std::uint32_t num_users,
                                        std::uint32_t num_items, int max_rating, std::size_t index = 0) {
  if (max_rating < 1) throw ValidationError("max_rating must be positive");
  RatingWindow w;
  w.index_ = index;
  w.num_users_ = num_users;
  w.num_items_ = num_items;
  w.max_rating_ = max_rating;

  w.observed_.reserve(events.size());
  for (const auto& e : events) {
    if (e.rating < 1 || e.rating > max_rating)
      throw ValidationError("rating " + std::to_string(e.rating) + " outside [1," + std::to_string(max_rating) + "]");
    if (e.user >= num_users || e.item >= num_items) throw ValidationError("edge index outside graph bounds");
    w.observed_.push_back({e.user, e.item, e.rating});
  }
  std::sort(w.observed_.begin(), w.observed_.end(), [](const auto& a, const auto& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  for (std::size_t k = 1; k < w.observed_.size(); ++k)
    if (w.observed_[k].user == w.observed_[k - 1].user && w.observed_[k].item == w.observed_[k - 1].item)
      throw ValidationError("duplicate (user, item) pair in window");

  w.levels_.resize(static_cast<std::size_t>(max_rating));
  for (const auto& o : w.observed_) w.levels_[o.rating - 1u].edges.push_back({o.user, o.item});

  for (auto& lvl : w.levels_) {
    lvl.user_offsets.assign(num_users + 1, 0);
    lvl.item_offsets.assign(num_items + 1, 0);
    for (const auto& e : lvl.edges) {
      ++lvl.user_offsets[e.user + 1];
      ++lvl.item_offsets[e.item + 1];
    }
    for (std::uint32_t u = 0; u < num_users; ++u) lvl.user_offsets[u + 1] += lvl.user_offsets[u];
    for (std::uint32_t i = 0; i < num_items; ++i) lvl.item_offsets[i + 1] += lvl.item_offsets[i];
    lvl.user_neighbors.resize(lvl.edges.size());
    lvl.item_neighbors.resize(lvl.edges.size());
    auto ucur = lvl.user_offsets;
    auto icur = lvl.item_offsets;
    // edges are (user, item)-sorted, so both neighbor lists come out sorted
    for (const auto& e : lvl.edges) {
      lvl.user_neighbors[ucur[e.user]++] = e.item;
      lvl.item_neighbors[icur[e.item]++] = e.user;
    }
  }
  return w;
}

inline RatingWindow build_rating_window(std::span<const RatingEvent> events, const DatasetStats& stats,
                                        std::size_t index = 0) {
  return build_rating_window(events, stats.num_users, stats.num_items, stats.max_rating, index);
}

/// c_{i,j} for the edge (user, item) at level r. Left mode is the degree
/// of the receiving node; symmetric mode is sqrt(deg_user * deg_item).
inline double normalization(const RatingWindow& w, const NormalizationSpec& spec, std::uint32_t user,
                            std::uint32_t item, int r, Direction direction) {
  if (r < 1 || r > w.max_rating()) throw ValidationError("rating level out of range");
  if (user >= w.num_users() || item >= w.num_items() || !w.level(r).contains(user, item))
    throw ValidationError("normalization: edge (" + std::to_string(user) + ", " + std::to_string(item) +
                          ") not present at level " + std::to_string(r));
  const double du = w.user_degree(r, user);
  const double di = w.item_degree(r, item);
  if (spec.mode == NormMode::symmetric) return std::sqrt(du * di);
  return direction == Direction::item_to_user ? du : di;
}

}  // namespace tgmc
