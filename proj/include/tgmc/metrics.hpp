#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tgmc/errors.hpp"

namespace tgmc {

struct Prediction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::size_t window = 0;  // 1-based absolute window index
  double predicted = 0.0;
  int actual = 0;
  bool cold_start = false;
};

struct WindowMetrics {
  std::size_t window = 0;
  std::size_t count = 0;
  double rmse = 0.0;
  double mae = 0.0;
};

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
  std::size_t cold_start_count = 0;
  double cold_start_rmse = 0.0;
  std::vector<WindowMetrics> per_window;
};

namespace detail {
struct ErrorSums {
  double sq = 0.0;
  double abs = 0.0;
  std::size_t n = 0;
  void add(double err) {
    sq += err * err;
    abs += std::abs(err);
    ++n;
  }
  double rmse() const { return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0; }
  double mae() const { return n ? abs / static_cast<double>(n) : 0.0; }
};
}  // namespace detail

/// RMSE and MAE over all predictions, per window and for cold-start queries.
inline EvalReport evaluate(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw ValidationError("evaluate: empty test set");
  detail::ErrorSums all, cold;
  std::map<std::size_t, detail::ErrorSums> by_window;
  for (const auto& p : predictions) {
    const double err = p.predicted - static_cast<double>(p.actual);
    all.add(err);
    by_window[p.window].add(err);
    if (p.cold_start) cold.add(err);
  }
  EvalReport r;
  r.rmse = all.rmse();
  r.mae = all.mae();
  r.count = all.n;
  r.cold_start_count = cold.n;
  r.cold_start_rmse = cold.rmse();
  for (const auto& [w, s] : by_window) r.per_window.push_back({w, s.n, s.rmse(), s.mae()});
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample standard deviation (n-1; zero for a single value).
inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

struct MultiRunReport {
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> runs;
  MeanStd rmse;
  MeanStd mae;
};

inline MultiRunReport aggregate_runs(std::vector<std::uint64_t> seeds, std::vector<EvalReport> runs) {
  MultiRunReport m;
  m.seeds = std::move(seeds);
  m.runs = std::move(runs);
  std::vector<double> rmse, mae;
  for (const auto& r : m.runs) {
    rmse.push_back(r.rmse);
    mae.push_back(r.mae);
  }
  m.rmse = mean_std(rmse);
  m.mae = mean_std(mae);
  return m;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["rmse"] = r.rmse;
  j["mae"] = r.mae;
  j["count"] = r.count;
  j["cold_start_count"] = r.cold_start_count;
  j["cold_start_rmse"] = r.cold_start_rmse;
  j["per_window"] = nlohmann::json::array();
  for (const auto& w : r.per_window)
    j["per_window"].push_back({{"window", w.window}, {"count", w.count}, {"rmse", w.rmse}, {"mae", w.mae}});
  return j;
}

inline nlohmann::json to_json(const MultiRunReport& m) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (std::size_t k = 0; k < m.runs.size(); ++k) {
    auto r = to_json(m.runs[k]);
    r["seed"] = m.seeds.at(k);
    j["runs"].push_back(r);
  }
  j["rmse"] = {{"mean", m.rmse.mean}, {"std", m.rmse.std}};
  j["mae"] = {{"mean", m.mae.mean}, {"std", m.mae.std}};
  return j;
}

/// Aligned plain-text table.
inline std::string render_table(const MultiRunReport& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(8) << "run" << std::setw(8) << "seed" << std::right << std::setw(10) << "rmse"
     << std::setw(10) << "mae" << std::setw(10) << "count" << std::setw(8) << "cold" << '\n';
  for (std::size_t k = 0; k < m.runs.size(); ++k) {
    const auto& r = m.runs[k];
    os << std::left << std::setw(8) << k + 1 << std::setw(8) << m.seeds.at(k) << std::right << std::setw(10)
       << r.rmse << std::setw(10) << r.mae << std::setw(10) << r.count << std::setw(8) << r.cold_start_count
       << '\n';
  }
  os << std::left << std::setw(16) << "mean" << std::right << std::setw(10) << m.rmse.mean << std::setw(10)
     << m.mae.mean << '\n';
  os << std::left << std::setw(16) << "std" << std::right << std::setw(10) << m.rmse.std << std::setw(10)
     << m.mae.std << '\n';
  if (!m.runs.empty()) {
    os << "\nper window (run 1)\n";
    os << std::left << std::setw(8) << "window" << std::right << std::setw(10) << "count" << std::setw(10)
       << "rmse" << std::setw(10) << "mae" << '\n';
    for (const auto& w : m.runs[0].per_window)
      os << std::left << std::setw(8) << w.window << std::right << std::setw(10) << w.count << std::setw(10)
         << w.rmse << std::setw(10) << w.mae << '\n';
  }
  return os.str();
}

}  // namespace tgmc
