#pragma once

// Seeded model comparisons shared by the acceptance binaries: accumulative
// vs non-accumulative windows, temporal vs static, and recurrent cell type.

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tgmc/metrics.hpp"
#include "tgmc/pipeline.hpp"

namespace tgmc::testing {

struct DeskScale {
  std::size_t hidden = 32;
  std::size_t embed = 8;
  std::size_t epochs = 300;
  std::size_t temporal_epochs = 250;
};

inline PipelineConfig desk_pipeline(CellType cell, std::uint64_t seed, const DeskScale& scale = {}) {
  PipelineConfig c;
  c.window.hidden = scale.hidden;
  c.window.embed = scale.embed;
  c.window.epochs = scale.epochs;
  c.window.seed = seed;
  c.temporal.cell = cell;
  c.temporal.layers = 2;
  c.temporal.share_user_item = true;
  c.temporal.epochs = scale.temporal_epochs;
  c.temporal.seed = seed;
  return c;
}

struct ComparisonRuns {
  std::vector<double> accumulative;      // LSTM
  std::vector<double> non_accumulative;  // LSTM
  std::vector<double> static_model;
  std::vector<double> vanilla;
  std::vector<double> gru;
};

/// `make_dataset(accumulative)` builds the windowed dataset; seeds 1..runs.
inline ComparisonRuns run_comparisons(const std::function<WindowedDataset(bool)>& make_dataset, std::size_t runs,
                                      const DeskScale& scale = {}) {
  const auto acc = make_dataset(true);
  const auto raw = make_dataset(false);
  ComparisonRuns out;
  for (std::uint64_t seed = 1; seed <= runs; ++seed) {
    out.accumulative.push_back(run_pipeline(acc, desk_pipeline(CellType::lstm, seed, scale)).report.rmse);
    out.non_accumulative.push_back(run_pipeline(raw, desk_pipeline(CellType::lstm, seed, scale)).report.rmse);
    auto st = desk_pipeline(CellType::lstm, seed, scale);
    st.static_model = true;
    out.static_model.push_back(run_pipeline(acc, st).report.rmse);
    out.vanilla.push_back(run_pipeline(acc, desk_pipeline(CellType::vanilla, seed, scale)).report.rmse);
    out.gru.push_back(run_pipeline(acc, desk_pipeline(CellType::gru, seed, scale)).report.rmse);
    std::printf("       seed %llu: acc %.4f  non-acc %.4f  static %.4f  vanilla %.4f  gru %.4f\n",
                static_cast<unsigned long long>(seed), out.accumulative.back(), out.non_accumulative.back(),
                out.static_model.back(), out.vanilla.back(), out.gru.back());
    std::fflush(stdout);
  }
  return out;
}

inline std::size_t wins(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) n += a[k] < b[k] ? 1 : 0;
  return n;
}

using Reporter = std::function<void(bool, const std::string&, const std::string&)>;

inline void report_comparisons(const ComparisonRuns& r, const std::string& label, const Reporter& report) {
  const std::size_t n = r.accumulative.size();
  const std::size_t need = n >= 5 ? n - 1 : n;
  char buf[256];

  const auto acc_wins = wins(r.accumulative, r.non_accumulative);
  const auto acc = mean_std(r.accumulative), raw = mean_std(r.non_accumulative);
  std::snprintf(buf, sizeof buf, "accumulative wins %zu/%zu; mean RMSE %.4f vs %.4f", acc_wins, n, acc.mean, raw.mean);
  report(acc_wins >= need, "4 accumulative < non-accumulative (" + label + ")", buf);

  const auto tg_wins = wins(r.accumulative, r.static_model);
  const auto st = mean_std(r.static_model);
  std::snprintf(buf, sizeof buf, "temporal wins %zu/%zu; mean RMSE %.4f vs %.4f", tg_wins, n, acc.mean, st.mean);
  report(tg_wins >= need, "5 temporal < static (" + label + ")", buf);

  const double van = mean_std(r.vanilla).mean, gru = mean_std(r.gru).mean;
  const bool vanilla_dominates = van + 0.02 < acc.mean && van + 0.02 < gru;
  std::snprintf(buf, sizeof buf, "mean RMSE lstm %.4f, gru %.4f, vanilla %.4f", acc.mean, gru, van);
  report(!vanilla_dominates, "6 cell ordering (" + label + ")", buf);
}

}  // namespace tgmc::testing
