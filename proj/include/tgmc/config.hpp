#pragma once

// JSON run configuration. Every field is optional; missing fields keep the
// defaults below.
//
//   {
//     "dataset":   {"path": "ratings.dat", "format": "movielens-1m", "max_rating": 5},
//     "windowing": {"window_days": 91, "accumulative": true, "train_windows": 0, "origin": null},
//     "window_training": {"epochs": 2500, "batch_size": 100000, "learning_rate": 0.01, "dropout": 0.3,
//                         "hidden": 500, "embed": 50, "accum": "sum", "norm": "symmetric", "threads": 0},
//     "temporal":  {"cell": "lstm", "layers": 2, "epochs": 250, "learning_rate": 0.01,
//                   "share_user_item": true, "hidden": 0, "mask_inactive": false},
//     "decoder": "rnn", "static": false, "seed": 42, "runs": 1,
//     "pmf": {"dim": 50, "learning_rate": 0.005, "epochs": 100, "reg": 0.02, "init_std": 0.1}
//   }
//
// train_windows = 0 means "all windows but the last".

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/ingest.hpp"
#include "tgmc/pipeline.hpp"
#include "tgmc/pmf.hpp"

namespace tgmc {

struct RunConfig {
  std::string dataset_path;
  RatingFormat format = RatingFormat::movielens_1m;
  int max_rating = 5;
  std::int64_t window_days = 91;
  bool accumulative = true;
  std::size_t train_windows = 0;
  std::optional<std::int64_t> origin;
  WindowTrainConfig window;
  TemporalTrainConfig temporal;
  DecoderMode decoder = DecoderMode::rnn;
  bool static_model = false;
  std::uint64_t seed = 42;
  std::size_t runs = 1;
  PmfConfig pmf;

  WindowingConfig windowing() const {
    WindowingConfig w;
    w.window_length_seconds = window_days * kSecondsPerDay;
    w.accumulative = accumulative;
    w.train_windows = train_windows == 0 ? 1 : train_windows;
    w.origin = origin;
    return w;
  }

  /// Pipeline settings for one run with `run_seed`.
  PipelineConfig pipeline(std::uint64_t run_seed) const {
    PipelineConfig p;
    p.window = window;
    p.window.seed = run_seed;
    p.temporal = temporal;
    p.temporal.seed = run_seed;
    p.decoder = decoder;
    p.static_model = static_model;
    return p;
  }

  void validate() const {
    if (max_rating < 1 || max_rating > 255) throw ValidationError("max_rating must be in 1..255");
    if (window_days <= 0) throw ValidationError("window_days must be positive");
    if (runs < 1) throw ValidationError("runs must be at least 1");
    window.validate();
    temporal.validate();
  }
};

namespace detail {
template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}
}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  RunConfig c;
  try {
    using detail::read_opt;
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      read_opt(d, "path", c.dataset_path);
      if (d.contains("format")) c.format = parse_rating_format(d.at("format").get<std::string>());
      read_opt(d, "max_rating", c.max_rating);
    }
    if (j.contains("windowing")) {
      const auto& w = j.at("windowing");
      read_opt(w, "window_days", c.window_days);
      read_opt(w, "accumulative", c.accumulative);
      read_opt(w, "train_windows", c.train_windows);
      if (w.contains("origin") && !w.at("origin").is_null()) c.origin = w.at("origin").get<std::int64_t>();
    }
    if (j.contains("window_training")) {
      const auto& w = j.at("window_training");
      read_opt(w, "epochs", c.window.epochs);
      read_opt(w, "batch_size", c.window.batch_size);
      read_opt(w, "learning_rate", c.window.learning_rate);
      read_opt(w, "dropout", c.window.dropout);
      read_opt(w, "hidden", c.window.hidden);
      read_opt(w, "embed", c.window.embed);
      if (w.contains("accum")) c.window.accum = parse_accum(w.at("accum").get<std::string>());
      if (w.contains("norm")) c.window.norm = parse_norm_mode(w.at("norm").get<std::string>());
      read_opt(w, "threads", c.window.threads);
    }
    if (j.contains("temporal")) {
      const auto& t = j.at("temporal");
      if (t.contains("cell")) c.temporal.cell = parse_cell_type(t.at("cell").get<std::string>());
      read_opt(t, "layers", c.temporal.layers);
      read_opt(t, "epochs", c.temporal.epochs);
      read_opt(t, "learning_rate", c.temporal.learning_rate);
      read_opt(t, "share_user_item", c.temporal.share_user_item);
      read_opt(t, "hidden", c.temporal.hidden);
      read_opt(t, "mask_inactive", c.temporal.mask_inactive);
    }
    if (j.contains("decoder")) c.decoder = parse_decoder_mode(j.at("decoder").get<std::string>());
    read_opt(j, "static", c.static_model);
    read_opt(j, "seed", c.seed);
    read_opt(j, "runs", c.runs);
    if (j.contains("pmf")) {
      const auto& p = j.at("pmf");
      read_opt(p, "dim", c.pmf.dim);
      read_opt(p, "learning_rate", c.pmf.learning_rate);
      read_opt(p, "epochs", c.pmf.epochs);
      read_opt(p, "reg", c.pmf.regularization);
      read_opt(p, "init_std", c.pmf.init_std);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.pmf.seed = c.seed;
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dataset"] = {{"path", c.dataset_path}, {"format", to_string(c.format)}, {"max_rating", c.max_rating}};
  j["windowing"] = {{"window_days", c.window_days},
                    {"accumulative", c.accumulative},
                    {"train_windows", c.train_windows},
                    {"origin", c.origin ? nlohmann::json(*c.origin) : nlohmann::json(nullptr)}};
  j["window_training"] = {{"epochs", c.window.epochs},       {"batch_size", c.window.batch_size},
                          {"learning_rate", c.window.learning_rate}, {"dropout", c.window.dropout},
                          {"hidden", c.window.hidden},       {"embed", c.window.embed},
                          {"accum", to_string(c.window.accum)}, {"norm", to_string(c.window.norm)},
                          {"threads", c.window.threads}};
  j["temporal"] = {{"cell", to_string(c.temporal.cell)},
                   {"layers", c.temporal.layers},
                   {"epochs", c.temporal.epochs},
                   {"learning_rate", c.temporal.learning_rate},
                   {"share_user_item", c.temporal.share_user_item},
                   {"hidden", c.temporal.hidden},
                   {"mask_inactive", c.temporal.mask_inactive}};
  j["decoder"] = to_string(c.decoder);
  j["static"] = c.static_model;
  j["seed"] = c.seed;
  j["runs"] = c.runs;
  j["pmf"] = {{"dim", c.pmf.dim},
              {"learning_rate", c.pmf.learning_rate},
              {"epochs", c.pmf.epochs},
              {"reg", c.pmf.regularization},
              {"init_std", c.pmf.init_std}};
  return j;
}

/// FNV-1a over the compact JSON dump; stable across platforms.
inline std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("seed");
  j.erase("runs");
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tgmc
