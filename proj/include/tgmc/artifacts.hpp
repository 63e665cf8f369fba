#pragma once

// On-disk artifacts shared by the CLI stages: window-model and temporal
// checkpoints, the predictions CSV and the evaluation reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tgmc/checkpoint.hpp"
#include "tgmc/config.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/ingest.hpp"
#include "tgmc/metrics.hpp"
#include "tgmc/pipeline.hpp"

namespace tgmc {

/// Parses the configured ratings file and windows it. train_windows = 0
/// resolves to T - 1.
inline WindowedDataset prepare_dataset(const RunConfig& cfg) {
  const auto parsed = parse_ratings_file(cfg.dataset_path, cfg.format, cfg.max_rating);
  auto ds = build_windows(parsed, cfg.windowing(), cfg.max_rating);
  if (cfg.train_windows == 0) ds.config.train_windows = ds.num_windows() > 1 ? ds.num_windows() - 1 : 1;
  return ds;
}

inline std::string window_checkpoint_name(std::size_t window) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "window_%03zu.ckpt", window);
  return buf;
}

inline void save_window_model(const std::filesystem::path& path, const WindowModel& m) {
  Checkpoint ckpt;
  auto enc = m.encoder;
  enc.for_each_named([&](const std::string& name, Matrix& t) { ckpt.put(name, t); });
  auto dec = m.decoder;
  dec.for_each_named([&](const std::string& name, Matrix& t) { ckpt.put(name, t); });
  ckpt.put("emb/users", m.users);
  ckpt.put("emb/items", m.items);
  nlohmann::json meta = {{"window", m.window},
                         {"edges", m.edges},
                         {"initial_loss", m.initial_loss},
                         {"final_loss", m.final_loss},
                         {"trained", m.trained},
                         {"num_users", m.users.rows()},
                         {"num_items", m.items.rows()},
                         {"max_rating", m.decoder.max_rating()},
                         {"hidden", m.encoder.hidden},
                         {"embed", m.encoder.embed},
                         {"accum", to_string(m.encoder.accum)}};
  ckpt.save(path, meta);
}

inline WindowModel load_window_model(const std::filesystem::path& path) {
  const auto ckpt = Checkpoint::load(path);
  const auto meta = Checkpoint::load_metadata(path);
  WindowModel m;
  m.window = meta.at("window").get<std::size_t>();
  m.edges = meta.at("edges").get<std::size_t>();
  m.initial_loss = meta.at("initial_loss").get<double>();
  m.final_loss = meta.at("final_loss").get<double>();
  m.trained = meta.at("trained").get<bool>();
  const auto nu = meta.at("num_users").get<std::size_t>();
  const auto ni = meta.at("num_items").get<std::size_t>();
  const auto R = meta.at("max_rating").get<int>();
  const auto d = meta.at("embed").get<std::size_t>();
  m.encoder = EncoderParams<float>::zeros(nu, ni, R, meta.at("hidden").get<std::size_t>(), d,
                                          parse_accum(meta.at("accum").get<std::string>()));
  m.encoder.for_each_named([&](const std::string& name, Matrix& t) { ckpt.get(name, t); });
  m.decoder = DecoderParams<float>::zeros(R, d);
  m.decoder.for_each_named([&](const std::string& name, Matrix& t) { ckpt.get(name, t); });
  m.users = Matrix(nu, d);
  m.items = Matrix(ni, d);
  ckpt.get("emb/users", m.users);
  ckpt.get("emb/items", m.items);
  return m;
}

inline void save_window_models(const std::filesystem::path& dir, const std::vector<WindowModel>& models) {
  std::filesystem::create_directories(dir);
  for (const auto& m : models) save_window_model(dir / window_checkpoint_name(m.window), m);
}

/// Loads window_001.ckpt .. window_{count}.ckpt.
inline std::vector<WindowModel> load_window_models(const std::filesystem::path& dir, std::size_t count) {
  std::vector<WindowModel> out;
  for (std::size_t t = 1; t <= count; ++t) out.push_back(load_window_model(dir / window_checkpoint_name(t)));
  return out;
}

inline void save_temporal(const std::filesystem::path& path, const TemporalModels& tm,
                          const TemporalTrainConfig& cfg) {
  Checkpoint ckpt;
  if (tm.shared) save_seq_model(ckpt, "shared", *tm.shared);
  if (tm.user) save_seq_model(ckpt, "user", *tm.user);
  if (tm.item) save_seq_model(ckpt, "item", *tm.item);
  save_seq_model(ckpt, "decoder", tm.decoder);
  const auto& e = tm.embedding_config;
  nlohmann::json meta = {{"cell", to_string(e.cell)},
                         {"layers", e.layers},
                         {"embed", e.input_dim},
                         {"hidden", e.hidden_dim},
                         {"share_user_item", tm.shared.has_value()},
                         {"epochs", cfg.epochs},
                         {"learning_rate", cfg.learning_rate},
                         {"user_loss", tm.user_loss},
                         {"item_loss", tm.item_loss},
                         {"decoder_loss", tm.decoder_loss}};
  ckpt.save(path, meta);
}

inline TemporalModels load_temporal(const std::filesystem::path& path) {
  const auto ckpt = Checkpoint::load(path);
  const auto meta = Checkpoint::load_metadata(path);
  TemporalModels tm;
  auto& e = tm.embedding_config;
  e.cell = parse_cell_type(meta.at("cell").get<std::string>());
  e.layers = meta.at("layers").get<std::size_t>();
  e.input_dim = e.output_dim = meta.at("embed").get<std::size_t>();
  e.hidden_dim = meta.at("hidden").get<std::size_t>();
  if (meta.at("share_user_item").get<bool>()) {
    tm.shared = load_seq_model<float>(ckpt, "shared", e);
  } else {
    tm.user = load_seq_model<float>(ckpt, "user", e);
    tm.item = load_seq_model<float>(ckpt, "item", e);
  }
  tm.decoder = load_seq_model<float>(ckpt, "decoder", decoder_weight_config(e.input_dim, e.layers));
  tm.user_loss = meta.at("user_loss").get<double>();
  tm.item_loss = meta.at("item_loss").get<double>();
  tm.decoder_loss = meta.at("decoder_loss").get<double>();
  return tm;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_predictions_csv(std::ostream& os, const std::vector<Prediction>& preds, const WindowedDataset& ds) {
  os << "user_raw_id,item_raw_id,window,predicted,actual,cold_start\n";
  for (const auto& p : preds)
    os << ds.users.raw(p.user) << ',' << ds.items.raw(p.item) << ',' << p.window << ',' << format_real(p.predicted)
       << ',' << p.actual << ',' << (p.cold_start ? 1 : 0) << '\n';
}

/// Reads a predictions CSV. Raw ids are interned in order of appearance.
inline std::vector<Prediction> read_predictions_csv(std::istream& is) {
  std::vector<Prediction> out;
  IdMap users, items;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (n == 1 && line.rfind("user_raw_id", 0) == 0)) continue;
    const auto f = detail::split(line, ",");
    if (f.size() != 6) throw ParseError(n, "expected 6 fields");
    Prediction p;
    p.user = users.intern(f[0]);
    p.item = items.intern(f[1]);
    const auto window = detail::to_int<long long>(f[2]);
    const auto actual = detail::to_int<int>(f[4]);
    const auto cold = detail::to_int<int>(f[5]);
    if (!window || !actual || !cold) throw ParseError(n, "malformed integer field");
    p.window = static_cast<std::size_t>(*window);
    p.actual = *actual;
    p.cold_start = *cold != 0;
    try {
      std::size_t used = 0;
      const std::string s(f[3]);
      p.predicted = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(n, "malformed predicted rating");
    }
    out.push_back(p);
  }
  return out;
}

/// Writes report.json and report.txt into `dir`.
inline void write_reports(const std::filesystem::path& dir, const MultiRunReport& m, const nlohmann::json& meta) {
  auto j = to_json(m);
  j["metadata"] = meta;
  io::write_json(dir / "report.json", j);
  std::ofstream txt(dir / "report.txt");
  if (!txt) throw Error("cannot write " + (dir / "report.txt").string());
  txt << render_table(m);
}

}  // namespace tgmc
