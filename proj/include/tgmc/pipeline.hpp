#pragma once

// End-to-end orchestration.
//
//   1. train one encoder/decoder pair per training window (in parallel)
//   2. fit sequence models on the per-window embeddings and decoder weights
//   3. roll those forward into the test windows and score test ratings

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tgmc/decoder.hpp"
#include "tgmc/encoder.hpp"
#include "tgmc/graph.hpp"
#include "tgmc/ingest.hpp"
#include "tgmc/metrics.hpp"
#include "tgmc/optim.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/seqmodel.hpp"

namespace tgmc {

struct WindowTrainConfig {
  std::size_t epochs = 2500;
  std::size_t batch_size = 100000;
  double learning_rate = 1e-2;
  double dropout = 0.3;
  std::size_t hidden = 500;
  std::size_t embed = 50;
  Accum accum = Accum::sum;
  NormMode norm = NormMode::symmetric;
  std::uint64_t seed = 42;
  std::size_t threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (epochs == 0 || batch_size == 0 || hidden == 0 || embed == 0)
      throw ValidationError("window training sizes must be positive");
    if (embed > hidden) throw ValidationError("embedding dim d must not exceed hidden width H");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must be in [0,1)");
  }
};

struct TemporalTrainConfig {
  CellType cell = CellType::lstm;
  std::size_t layers = 2;
  std::size_t epochs = 250;
  double learning_rate = 1e-2;
  bool share_user_item = true;
  std::size_t hidden = 0;  // 0: embedding dim
  bool mask_inactive = false;
  std::uint64_t seed = 42;

  void validate() const {
    if (layers < 1 || layers > 3) throw ValidationError("temporal layers must be 1..3");
    if (epochs == 0) throw ValidationError("temporal epochs must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  }
};

enum class DecoderMode { rnn, last };

inline DecoderMode parse_decoder_mode(std::string_view s) {
  if (s == "rnn") return DecoderMode::rnn;
  if (s == "last") return DecoderMode::last;
  throw ValidationError("unknown decoder mode '" + std::string(s) + "'");
}
inline std::string to_string(DecoderMode m) { return m == DecoderMode::rnn ? "rnn" : "last"; }

struct WindowModel {
  std::size_t window = 0;  // 1-based
  EncoderParams<float> encoder;
  DecoderParams<float> decoder;
  Matrix users;  // U_t
  Matrix items;  // V_t
  std::size_t edges = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool trained = false;
};

namespace detail {

inline std::vector<RatedPair> rated_pairs(const RatingWindow& w) {
  std::vector<RatedPair> out;
  out.reserve(w.num_edges());
  for (const auto& o : w.observed()) out.push_back({o.user, o.item, o.rating});
  return out;
}

inline double full_nll(const RatingWindow& w, const EncoderParams<float>& enc, const DecoderParams<float>& dec,
                       const NormalizationSpec& norm, const std::vector<RatedPair>& edges) {
  Rng unused(0);
  const auto acts = encoder_forward(w, enc, norm, DropoutSpec{0.0, Mode::eval}, unused);
  return nll_loss<float>(edges, acts.users(), acts.items(), dec).loss;
}

/// Runs fn(k) for k in [0, n) on up to `threads` workers. Each k is owned by
/// one worker, so results written to per-k slots are deterministic.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < n; k += threads) {
        try {
          fn(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Trains encoder + decoder on one window by minimizing the summed NLL over
/// shuffled edge mini-batches. The encoder always runs on the full graph.
/// Parameters are initialized from `init`; dropout and shuffling draw from
/// `stream`.
inline WindowModel train_window(const RatingWindow& window, const WindowTrainConfig& cfg, Rng init, Rng stream) {
  cfg.validate();
  WindowModel m;
  m.window = window.index();
  m.encoder = EncoderParams<float>::glorot(window.num_users(), window.num_items(), window.max_rating(), cfg.hidden,
                                           cfg.embed, cfg.accum, init);
  m.decoder = DecoderParams<float>::glorot(window.max_rating(), cfg.embed, init);
  m.edges = window.num_edges();
  if (m.edges == 0) {
    m.users = Matrix(window.num_users(), cfg.embed);
    m.items = Matrix(window.num_items(), cfg.embed);
    return m;
  }
  const NormalizationSpec norm{cfg.norm};
  const DropoutSpec train_dropout{cfg.dropout, Mode::train};
  auto edges = detail::rated_pairs(window);
  m.initial_loss = detail::full_nll(window, m.encoder, m.decoder, norm, edges);

  auto enc_grad = m.encoder.zeros_like();
  auto dec_grad = m.decoder.zeros_like();
  auto refs = param_refs(m.encoder, enc_grad);
  for (auto& r : param_refs(m.decoder, dec_grad)) refs.push_back(r);
  AdamState<float> adam(AdamConfig{cfg.learning_rate});

  const std::size_t batches = (edges.size() + cfg.batch_size - 1) / cfg.batch_size;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batches > 1) stream.shuffle(std::span<RatedPair>(edges));
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(edges.size(), lo + cfg.batch_size);
      const auto acts = encoder_forward(window, m.encoder, norm, train_dropout, stream);
      auto nll = nll_loss<float>(std::span<const RatedPair>(edges).subspan(lo, hi - lo), acts.users(), acts.items(),
                                 m.decoder);
      assign_params(enc_grad, encoder_backward(window, m.encoder, norm, acts, nll.grad_users, nll.grad_items));
      assign_params(dec_grad, std::move(nll.grad_q));
      adam_step(refs, adam);
    }
  }

  Rng unused(0);
  const auto acts = encoder_forward(window, m.encoder, norm, DropoutSpec{0.0, Mode::eval}, unused);
  m.users = acts.users();
  m.items = acts.items();
  m.final_loss = nll_loss<float>(edges, m.users, m.items, m.decoder).loss;
  m.trained = true;
  return m;
}

/// Seed streams: every window starts from the same initial parameters
/// (derived from cfg.seed) and gets its own dropout/shuffle stream.
inline Rng window_init_rng(std::uint64_t seed) { return Rng(seed).split(1); }
inline Rng window_stream_rng(std::uint64_t seed, std::size_t window) { return Rng(seed).split(1000 + window); }

struct WindowTrainingResult {
  std::vector<WindowModel> models;
  std::vector<std::string> warnings;
};

inline WindowTrainingResult train_window_models(const std::vector<WindowEvents>& train_windows,
                                                const DatasetStats& stats, const WindowTrainConfig& cfg) {
  cfg.validate();
  if (train_windows.empty()) throw ValidationError("no training windows");
  WindowTrainingResult result;
  result.models.resize(train_windows.size());
  detail::parallel_for(train_windows.size(), cfg.threads, [&](std::size_t t) {
    const auto graph = build_rating_window(train_windows[t], stats, t + 1);
    result.models[t] = train_window(graph, cfg, window_init_rng(cfg.seed), window_stream_rng(cfg.seed, t + 1));
  });
  for (const auto& m : result.models)
    if (m.edges == 0)
      result.warnings.push_back("window " + std::to_string(m.window) +
                                " has no ratings; its embeddings are zero and its decoder is untrained");
  return result;
}

struct TemporalModels {
  SeqModelConfig embedding_config;
  std::optional<SeqModel<float>> shared;
  std::optional<SeqModel<float>> user;
  std::optional<SeqModel<float>> item;
  SeqModel<float> decoder;
  double user_loss = 0.0;  // final training loss (shared model reports in user_loss)
  double item_loss = 0.0;
  double decoder_loss = 0.0;
};

namespace detail {

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw ShapeError("stack_rows: width mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.flat().begin(), top.flat().end(), out.flat().begin());
  std::copy(bottom.flat().begin(), bottom.flat().end(), out.flat().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

inline Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(count, m.cols());
  std::copy(m.flat().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()),
            m.flat().begin() + static_cast<std::ptrdiff_t>((begin + count) * m.cols()), out.flat().begin());
  return out;
}

inline StepSequence<float> user_sequence(const std::vector<WindowModel>& ms) {
  StepSequence<float> s;
  for (const auto& m : ms) s.push_back(m.users);
  return s;
}
inline StepSequence<float> item_sequence(const std::vector<WindowModel>& ms) {
  StepSequence<float> s;
  for (const auto& m : ms) s.push_back(m.items);
  return s;
}
inline StepSequence<float> shared_sequence(const std::vector<WindowModel>& ms) {
  StepSequence<float> s;
  for (const auto& m : ms) s.push_back(stack_rows(m.users, m.items));
  return s;
}
inline StepSequence<float> q_sequence(const std::vector<WindowModel>& ms) {
  std::vector<std::vector<Matrix>> qs;
  for (const auto& m : ms) qs.push_back(m.decoder.q);
  return decoder_weight_sequence(qs);
}

}  // namespace detail

inline SeqModelConfig embedding_seq_config(const TemporalTrainConfig& cfg, std::size_t embed) {
  SeqModelConfig c;
  c.cell = cfg.cell;
  c.layers = cfg.layers;
  c.input_dim = embed;
  c.output_dim = embed;
  c.hidden_dim = cfg.hidden == 0 ? embed : cfg.hidden;
  return c;
}

/// Fits the embedding model(s) on U_1..U_T / V_1..V_T and the LSTM on the
/// flattened decoder matrices.
inline TemporalModels train_temporal(const std::vector<WindowModel>& windows, const TemporalTrainConfig& cfg) {
  cfg.validate();
  if (windows.size() < 2) throw ValidationError("temporal training needs at least two training windows");
  const std::size_t d = windows[0].users.cols();
  for (const auto& w : windows)
    if (w.users.cols() != d || w.items.cols() != d || w.decoder.embed() != d)
      throw ShapeError("embedding dimension changes across windows");

  TemporalModels tm;
  tm.embedding_config = embedding_seq_config(cfg, d);
  const SeqTrainOptions opt{cfg.epochs, cfg.learning_rate, cfg.mask_inactive};
  const Rng root(cfg.seed);
  if (cfg.share_user_item) {
    Rng init = root.split(2001);
    tm.shared = SeqModel<float>::glorot(tm.embedding_config, init);
    tm.user_loss = seq_train(*tm.shared, detail::shared_sequence(windows), opt).back();
  } else {
    Rng uinit = root.split(2002);
    Rng iinit = root.split(2003);
    tm.user = SeqModel<float>::glorot(tm.embedding_config, uinit);
    tm.item = SeqModel<float>::glorot(tm.embedding_config, iinit);
    tm.user_loss = seq_train(*tm.user, detail::user_sequence(windows), opt).back();
    tm.item_loss = seq_train(*tm.item, detail::item_sequence(windows), opt).back();
  }
  Rng dinit = root.split(2004);
  tm.decoder = SeqModel<float>::glorot(decoder_weight_config(d, cfg.layers), dinit);
  SeqTrainOptions dopt = opt;
  dopt.mask_inactive = false;
  tm.decoder_loss = seq_train(tm.decoder, detail::q_sequence(windows), dopt).back();
  return tm;
}

/// Embeddings and decoder weights for future windows T+1..T+h.
struct Forecast {
  std::vector<Matrix> users;
  std::vector<Matrix> items;
  std::vector<DecoderParams<float>> decoders;
};

inline Forecast forecast(const std::vector<WindowModel>& windows, const TemporalModels& tm, std::size_t horizon,
                         DecoderMode decoder_mode) {
  if (horizon < 1) throw ValidationError("forecast horizon must be >= 1");
  Forecast f;
  if (tm.shared) {
    const auto steps = predict_next(*tm.shared, detail::shared_sequence(windows), horizon);
    const std::size_t nu = windows[0].users.rows();
    const std::size_t ni = windows[0].items.rows();
    for (const auto& s : steps) {
      f.users.push_back(detail::slice_rows(s, 0, nu));
      f.items.push_back(detail::slice_rows(s, nu, ni));
    }
  } else {
    f.users = predict_next(*tm.user, detail::user_sequence(windows), horizon);
    f.items = predict_next(*tm.item, detail::item_sequence(windows), horizon);
  }
  if (decoder_mode == DecoderMode::rnn) {
    const std::size_t d = windows[0].decoder.embed();
    for (const auto& s : predict_next(tm.decoder, detail::q_sequence(windows), horizon))
      f.decoders.push_back(DecoderParams<float>{unflatten_levels(s, d)});
  } else {
    f.decoders.assign(horizon, windows.back().decoder);
  }
  return f;
}

/// Static forecast: the last window's embeddings and decoder at every horizon.
inline Forecast static_forecast(const WindowModel& last, std::size_t horizon) {
  Forecast f;
  f.users.assign(horizon, last.users);
  f.items.assign(horizon, last.items);
  f.decoders.assign(horizon, last.decoder);
  return f;
}

/// Expected rating for (user, item) at forecast step `h` (1-based), decoded
/// in double precision.
inline double predict_rating(const Forecast& f, std::size_t h, std::uint32_t user, std::uint32_t item) {
  const auto& users = f.users.at(h - 1);
  const auto& items = f.items.at(h - 1);
  if (user >= users.rows() || item >= items.rows()) throw ValidationError("query index outside forecast");
  std::vector<double> u(users.row(user).begin(), users.row(user).end());
  std::vector<double> v(items.row(item).begin(), items.row(item).end());
  DecoderParams<double> dec;
  for (const auto& q : f.decoders.at(h - 1).q) dec.q.push_back(q.cast<double>());
  const auto logits = decoder_logits<double>(u, v, dec);
  return expected_rating_from_logits<double>(logits);
}

struct Query {
  std::uint32_t user;
  std::uint32_t item;
  std::size_t horizon;  // 1 = first window after training
};

struct ColdStartIndex {
  std::vector<bool> user_seen;
  std::vector<bool> item_seen;

  static ColdStartIndex from(const std::vector<WindowEvents>& train, const DatasetStats& stats) {
    ColdStartIndex c{std::vector<bool>(stats.num_users), std::vector<bool>(stats.num_items)};
    for (const auto& w : train)
      for (const auto& e : w) {
        c.user_seen[e.user] = true;
        c.item_seen[e.item] = true;
      }
    return c;
  }

  bool cold(std::uint32_t u, std::uint32_t i) const { return !user_seen.at(u) || !item_seen.at(i); }
};

/// Scores every test rating of `split` against `f`.
inline std::vector<Prediction> predict_test(const Forecast& f, const TrainTestSplit& split, const DatasetStats& stats) {
  const auto cold = ColdStartIndex::from(split.train, stats);
  std::vector<Prediction> preds;
  for (std::size_t k = 0; k < split.test.size(); ++k)
    for (const auto& e : split.test[k])
      preds.push_back({e.user, e.item, split.train_windows + k + 1, predict_rating(f, k + 1, e.user, e.item), e.rating,
                       cold.cold(e.user, e.item)});
  return preds;
}

struct PipelineConfig {
  WindowTrainConfig window;
  TemporalTrainConfig temporal;
  DecoderMode decoder = DecoderMode::rnn;
  /// Static GCMC: one window over all training ratings, no temporal stage.
  bool static_model = false;
};

struct PipelineResult {
  EvalReport report;
  std::vector<Prediction> predictions;
  std::vector<WindowModel> windows;
  std::optional<TemporalModels> temporal;
  std::vector<std::string> warnings;
};

/// Union of the raw training windows with the latest rating per pair.
inline WindowEvents pooled_training_events(const WindowedDataset& ds, std::size_t train_windows) {
  WindowEvents pooled;
  for (std::size_t t = 0; t < train_windows; ++t)
    pooled.insert(pooled.end(), ds.raw_windows.at(t).begin(), ds.raw_windows.at(t).end());
  return detail::dedup_latest(pooled);
}

inline PipelineResult run_pipeline(const WindowedDataset& ds, const PipelineConfig& cfg) {
  const auto split = train_test_split(ds);
  PipelineResult res;
  res.warnings = ds.warnings;
  Forecast f;
  if (cfg.static_model) {
    auto trained = train_window_models({pooled_training_events(ds, split.train_windows)}, ds.stats, cfg.window);
    res.windows = std::move(trained.models);
    res.warnings.insert(res.warnings.end(), trained.warnings.begin(), trained.warnings.end());
    f = static_forecast(res.windows.back(), split.test.size());
  } else {
    auto trained = train_window_models(split.train, ds.stats, cfg.window);
    res.windows = std::move(trained.models);
    res.warnings.insert(res.warnings.end(), trained.warnings.begin(), trained.warnings.end());
    if (res.windows.size() < 2) {
      res.warnings.push_back("single training window: temporal stage skipped");
      f = static_forecast(res.windows.back(), split.test.size());
    } else {
      res.temporal = train_temporal(res.windows, cfg.temporal);
      f = forecast(res.windows, *res.temporal, split.test.size(), cfg.decoder);
    }
  }
  res.predictions = predict_test(f, split, ds.stats);
  res.report = evaluate(res.predictions);
  return res;
}

}  // namespace tgmc
