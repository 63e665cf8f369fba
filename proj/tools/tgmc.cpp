// tgmc: command-line front end for the temporal matrix-completion pipeline.
//
// Exit codes: 0 success, 1 failed check, 2 unreadable input, 3 output exists
// (use --force), 4 missing artifact, 5 config/shape mismatch or empty test
// set, 64 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tgmc/artifacts.hpp"
#include "tgmc/config.hpp"
#include "tgmc/gradsuite.hpp"
#include "tgmc/pipeline.hpp"
#include "tgmc/pmf.hpp"

namespace fs = std::filesystem;
using namespace tgmc;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitUnreadable = 2;
constexpr int kExitExists = 3;
constexpr int kExitMissing = 4;
constexpr int kExitMismatch = 5;
constexpr int kExitUsage = 64;

struct UnreadableInput : Error {
  using Error::Error;
};
struct OutputExists : Error {
  using Error::Error;
};

// Flags shared by several commands. Unset flags leave the config untouched.
struct Flags {
  std::string out_dir = ".";
  std::string config;
  bool force = false;
  std::string input;
  std::optional<std::string> format;
  std::optional<int> max_rating;
  std::optional<std::int64_t> window_days;
  std::optional<std::size_t> train_windows;
  std::optional<bool> accumulative;
  std::optional<std::int64_t> origin;
  std::optional<std::size_t> epochs, batch_size, hidden, embed, threads;
  std::optional<double> lr, dropout;
  std::optional<std::string> accum, norm;
  std::optional<std::string> cell;
  std::optional<std::size_t> layers, temporal_epochs, temporal_hidden;
  std::optional<double> temporal_lr;
  std::optional<bool> share, mask_inactive, static_model;
  std::optional<std::string> decoder;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> pmf_dim, pmf_epochs;
  std::optional<double> pmf_lr, pmf_reg;
  std::string predictions;
  bool all = false;
  std::string only;
};

void add_common(CLI::App* c, Flags& f) {
  c->add_option("--out-dir", f.out_dir, "Working directory for all outputs")->capture_default_str();
  c->add_option("--config", f.config, "JSON run configuration (default: <out-dir>/config.json if present)");
  c->add_flag("--force", f.force, "Overwrite existing outputs");
  c->add_option("--seed", f.seed, "Base seed (default 42)");
}

void add_data(CLI::App* c, Flags& f) {
  c->add_option("input", f.input, "Ratings file");
  c->add_option("--format", f.format, "movielens-1m | netflix-monthly | csv");
  c->add_option("--max-rating", f.max_rating, "Largest rating level R (default 5)");
  c->add_option("--window-days", f.window_days, "Window length in days (default 91)");
  c->add_option("--train-windows", f.train_windows, "Training windows; 0 = all but the last (default 0)");
  c->add_option("--accumulative", f.accumulative, "Accumulate earlier windows into each training window (default true)");
  c->add_option("--origin", f.origin, "Unix time of the first window start (default: earliest rating)");
}

void add_window(CLI::App* c, Flags& f) {
  c->add_option("--epochs", f.epochs, "Per-window training epochs (default 2500)");
  c->add_option("--batch-size", f.batch_size, "Edges per mini-batch (default 100000)");
  c->add_option("--lr", f.lr, "Per-window Adam learning rate (default 0.01)");
  c->add_option("--dropout", f.dropout, "Dropout rate on hidden features (default 0.3)");
  c->add_option("--hidden", f.hidden, "Hidden width H (default 500)");
  c->add_option("--embed", f.embed, "Embedding width d (default 50)");
  c->add_option("--accum", f.accum, "sum | stack (default sum)");
  c->add_option("--norm", f.norm, "symmetric | left (default symmetric)");
  c->add_option("--threads", f.threads, "Window trainer threads; 0 = all cores (default 0)");
  c->add_option("--static", f.static_model, "Train one static model on all training ratings (default false)");
}

void add_temporal(CLI::App* c, Flags& f) {
  c->add_option("--cell", f.cell, "vanilla | gru | lstm (default lstm)");
  c->add_option("--layers", f.layers, "Recurrent layers 1..3 (default 2)");
  c->add_option("--temporal-epochs", f.temporal_epochs, "Sequence model epochs (default 250)");
  c->add_option("--temporal-lr", f.temporal_lr, "Sequence model learning rate (default 0.01)");
  c->add_option("--temporal-hidden", f.temporal_hidden, "Embedding model hidden width; 0 = d (default 0)");
  c->add_option("--share-user-item", f.share, "One embedding model for users and items (default true)");
  c->add_option("--mask-inactive", f.mask_inactive, "Skip rows with no history so far in the loss (default false)");
}

void add_predict(CLI::App* c, Flags& f) {
  c->add_option("--decoder", f.decoder, "rnn | last: predicted or last-window decoder weights (default rnn)");
}

void add_pmf(CLI::App* c, Flags& f) {
  c->add_option("--pmf-dim", f.pmf_dim, "PMF latent dimension (default 50)");
  c->add_option("--pmf-epochs", f.pmf_epochs, "PMF epochs (default 100)");
  c->add_option("--pmf-lr", f.pmf_lr, "PMF SGD learning rate (default 0.005)");
  c->add_option("--pmf-reg", f.pmf_reg, "PMF L2 weight (default 0.02)");
}

template <typename T, typename U>
void set_if(const std::optional<T>& v, U& dst) {
  if (v) dst = static_cast<U>(*v);
}

RunConfig load_config(const Flags& f) {
  const fs::path out(f.out_dir);
  RunConfig c;
  fs::path path = f.config;
  if (path.empty() && fs::exists(out / "config.json")) path = out / "config.json";
  if (!path.empty()) {
    if (!fs::exists(path)) throw UnreadableInput("cannot read config " + path.string());
    std::ifstream is(path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config " + path.string() + ": " + e.what());
    }
    c = run_config_from_json(j);
  }
  if (!f.input.empty()) c.dataset_path = f.input;
  if (f.format) c.format = parse_rating_format(*f.format);
  set_if(f.max_rating, c.max_rating);
  set_if(f.window_days, c.window_days);
  set_if(f.train_windows, c.train_windows);
  set_if(f.accumulative, c.accumulative);
  if (f.origin) c.origin = *f.origin;
  set_if(f.epochs, c.window.epochs);
  set_if(f.batch_size, c.window.batch_size);
  set_if(f.lr, c.window.learning_rate);
  set_if(f.dropout, c.window.dropout);
  set_if(f.hidden, c.window.hidden);
  set_if(f.embed, c.window.embed);
  set_if(f.threads, c.window.threads);
  if (f.accum) c.window.accum = parse_accum(*f.accum);
  if (f.norm) c.window.norm = parse_norm_mode(*f.norm);
  set_if(f.static_model, c.static_model);
  if (f.cell) c.temporal.cell = parse_cell_type(*f.cell);
  set_if(f.layers, c.temporal.layers);
  set_if(f.temporal_epochs, c.temporal.epochs);
  set_if(f.temporal_lr, c.temporal.learning_rate);
  set_if(f.temporal_hidden, c.temporal.hidden);
  set_if(f.share, c.temporal.share_user_item);
  set_if(f.mask_inactive, c.temporal.mask_inactive);
  if (f.decoder) c.decoder = parse_decoder_mode(*f.decoder);
  set_if(f.seed, c.seed);
  set_if(f.runs, c.runs);
  set_if(f.pmf_dim, c.pmf.dim);
  set_if(f.pmf_epochs, c.pmf.epochs);
  set_if(f.pmf_lr, c.pmf.learning_rate);
  set_if(f.pmf_reg, c.pmf.regularization);
  c.pmf.seed = c.seed;
  c.validate();
  return c;
}

void guard_output(const fs::path& p, bool force) {
  if (fs::exists(p) && !force)
    throw OutputExists(p.string() + " already exists; pass --force to overwrite");
}

void echo_config(const fs::path& out, const RunConfig& c) {
  fs::create_directories(out);
  io::write_json(out / "config.json", to_json(c));
}

WindowedDataset read_input(const RunConfig& c) {
  if (c.dataset_path.empty()) throw ValidationError("no ratings file given");
  if (!fs::is_regular_file(c.dataset_path)) throw UnreadableInput("cannot read ratings file " + c.dataset_path);
  try {
    return prepare_dataset(c);
  } catch (const MissingArtifactError& e) {
    throw UnreadableInput(e.what());
  }
}

WindowedDataset load_prepared(const fs::path& out) {
  if (!fs::exists(out / "dataset" / "manifest.json"))
    throw MissingArtifactError("no prepared dataset in " + (out / "dataset").string() + "; run `tgmc prepare` first");
  return load_dataset(out / "dataset");
}

void print_windows(const WindowedDataset& ds) {
  std::cout << "T=" << ds.num_windows() << " windows, " << ds.stats.num_users << " users, " << ds.stats.num_items
            << " items, train_windows=" << ds.config.train_windows << '\n';
  std::cout << std::left << std::setw(8) << "window" << std::setw(12) << "start" << std::right << std::setw(10)
            << "ratings" << std::setw(12) << "training" << std::setw(12) << "density" << '\n';
  for (std::size_t t = 0; t < ds.num_windows(); ++t) {
    std::cout << std::left << std::setw(8) << t + 1 << std::setw(12) << format_date_utc(ds.window_start(t))
              << std::right << std::setw(10) << ds.raw_windows[t].size() << std::setw(12) << ds.windows[t].size()
              << std::setw(12) << std::fixed << std::setprecision(6) << ds.density(t) << '\n';
  }
  for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
}

nlohmann::json run_metadata(const RunConfig& c, const WindowedDataset& ds) {
  return {{"config_hash", config_hash(c)},
          {"base_seed", c.seed},
          {"num_windows", ds.num_windows()},
          {"train_windows", ds.config.train_windows},
          {"accumulative", ds.config.accumulative}};
}

void emit_report(const fs::path& out, const MultiRunReport& m, const nlohmann::json& meta) {
  write_reports(out, m, meta);
  std::cout << render_table(m);
}

int cmd_prepare(const Flags& f) {
  const fs::path out(f.out_dir);
  const auto c = load_config(f);
  auto ds = read_input(c);
  guard_output(out / "dataset" / "manifest.json", f.force);
  save_dataset(out / "dataset", ds);
  echo_config(out, c);
  print_windows(ds);
  return 0;
}

int cmd_train(const Flags& f) {
  const fs::path out(f.out_dir);
  const auto c = load_config(f);
  const auto ds = with_accumulation(load_prepared(out), c.accumulative);
  guard_output(out / "windows", f.force);
  const auto split = train_test_split(ds);
  auto wc = c.window;
  wc.seed = c.seed;
  WindowTrainingResult trained;
  if (c.static_model)
    trained = train_window_models({pooled_training_events(ds, split.train_windows)}, ds.stats, wc);
  else
    trained = train_window_models(split.train, ds.stats, wc);
  if (fs::exists(out / "windows")) fs::remove_all(out / "windows");
  save_window_models(out / "windows", trained.models);
  echo_config(out, c);
  for (const auto& w : trained.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& m : trained.models)
    std::cout << "window " << m.window << ": " << m.edges << " edges, nll " << format_real(m.initial_loss) << " -> "
              << format_real(m.final_loss) << '\n';
  return 0;
}

std::size_t trained_window_count(const fs::path& out) {
  std::size_t n = 0;
  while (fs::exists(out / "windows" / window_checkpoint_name(n + 1))) ++n;
  if (n == 0) throw MissingArtifactError("no window checkpoints in " + (out / "windows").string() + "; run `tgmc train` first");
  return n;
}

int cmd_temporal(const Flags& f) {
  const fs::path out(f.out_dir);
  const auto c = load_config(f);
  const auto models = load_window_models(out / "windows", trained_window_count(out));
  guard_output(out / "temporal.ckpt", f.force);
  auto tc = c.temporal;
  tc.seed = c.seed;
  const auto tm = train_temporal(models, tc);
  save_temporal(out / "temporal.ckpt", tm, tc);
  echo_config(out, c);
  std::cout << "embedding loss " << format_real(tm.user_loss);
  if (!tm.shared) std::cout << " / " << format_real(tm.item_loss);
  std::cout << ", decoder-weight loss " << format_real(tm.decoder_loss) << '\n';
  return 0;
}

int cmd_predict(const Flags& f) {
  const fs::path out(f.out_dir);
  const auto c = load_config(f);
  const auto ds = with_accumulation(load_prepared(out), c.accumulative);
  const auto split = train_test_split(ds);
  const auto models = load_window_models(out / "windows", trained_window_count(out));
  guard_output(out / "predictions.csv", f.force);
  Forecast fc;
  if (models.size() == 1) {
    fc = static_forecast(models.back(), split.test.size());
  } else {
    if (models.size() != split.train_windows)
      throw ValidationError("found " + std::to_string(models.size()) + " window checkpoints but the dataset has " +
                            std::to_string(split.train_windows) + " training windows");
    if (!fs::exists(out / "temporal.ckpt"))
      throw MissingArtifactError("missing " + (out / "temporal.ckpt").string() + "; run `tgmc temporal` first");
    fc = forecast(models, load_temporal(out / "temporal.ckpt"), split.test.size(), c.decoder);
  }
  const auto preds = predict_test(fc, split, ds.stats);
  std::ofstream os(out / "predictions.csv");
  if (!os) throw Error("cannot write " + (out / "predictions.csv").string());
  write_predictions_csv(os, preds, ds);
  std::cout << preds.size() << " predictions written to " << (out / "predictions.csv").string() << '\n';
  return 0;
}

int cmd_evaluate(const Flags& f) {
  const fs::path out(f.out_dir);
  const fs::path in = f.predictions.empty() ? out / "predictions.csv" : fs::path(f.predictions);
  if (!fs::exists(in)) throw MissingArtifactError("missing predictions " + in.string());
  std::ifstream is(in);
  if (!is) throw UnreadableInput("cannot read " + in.string());
  const auto preds = read_predictions_csv(is);
  if (preds.empty()) throw ValidationError("evaluate: the test set is empty");
  guard_output(out / "report.json", f.force);
  const auto report = aggregate_runs({f.seed.value_or(42)}, {evaluate(preds)});
  emit_report(out, report, {{"predictions", in.filename().string()}});
  return 0;
}

int cmd_pipeline(const Flags& f) {
  const fs::path out(f.out_dir);
  const auto c = load_config(f);
  const auto ds = c.dataset_path.empty() ? with_accumulation(load_prepared(out), c.accumulative) : read_input(c);
  guard_output(out / "report.json", f.force);
  fs::create_directories(out);
  if (!c.dataset_path.empty()) save_dataset(out / "dataset", ds);
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> reports;
  for (std::size_t k = 0; k < c.runs; ++k) {
    const std::uint64_t seed = c.seed + k;
    auto res = run_pipeline(ds, c.pipeline(seed));
    if (k == 0) {
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
      if (fs::exists(out / "windows")) fs::remove_all(out / "windows");
      save_window_models(out / "windows", res.windows);
      if (res.temporal) {
        auto tc = c.temporal;
        tc.seed = seed;
        save_temporal(out / "temporal.ckpt", *res.temporal, tc);
      }
      std::ofstream os(out / "predictions.csv");
      write_predictions_csv(os, res.predictions, ds);
    }
    seeds.push_back(seed);
    reports.push_back(res.report);
  }
  echo_config(out, c);
  auto meta = run_metadata(c, ds);
  meta["model"] = c.static_model ? "static" : "temporal";
  emit_report(out, aggregate_runs(seeds, reports), meta);
  return 0;
}

int cmd_baseline(const Flags& f) {
  const fs::path out(f.out_dir);
  const auto c = load_config(f);
  const auto ds = c.dataset_path.empty() ? load_prepared(out) : read_input(c);
  guard_output(out / "report.json", f.force);
  fs::create_directories(out);
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> reports;
  for (std::size_t k = 0; k < c.runs; ++k) {
    auto pc = c.pmf;
    pc.seed = c.seed + k;
    seeds.push_back(pc.seed);
    reports.push_back(pmf_baseline(ds, ds.config.train_windows, pc));
  }
  echo_config(out, c);
  auto meta = run_metadata(c, ds);
  meta["model"] = "pmf";
  emit_report(out, aggregate_runs(seeds, reports), meta);
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  const auto entries = run_gradient_suite(f.seed.value_or(42));
  bool ok = true;
  std::cout << std::left << std::setw(44) << "component" << std::right << std::setw(14) << "max rel err"
            << std::setw(10) << "entries" << "  status\n";
  for (const auto& e : entries) {
    if (!f.only.empty() && e.component.find(f.only) == std::string::npos) continue;
    const bool pass = e.result.passed(1e-5);
    ok = ok && pass;
    std::cout << std::left << std::setw(44) << e.component << std::right << std::setw(14) << std::scientific
              << std::setprecision(3) << e.result.max_relative_error << std::setw(10) << e.result.entries_checked
              << "  " << (pass ? "ok" : "FAIL (" + e.result.worst_param + ")") << '\n';
  }
  return ok ? 0 : kExitFailedCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal graph-convolutional matrix completion"};
  app.require_subcommand(1);
  Flags f;

  auto* prepare = app.add_subcommand("prepare", "Parse a ratings file and split it into time windows");
  add_common(prepare, f);
  add_data(prepare, f);

  auto* train = app.add_subcommand("train", "Train one encoder/decoder per training window");
  add_common(train, f);
  add_window(train, f);
  train->add_option("--accumulative", f.accumulative, "Override the prepared accumulation mode");

  auto* temporal = app.add_subcommand("temporal", "Fit the sequence models on per-window embeddings");
  add_common(temporal, f);
  add_temporal(temporal, f);

  auto* predict = app.add_subcommand("predict", "Forecast embeddings and score the test windows");
  add_common(predict, f);
  add_predict(predict, f);
  predict->add_option("--accumulative", f.accumulative, "Override the prepared accumulation mode");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compute RMSE/MAE from a predictions CSV");
  add_common(evaluate_cmd, f);
  evaluate_cmd->add_option("--predictions", f.predictions, "Predictions CSV (default <out-dir>/predictions.csv)");

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
  add_common(pipeline, f);
  add_data(pipeline, f);
  add_window(pipeline, f);
  add_temporal(pipeline, f);
  add_predict(pipeline, f);
  pipeline->add_option("--runs", f.runs, "Repeat with seeds seed..seed+N-1 (default 1)");

  auto* baseline = app.add_subcommand("baseline", "PMF baseline on the same split");
  add_common(baseline, f);
  add_data(baseline, f);
  add_pmf(baseline, f);
  baseline->add_option("--runs", f.runs, "Repeat with seeds seed..seed+N-1 (default 1)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_flag("--all", f.all, "Check every component (the default)");
  gradcheck->add_option("--only", f.only, "Only components whose name contains this text");
  gradcheck->add_option("--seed", f.seed, "Seed for the random instances (default 42)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*prepare) return cmd_prepare(f);
    if (*train) return cmd_train(f);
    if (*temporal) return cmd_temporal(f);
    if (*predict) return cmd_predict(f);
    if (*evaluate_cmd) return cmd_evaluate(f);
    if (*pipeline) return cmd_pipeline(f);
    if (*baseline) return cmd_baseline(f);
    if (*gradcheck) return cmd_gradcheck(f);
  } catch (const UnreadableInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnreadable;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnreadable;
  } catch (const OutputExists& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExists;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailedCheck;
  }
  return kExitUsage;
}
