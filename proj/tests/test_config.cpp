#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "support/synthetic.hpp"
#include "tgmc/artifacts.hpp"
#include "tgmc/config.hpp"

using namespace tgmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("tgmc_config_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.window_days, 91);
  EXPECT_TRUE(c.accumulative);
  EXPECT_EQ(c.window.epochs, 2500u);
  EXPECT_EQ(c.window.hidden, 500u);
  EXPECT_EQ(c.window.embed, 50u);
  EXPECT_EQ(c.window.batch_size, 100000u);
  EXPECT_EQ(c.window.norm, NormMode::symmetric);
  EXPECT_EQ(c.temporal.cell, CellType::lstm);
  EXPECT_EQ(c.temporal.epochs, 250u);
  EXPECT_EQ(c.decoder, DecoderMode::rnn);
  EXPECT_EQ(c.windowing().window_length_seconds, 91 * kSecondsPerDay);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.dataset_path = "ratings.dat";
  c.format = RatingFormat::netflix_monthly;
  c.window_days = 30;
  c.accumulative = false;
  c.train_windows = 4;
  c.origin = 123456;
  c.window.epochs = 17;
  c.window.hidden = 12;
  c.window.embed = 3;
  c.window.accum = Accum::stack;
  c.window.norm = NormMode::left;
  c.temporal.cell = CellType::gru;
  c.temporal.layers = 3;
  c.temporal.share_user_item = false;
  c.temporal.mask_inactive = true;
  c.decoder = DecoderMode::last;
  c.static_model = true;
  c.seed = 9;
  c.runs = 3;
  c.pmf.dim = 7;
  c.pmf.regularization = 0.5;
  const auto j = to_json(c);
  const auto back = run_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(back.pmf.seed, 9u);
}

TEST(Config, HashIgnoresSeedAndRuns) {
  RunConfig a, b;
  b.seed = 1234;
  b.runs = 5;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.window.hidden = 64;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, PartialJsonKeepsDefaults) {
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"temporal": {"cell": "vanilla"}})"));
  EXPECT_EQ(c.temporal.cell, CellType::vanilla);
  EXPECT_EQ(c.temporal.layers, 2u);
  EXPECT_EQ(c.window.hidden, 500u);
}

TEST(Config, BadValuesThrow) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse("[]")), ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"temporal": {"cell": "transformer"}})")),
               ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"window_training": {"epochs": "many"}})")),
               ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"decoder": "oracle"})")), ValidationError);
  RunConfig c;
  c.window_days = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = RunConfig{};
  c.temporal.layers = 4;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Artifacts, WindowModelRoundTrip) {
  const auto dir = scratch("window");
  Rng rng(1);
  WindowModel m;
  m.window = 2;
  m.encoder = EncoderParams<float>::glorot(4, 3, 5, 6, 2, Accum::stack, rng);
  m.decoder = DecoderParams<float>::glorot(5, 2, rng);
  m.users = Matrix(4, 2, 0.5f);
  m.items = Matrix(3, 2, -0.25f);
  m.edges = 7;
  m.initial_loss = 11.5;
  m.final_loss = 3.25;
  m.trained = true;
  save_window_models(dir, {m});
  EXPECT_TRUE(fs::exists(dir / "window_002.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "window_002.ckpt.json"));
  const auto back = load_window_model(dir / "window_002.ckpt");
  EXPECT_EQ(back.window, 2u);
  EXPECT_EQ(back.edges, 7u);
  EXPECT_EQ(back.final_loss, 3.25);
  EXPECT_EQ(back.encoder.accum, Accum::stack);
  EXPECT_EQ(back.encoder.msg[1][4], m.encoder.msg[1][4]);
  EXPECT_EQ(back.encoder.dense[0], m.encoder.dense[0]);
  EXPECT_EQ(back.decoder.q, m.decoder.q);
  EXPECT_EQ(back.users, m.users);
  EXPECT_EQ(back.items, m.items);
  EXPECT_THROW(load_window_models(dir, 1), MissingArtifactError);
  fs::remove_all(dir);
}

TEST(Artifacts, TemporalRoundTrip) {
  const auto dir = scratch("temporal");
  Rng rng(2);
  for (bool share : {true, false}) {
    TemporalTrainConfig cfg;
    cfg.cell = CellType::gru;
    cfg.layers = 1;
    cfg.share_user_item = share;
    TemporalModels tm;
    tm.embedding_config = embedding_seq_config(cfg, 3);
    if (share) {
      tm.shared = SeqModel<float>::glorot(tm.embedding_config, rng);
    } else {
      tm.user = SeqModel<float>::glorot(tm.embedding_config, rng);
      tm.item = SeqModel<float>::glorot(tm.embedding_config, rng);
    }
    tm.decoder = SeqModel<float>::glorot(decoder_weight_config(3, 1), rng);
    tm.user_loss = 0.125;
    tm.decoder_loss = 0.5;
    save_temporal(dir / "temporal.ckpt", tm, cfg);
    const auto back = load_temporal(dir / "temporal.ckpt");
    EXPECT_EQ(back.embedding_config.cell, CellType::gru);
    EXPECT_EQ(back.shared.has_value(), share);
    const auto& a = share ? *tm.shared : *tm.item;
    const auto& b = share ? *back.shared : *back.item;
    EXPECT_EQ(a.layers[0].w_rec, b.layers[0].w_rec);
    EXPECT_EQ(tm.decoder.w_out, back.decoder.w_out);
    EXPECT_EQ(back.user_loss, 0.125);
    EXPECT_EQ(back.decoder_loss, 0.5);
  }
  fs::remove_all(dir);
}

TEST(Artifacts, PredictionsCsvRoundTrip) {
  tgmc::testing::DriftSpec spec;
  spec.users = 5;
  spec.items = 4;
  spec.windows = 2;
  spec.ratings_per_user = 2;
  const auto ds = tgmc::testing::drift_dataset(spec, true, 1);
  const std::vector<Prediction> preds{{0, 1, 2, 3.1234567, 4, false}, {4, 3, 2, 1.5, 1, true}};
  std::stringstream ss;
  write_predictions_csv(ss, preds, ds);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "user_raw_id,item_raw_id,window,predicted,actual,cold_start");
  EXPECT_NE(text.find("u0,i1,2,3.123457,4,0"), std::string::npos);
  const auto back = read_predictions_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_NEAR(back[0].predicted, 3.123457, 1e-12);
  EXPECT_EQ(back[1].actual, 1);
  EXPECT_TRUE(back[1].cold_start);
  EXPECT_EQ(back[0].window, 2u);
}

TEST(Artifacts, MalformedPredictionsReportLine) {
  std::stringstream ss("user_raw_id,item_raw_id,window,predicted,actual,cold_start\na,b,2,3.0,4,0\na,b,2,x,4,0\n");
  try {
    read_predictions_csv(ss);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number, 3u);
  }
  std::stringstream few("a,b,2,3.0\n");
  EXPECT_THROW(read_predictions_csv(few), ParseError);
}
