#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mutor/errors.h"
#include "mutor/harness.h"
#include "oracles.h"

using namespace mutor;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() /
             ("mutor_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ModelConfig tiny_model(std::size_t vocab) {
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_model = 16;
  c.d_head = 8;
  c.vocab_size = vocab;
  c.max_seq_len = 64;
  return c;
}

TrainingSet toy_data(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RawSequence> seqs;
  for (std::size_t i = 0; i < count; ++i) {
    RawSequence s;
    s.tokens = oracle::random_tokens(rng, 6 + rng() % 8, 10);
    s.prefix_len = 2;
    seqs.push_back(s);
  }
  return fixed_training_set(seqs);
}

TrainConfig toy_train(Method method) {
  TrainConfig c;
  c.method = method;
  c.total_steps = 20;
  c.warmup_steps = 5;
  c.batch_size = 4;
  c.seed = 3;
  c.lr_peak = 3e-3;
  c.offset.d_max = 3;
  return c;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Schedule, ClosedForm) {
  TrainConfig c;
  c.lr_peak = 2e-3;
  c.warmup_steps = 100;
  c.total_steps = 1000;
  EXPECT_EQ(lr_at(0, c), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(100, c), 2e-3);
  EXPECT_DOUBLE_EQ(lr_at(550, c), 1e-3);
  EXPECT_EQ(lr_at(1000, c), 0.0);
  for (std::size_t s = 0; s <= 1000; s += 37) {
    EXPECT_NEAR(lr_at(s, c), oracle::schedule(double(s), 100, 1000, 2e-3), 1e-15) << s;
  }
  c.warmup_steps = 0;
  EXPECT_DOUBLE_EQ(lr_at(0, c), 2e-3);
}

TEST(Config, Validation) {
  TrainConfig c;
  c.warmup_steps = c.total_steps + 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.a = 1.2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.method = Method::NextToken;
  c.a = 0.7;
  EXPECT_EQ(c.effective_a(), 0.0);
}

TEST(Config, KeyValueRoundTrip) {
  TrainConfig c;
  c.method = Method::MultiTokenBaseline;
  c.a = 0.1;
  c.offset.mode = OffsetMode::StarGraph;
  c.offset.d_max = 4;
  c.bidirectional_prefix = true;
  c.max_steps = 7;
  auto back = TrainConfig::from_kv(c.to_kv());
  EXPECT_EQ(back.to_kv(), c.to_kv());
  auto kv = c.to_kv();
  kv["learning_rate"] = "1";
  EXPECT_THROW(TrainConfig::from_kv(kv), ConfigError);
  EXPECT_EQ(method_from_string("NextToken"), Method::NextToken);
  EXPECT_EQ(method_from_string("mutor"), Method::MuToR);
  EXPECT_THROW(method_from_string("bogus"), ConfigError);
}

TEST(Config, ParsesSectionsCommentsAndQuotes) {
  auto kv = parse_config_text(
      "# experiment\n"
      "[train]\n"
      "method = \"mutor\"   # trailing\n"
      "a = 0.3\n"
      "\n"
      "[offset]\n"
      "mode = stargraph\n"
      "d_max = 6\n"
      "[data]\n"
      "train = \"a # b.jsonl\"\n");
  EXPECT_EQ(kv.at("train.method"), "mutor");
  EXPECT_EQ(kv.at("train.a"), "0.3");
  EXPECT_EQ(kv.at("offset.d_max"), "6");
  EXPECT_EQ(kv.at("data.train"), "a # b.jsonl");
  auto exp = experiment_config_from_kv(kv);
  EXPECT_EQ(exp.train.a, 0.3);
  EXPECT_EQ(exp.train.offset.mode, OffsetMode::StarGraph);
  EXPECT_EQ(exp.train.offset.d_max, 6);
  EXPECT_EQ(exp.other.at("data.train"), "a # b.jsonl");
}

TEST(Config, ParseErrorsCarryLineNumbers) {
  try {
    parse_config_text("[train]\na = 1\na = 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_config_text("[train\n"), ParseError);
  EXPECT_THROW(parse_config_text("just words\n"), ParseError);
  EXPECT_THROW(experiment_config_from_kv({{"model.depth", "3"}}), ConfigError);
}

TEST(Config, SeedEnvironmentOverride) {
  auto dir = temp_dir();
  write_file(dir / "c.toml", "[train]\nseed = 5\n");
  ::unsetenv("MUTOR_SEED");
  EXPECT_EQ(load_experiment_config(dir / "c.toml").train.seed, 5u);
  ::setenv("MUTOR_SEED", "99", 1);
  EXPECT_EQ(load_experiment_config(dir / "c.toml").train.seed, 99u);
  ::unsetenv("MUTOR_SEED");
  fs::remove_all(dir);
}

TEST(Config, ShippedStarGraphConfigLoads) {
  auto c = load_experiment_config(fs::path(MUTOR_SOURCE_DIR) / "configs" / "stargraph_mutor.toml");
  EXPECT_EQ(c.train.method, Method::MuToR);
  EXPECT_EQ(c.train.offset.mode, OffsetMode::StarGraph);
  EXPECT_EQ(c.train.offset.d_max, 4);
  EXPECT_EQ(c.train.a, 0.5);
}

TEST(Config, ShippedStarGraphConfigsDifferOnlyInMethod) {
  auto m = load_experiment_config(fs::path(MUTOR_SOURCE_DIR) / "configs" / "stargraph_mutor.toml").to_kv();
  auto n = load_experiment_config(fs::path(MUTOR_SOURCE_DIR) / "configs" / "stargraph_ntp.toml").to_kv();
  EXPECT_EQ(n.at("train.method"), "next_token");
  for (auto* kv : {&m, &n}) {
    kv->erase("train.method");
    kv->erase("train.a");
  }
  EXPECT_EQ(m, n);
}

TEST(Train, SameSeedGivesByteIdenticalMetrics) {
  auto dir = temp_dir();
  auto data = toy_data(30, 1);
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    TrainOutputs out;
    out.metrics = dir / name;
    train(toy_train(Method::MuToR), tiny_model(10), data, out);
  }
  const std::string a = slurp(dir / "a.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b.jsonl"));
  auto other = toy_train(Method::MuToR);
  other.seed = 4;
  TrainOutputs out;
  out.metrics = dir / "c.jsonl";
  train(other, tiny_model(10), data, out);
  EXPECT_NE(a, slurp(dir / "c.jsonl"));
  fs::remove_all(dir);
}

TEST(Train, MetricsStreamLayout) {
  auto dir = temp_dir();
  TrainOutputs out;
  out.metrics = dir / "m.jsonl";
  out.evaluator = [](const ModelParams<float>&) { return 0.25; };
  auto cfg = toy_train(Method::MuToR);
  cfg.eval_every = 10;
  auto r = train(cfg, tiny_model(10), toy_data(12, 2), out);
  std::ifstream is(dir / "m.jsonl");
  std::string line;
  std::getline(is, line);
  auto header = nlohmann::json::parse(line);
  EXPECT_EQ(header["type"], "header");
  EXPECT_EQ(header["method"], "mutor");
  EXPECT_EQ(header["train"]["a"], "0.5");
  std::size_t steps = 0, evals = 0;
  while (std::getline(is, line)) {
    auto j = nlohmann::json::parse(line);
    if (j["type"] == "step") {
      ++steps;
      for (const char* k : {"l_ntp", "l_reg", "l_total", "a", "lr", "tokens", "register_tokens"}) {
        EXPECT_TRUE(j.contains(k)) << k;
      }
      EXPECT_GT(j["register_tokens"].get<int>(), 0);
      EXPECT_GT(j["tokens"].get<int>(), j["register_tokens"].get<int>());
    } else if (j["type"] == "eval") {
      ++evals;
      EXPECT_EQ(j["solve_rate"], 0.25);
    }
  }
  EXPECT_EQ(steps, 20u);
  EXPECT_EQ(evals, 2u);
  EXPECT_EQ(r.evals.size(), 2u);
  fs::remove_all(dir);
}

TEST(Train, ZeroWeightMuToRMatchesNextToken) {
  auto data = toy_data(25, 5);
  auto ntp_cfg = toy_train(Method::NextToken);
  auto mutor_cfg = toy_train(Method::MuToR);
  mutor_cfg.a = 0.0;
  for (double density : {0.0, 1.0}) {
    mutor_cfg.offset.register_density = density;
    auto ntp = train(ntp_cfg, tiny_model(10), data);
    auto mut = train(mutor_cfg, tiny_model(10), data);
    ASSERT_EQ(ntp.history.size(), mut.history.size());
    for (std::size_t s = 0; s < ntp.history.size(); ++s) {
      EXPECT_EQ(ntp.history[s].l_ntp, mut.history[s].l_ntp) << "step " << s;
      EXPECT_EQ(ntp.history[s].l_total, mut.history[s].l_total) << "step " << s;
    }
    auto a = ntp.params.named_parameters(), b = mut.params.named_parameters();
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = 0; k < a[i].tensor.numel(); ++k) {
        worst = std::max(worst, double(std::abs(a[i].tensor.data()[k] - b[i].tensor.data()[k])));
      }
    }
    EXPECT_LE(worst, 1e-6) << "density " << density;
  }
}

TEST(Train, BaselineWithoutHeadsMatchesNextToken) {
  auto data = toy_data(25, 6);
  auto base_cfg = toy_train(Method::MultiTokenBaseline);
  base_cfg.a = 0.0;
  auto ntp = train(toy_train(Method::NextToken), tiny_model(10), data);
  auto base = train(base_cfg, tiny_model(10), data);
  for (std::size_t s = 0; s < ntp.history.size(); ++s) EXPECT_EQ(ntp.history[s].l_ntp, base.history[s].l_ntp);
  base_cfg.a = 0.1;
  EXPECT_THROW(train(base_cfg, tiny_model(10), data), ConfigError);
  auto with_heads = tiny_model(10);
  with_heads.baseline_heads = 1;
  EXPECT_NO_THROW(train(base_cfg, with_heads, data));
  EXPECT_THROW(train(toy_train(Method::MuToR), with_heads, data), ConfigError);
}

TEST(Train, NonFiniteLossAbortsAndKeepsLastCheckpoint) {
  auto dir = temp_dir();
  auto cfg = toy_train(Method::MuToR);
  cfg.warmup_steps = 0;
  cfg.lr_peak = 1e30;
  cfg.grad_clip = 0;
  cfg.checkpoint_every = 1;
  TrainOutputs out;
  out.metrics = dir / "m.jsonl";
  out.checkpoint = dir / "model.ckpt";
  auto r = train(cfg, tiny_model(10), toy_data(10, 7), out);
  ASSERT_TRUE(r.aborted);
  EXPECT_FALSE(r.abort_reason.empty());
  ASSERT_TRUE(fs::exists(dir / "model.ckpt"));
  auto ckpt = read_checkpoint(dir / "model.ckpt");
  EXPECT_EQ(std::stoul(ckpt.metadata.at("step")), r.steps_done);
  for (const auto& t : ckpt.tensors) {
    for (float v : t.tensor.data()) ASSERT_TRUE(std::isfinite(v)) << t.name;
  }
  const std::string metrics = slurp(dir / "m.jsonl");
  EXPECT_NE(metrics.find("\"type\":\"abort\""), std::string::npos);
  fs::remove_all(dir);
}

TEST(Train, CheckpointRoundTripAndMismatch) {
  auto dir = temp_dir();
  TrainOutputs out;
  out.checkpoint = dir / "model.ckpt";
  auto r = train(toy_train(Method::MuToR), tiny_model(10), toy_data(10, 8), out);
  auto ckpt = read_checkpoint(dir / "model.ckpt");
  EXPECT_EQ(ckpt.metadata.at("train.method"), "mutor");
  EXPECT_TRUE(fs::exists(optimizer_state_path(dir / "model.ckpt")));
  auto params = params_from_checkpoint(ckpt);
  auto a = params.named_parameters(), b = r.params.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }
  auto other = tiny_model(10);
  other.d_model = 32;
  other.d_head = 16;
  EXPECT_THROW(params_from_checkpoint(ckpt, other), ConfigError);
  fs::remove_all(dir);
}

TEST(Train, MaxStepsKeepsSchedule) {
  auto cfg = toy_train(Method::NextToken);
  cfg.max_steps = 8;
  auto r = train(cfg, tiny_model(10), toy_data(10, 9));
  EXPECT_EQ(r.steps_done, 8u);
  EXPECT_DOUBLE_EQ(r.history.back().lr, lr_at(7, cfg));
}

TEST(Train, ThroughputCountsRegisters) {
  auto r = train(toy_train(Method::MuToR), tiny_model(10), toy_data(10, 10));
  std::size_t regs = 0, toks = 0;
  for (const auto& m : r.history) regs += m.register_tokens, toks += m.tokens;
  EXPECT_GT(regs, 0u);
  EXPECT_EQ(toks, r.tokens);
}

namespace {

// Examples whose answer is a deterministic function the tiny model can be
// forced to output: the parameters are trained to memorise them.
std::vector<EvalExample> copy_examples(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<EvalExample> out;
  for (std::size_t i = 0; i < count; ++i) {
    EvalExample e;
    e.prompt = oracle::random_tokens(rng, 2 + rng() % 6, 9);
    e.answer = oracle::random_tokens(rng, 1 + rng() % 4, 9);
    e.answer.push_back(9);
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST(Evaluate, BatchSizeDoesNotChangeTheReport) {
  auto params = ModelParams<float>::init(tiny_model(10), 11);
  auto examples = copy_examples(40, 12);
  EvalOptions one;
  one.batch_size = 1;
  one.stop_id = 9;
  EvalOptions many = one;
  many.batch_size = 32;
  auto r1 = evaluate(params, examples, one);
  auto r32 = evaluate(params, examples, many);
  EXPECT_EQ(r1.correct, r32.correct);
  EXPECT_EQ(r1.solve_rate, r32.solve_rate);
  EXPECT_EQ(r1.token_accuracy, r32.token_accuracy);
  EXPECT_EQ(r1.total, 40u);
  EXPECT_GE(r1.solve_rate, 0.0);
  EXPECT_LE(r1.solve_rate, 1.0);
}

TEST(Evaluate, PerfectAndConstantModels) {
  // A model whose greedy output is fixed: every logit row equals the
  // unembedding of one dominant direction. Build it by zeroing all blocks
  // and giving the target token's embedding row a large norm along the
  // final-norm gain.
  auto c = tiny_model(10);
  auto p = ModelParams<float>::init(c, 13);
  for (auto& b : p.blocks) {
    for (auto* t : {&b.wo, &b.w_down}) std::fill(t->data().begin(), t->data().end(), 0.0f);
  }
  // Hidden state = embedding of the last token; make every token's
  // embedding point the same way, and token 4's row the strongest match.
  const std::size_t d = c.d_model;
  auto e = p.embedding.data();
  for (std::size_t v = 0; v < c.vocab_size; ++v) {
    for (std::size_t k = 0; k < d; ++k) e[v * d + k] = v == 4 ? 1.0f : 0.1f;
  }
  std::vector<EvalExample> examples;
  for (int i = 0; i < 10; ++i) examples.push_back({{static_cast<TokenId>(i % 9), 1}, {4, 4}});
  EvalOptions opt;
  auto perfect = evaluate(p, examples, opt);
  EXPECT_EQ(perfect.solve_rate, 1.0);
  EXPECT_EQ(perfect.token_accuracy, 1.0);
  // Same fixed output, gold answers that start with it one time in five.
  std::vector<EvalExample> fifth;
  for (int i = 0; i < 10; ++i) fifth.push_back({{1, 2}, {static_cast<TokenId>(i % 5 == 0 ? 4 : 3), 4}});
  auto r = evaluate(p, fifth, opt);
  EXPECT_DOUBLE_EQ(r.solve_rate, 0.2);
}

TEST(Evaluate, RegisterRowsDoNotAffectReports) {
  auto c = tiny_model(10);
  auto p = ModelParams<float>::init(c, 14);
  auto examples = copy_examples(20, 15);
  EvalOptions opt;
  opt.stop_id = 9;
  auto before = evaluate(p, examples, opt);
  for (auto& x : p.register_rows()) x = 0;
  auto after = evaluate(p, examples, opt);
  EXPECT_EQ(before.correct, after.correct);
  EXPECT_EQ(before.token_accuracy, after.token_accuracy);
}

TEST(Evaluate, StarGraphEvalSetLayout) {
  DatasetHeader h;
  h.kind = "stargraph";
  h.seed = 1;
  h.n = 3;
  h.l = 4;
  h.node_count = 20;
  std::vector<StarGraphInstance> insts{star_graph_at(h, 0), star_graph_at(h, 1)};
  StarGraphVocab vocab{20};
  auto set = star_graph_eval_set(insts, vocab, 5);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set[0].prompt.size(), 3u * 12u + 3u);
  EXPECT_EQ(set[0].answer.size(), 6u);
  EXPECT_EQ(set[0].answer.back(), vocab.eos());
  EXPECT_EQ(set[0].prompt, star_graph_eval_set(insts, vocab, 5)[0].prompt);
}

namespace {

std::string metrics_file(const std::string& method, const std::vector<std::tuple<int, double, double>>& rows,
                         std::optional<double> solve) {
  std::ostringstream os;
  os << R"({"type":"header","format":"mutor-metrics","version":1,"method":")" << method
     << R"(","train":{},"model":{},"extra":{}})" << "\n";
  for (auto [step, ntp, reg] : rows) {
    os << R"({"type":"step","step":)" << step << R"(,"l_ntp":)" << ntp << R"(,"l_reg":)" << reg
       << R"(,"l_total":)" << 0.5 * ntp + 0.5 * reg << R"(,"a":0.5,"lr":0.001,"grad_norm":1,"tokens":10,"register_tokens":2})"
       << "\n";
  }
  if (solve) os << R"({"type":"eval","step":)" << std::get<0>(rows.back()) << R"(,"solve_rate":)" << *solve << "}\n";
  return os.str();
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    out.push_back(cells);
  }
  return out;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  EXPECT_NE(it, header.end()) << name;
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

TEST(Compare, SingleFilePassesThrough) {
  auto dir = temp_dir();
  write_file(dir / "a.jsonl", metrics_file("mutor", {{0, 2.0, 3.0}, {1, 1.5, 2.5}, {2, 1.0, 2.0}}, 0.75));
  auto r = compare_runs(std::vector<fs::path>{dir / "a.jsonl"});
  EXPECT_TRUE(r.warnings.empty());
  auto curves = csv(r.curves_csv);
  ASSERT_EQ(curves.size(), 4u);
  const auto ntp = column(curves[0], "l_ntp_mean"), sd = column(curves[0], "l_ntp_std");
  EXPECT_DOUBLE_EQ(std::stod(curves[2][ntp]), 1.5);
  EXPECT_DOUBLE_EQ(std::stod(curves[2][sd]), 0.0);
  auto summary = csv(r.summary_csv);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_DOUBLE_EQ(std::stod(summary[1][column(summary[0], "solve_rate_mean")]), 0.75);
  fs::remove_all(dir);
}

TEST(Compare, HandComputedMeanAndStd) {
  auto dir = temp_dir();
  write_file(dir / "s1.jsonl", metrics_file("next_token", {{0, 1.0, 0}, {5, 2.0, 0}}, 0.1));
  write_file(dir / "s2.jsonl", metrics_file("next_token", {{0, 2.0, 0}, {5, 4.0, 0}}, 0.2));
  write_file(dir / "s3.jsonl", metrics_file("next_token", {{0, 3.0, 0}, {5, 9.0, 0}}, 0.6));
  auto r = compare_runs(std::vector<fs::path>{dir / "s1.jsonl", dir / "s2.jsonl", dir / "s3.jsonl"});
  auto curves = csv(r.curves_csv);
  const auto mean = column(curves[0], "l_ntp_mean"), sd = column(curves[0], "l_ntp_std");
  // Step 5: values 2, 4, 9 -> mean 5, sample variance (9 + 1 + 16) / 2 = 13.
  EXPECT_NEAR(std::stod(curves[2][mean]), 5.0, 1e-9);
  EXPECT_NEAR(std::stod(curves[2][sd]), std::sqrt(13.0), 1e-6);
  EXPECT_NEAR(std::stod(curves[1][sd]), 1.0, 1e-9);
  for (std::size_t i = 1; i < curves.size(); ++i) {
    for (std::size_t c = 0; c < curves[0].size(); ++c) {
      if (curves[0][c].find("_std") != std::string::npos) {
        EXPECT_GE(std::stod(curves[i][c]), 0.0);
      }
    }
  }
  auto summary = csv(r.summary_csv);
  EXPECT_NEAR(std::stod(summary[1][column(summary[0], "solve_rate_mean")]), 0.3, 1e-9);
  EXPECT_EQ(summary[1][column(summary[0], "runs")], "3");
  fs::remove_all(dir);
}

TEST(Compare, MismatchedGridsAreResampledWithWarning) {
  auto dir = temp_dir();
  write_file(dir / "fine.jsonl", metrics_file("mutor", {{0, 0.0, 0}, {1, 1.0, 0}, {2, 2.0, 0}, {3, 3.0, 0}, {4, 4.0, 0}}, {}));
  write_file(dir / "coarse.jsonl", metrics_file("mutor", {{0, 10.0, 0}, {4, 14.0, 0}}, {}));
  auto r = compare_runs(std::vector<fs::path>{dir / "fine.jsonl", dir / "coarse.jsonl"});
  EXPECT_FALSE(r.warnings.empty());
  auto curves = csv(r.curves_csv);
  ASSERT_EQ(curves.size(), 3u);
  const auto mean = column(curves[0], "l_ntp_mean");
  EXPECT_NEAR(std::stod(curves[2][mean]), (4.0 + 14.0) / 2, 1e-9);
  fs::remove_all(dir);
}

TEST(Compare, GroupsByMethodAndRejectsBadFiles) {
  auto dir = temp_dir();
  write_file(dir / "a.jsonl", metrics_file("mutor", {{0, 1.0, 1.0}}, {}));
  write_file(dir / "b.jsonl", metrics_file("next_token", {{0, 2.0, 0}}, {}));
  auto r = compare_runs(std::vector<fs::path>{dir / "a.jsonl", dir / "b.jsonl"});
  EXPECT_EQ(csv(r.summary_csv).size(), 3u);
  write_file(dir / "bad.jsonl", metrics_file("mutor", {{0, 1.0, 1.0}}, {}) + "{broken\n");
  try {
    read_metrics(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(compare_runs(std::vector<fs::path>{}), ConfigError);
  fs::remove_all(dir);
}

TEST(Train, StarGraphRegisterLossDropsBelowUniformWithinOneEpoch) {
  DatasetHeader h;
  h.kind = "stargraph";
  h.seed = 21;
  h.n = 5;
  h.l = 5;
  h.node_count = 50;
  std::vector<StarGraphInstance> insts;
  for (std::size_t i = 0; i < 1280; ++i) insts.push_back(star_graph_at(h, i));
  StarGraphVocab vocab{50};
  auto data = star_graph_training_set(insts, vocab);
  ModelConfig mc = tiny_model(vocab.size());
  mc.d_model = 32;
  mc.d_head = 16;
  mc.max_seq_len = 128;
  TrainConfig tc = toy_train(Method::MuToR);
  tc.offset.mode = OffsetMode::StarGraph;
  tc.offset.d_max = 4;
  tc.bidirectional_prefix = true;
  tc.batch_size = 32;
  tc.total_steps = 40;  // one pass over the data
  tc.warmup_steps = 5;
  tc.lr_peak = 3e-3;
  auto r = train(tc, mc, data);
  double tail = 0;
  for (std::size_t s = 30; s < 40; ++s) tail += r.history[s].l_reg;
  EXPECT_GT(r.history.front().l_reg, 0.9 * std::log(double(vocab.size())));
  EXPECT_LT(tail / 10, std::log(double(vocab.size())));
}
