// Command-line front end: dataset generation, training, evaluation and run
// comparison.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mutor/checkpoint.h"
#include "mutor/errors.h"
#include "mutor/harness.h"
#include "mutor/tasks.h"

namespace fs = std::filesystem;
using namespace mutor;

namespace {

struct LoadedData {
  DatasetHeader header;
  TrainingSet train;
  std::vector<EvalExample> eval;
  std::size_t vocab_size = 0;
  std::optional<TokenId> stop_id;
};

LoadedData load_for_eval(const fs::path& path, std::size_t limit, std::uint64_t eval_seed) {
  LoadedData out;
  DatasetReader reader(path);
  out.header = reader.header();
  if (out.header.kind == "stargraph") {
    const StarGraphVocab vocab{out.header.node_count};
    std::vector<StarGraphInstance> insts;
    while (auto inst = reader.next_star_graph()) {
      if (limit && insts.size() == limit) break;
      insts.push_back(std::move(*inst));
    }
    out.eval = star_graph_eval_set(insts, vocab, eval_seed);
    out.vocab_size = vocab.size();
    out.stop_id = vocab.eos();
  } else {
    std::vector<GridInstance> insts;
    while (auto inst = reader.next_grid()) {
      if (limit && insts.size() == limit) break;
      insts.push_back(std::move(*inst));
    }
    out.eval = grid_eval_set(insts, out.header.pattern_vocab);
    out.vocab_size = grid_vocab_size(out.header.pattern_vocab, out.header.num_classes);
  }
  return out;
}

LoadedData load_for_train(const fs::path& path, std::size_t limit) {
  LoadedData out;
  if (DatasetReader(path).header().kind == "stargraph") {
    auto insts = read_star_graphs(path, &out.header);
    if (limit && insts.size() > limit) insts.resize(limit);
    const StarGraphVocab vocab{out.header.node_count};
    out.vocab_size = vocab.size();
    out.stop_id = vocab.eos();
    out.train = star_graph_training_set(std::move(insts), vocab);
  } else {
    auto insts = read_grids(path, &out.header);
    if (limit && insts.size() > limit) insts.resize(limit);
    out.vocab_size = grid_vocab_size(out.header.pattern_vocab, out.header.num_classes);
    out.train = grid_training_set(std::move(insts), out.header.pattern_vocab);
  }
  return out;
}

void print_report(const EvalReport& r) {
  nlohmann::json j{{"solve_rate", r.solve_rate},     {"token_accuracy", r.token_accuracy},
                   {"solved", r.solved},             {"total", r.total},
                   {"wall_seconds", r.wall_seconds}, {"tokens_per_second", r.tokens_per_second}};
  std::cout << j.dump() << '\n';
}

int run_gen_stargraph(int n, int l, int nodes, std::size_t count, std::uint64_t seed, const fs::path& out,
                      const std::string& vocab_out) {
  DatasetHeader h;
  h.kind = "stargraph";
  h.seed = seed;
  h.count = count;
  h.n = n;
  h.l = l;
  h.node_count = nodes;
  generate_dataset(out, h);
  if (!vocab_out.empty()) write_vocab(vocab_out, star_graph_token_names(StarGraphVocab{nodes}));
  std::fprintf(stderr, "wrote %zu G(%d,%d) instances to %s\n", count, n, l, out.c_str());
  return 0;
}

int run_gen_grid(int height, int width, int pattern_vocab, int classes, std::uint64_t table_seed,
                 std::size_t count, std::uint64_t seed, const fs::path& out) {
  DatasetHeader h;
  h.kind = "grid";
  h.seed = seed;
  h.count = count;
  h.h = height;
  h.w = width;
  h.pattern_vocab = pattern_vocab;
  h.num_classes = classes;
  h.table_seed = table_seed;
  generate_dataset(out, h);
  std::fprintf(stderr, "wrote %zu %dx%d grids to %s\n", count, height, width, out.c_str());
  return 0;
}

int run_train(const fs::path& config_path, std::string data_path, std::string test_path, const fs::path& out_dir,
              std::size_t eval_count, bool quiet) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (data_path.empty()) data_path = cfg.other.count("data.train") ? cfg.other.at("data.train") : "";
  if (test_path.empty() && cfg.other.count("data.test")) test_path = cfg.other.at("data.test");
  if (data_path.empty()) throw ConfigError("train: no dataset (pass --data or set [data] train)");
  if (!eval_count && cfg.other.count("data.eval_count")) eval_count = std::stoull(cfg.other.at("data.eval_count"));
  std::size_t train_limit = 0;
  if (cfg.other.count("data.train_count")) train_limit = std::stoull(cfg.other.at("data.train_count"));

  LoadedData data = load_for_train(data_path, train_limit);
  if (cfg.model.vocab_size != data.vocab_size) {
    std::fprintf(stderr, "model.vocab_size set to %zu to match the dataset\n", data.vocab_size);
    cfg.model.vocab_size = data.vocab_size;
  }
  fs::create_directories(out_dir);
  TrainOutputs outputs;
  outputs.metrics = out_dir / "metrics.jsonl";
  outputs.checkpoint = out_dir / "model.ckpt";
  outputs.verbose = !quiet;
  outputs.header_extra["data.train"] = fs::path(data_path).filename().string();
  outputs.header_extra["data.count"] = std::to_string(data.train.size);
  for (const auto& [k, v] : cfg.other) outputs.header_extra[k] = v;

  std::vector<EvalExample> eval_set;
  EvalOptions eval_opts;
  if (!test_path.empty()) {
    LoadedData test = load_for_eval(test_path, eval_count, cfg.train.seed);
    if (test.vocab_size != data.vocab_size) throw ConfigError("train: test set vocabulary differs from training set");
    eval_set = std::move(test.eval);
    eval_opts.stop_id = test.stop_id;
    eval_opts.bidirectional_prefix = cfg.train.bidirectional_prefix;
    outputs.header_extra["data.test"] = fs::path(test_path).filename().string();
    outputs.evaluator = [&](const ModelParams<float>& p) { return evaluate(p, eval_set, eval_opts).solve_rate; };
  }
  const TrainResult r = train(cfg.train, cfg.model, data.train, outputs);
  std::fprintf(stderr, "%zu steps, %zu tokens (registers included), %.1f s, %.0f tokens/s\n", r.steps_done,
               r.tokens, r.wall_seconds, double(r.tokens) / std::max(r.wall_seconds, 1e-9));
  if (!r.evals.empty()) std::printf("final solve_rate %.4f\n", r.evals.back().second);
  if (r.aborted) {
    std::fprintf(stderr, "training aborted: %s\n", r.abort_reason.c_str());
    return 3;
  }
  return 0;
}

int run_eval(const fs::path& checkpoint, const fs::path& data_path, std::size_t batch_size, std::size_t count,
             std::optional<std::uint64_t> seed) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  if (!seed) {
    auto s = ckpt.metadata.find("train.seed");
    seed = s == ckpt.metadata.end() ? 0 : std::stoull(s->second);
  }
  const ModelParams<float> params = params_from_checkpoint(ckpt);
  LoadedData data = load_for_eval(data_path, count, *seed);
  if (params.config.vocab_size != data.vocab_size) {
    throw ConfigError("eval: checkpoint vocabulary (" + std::to_string(params.config.vocab_size) +
                      ") does not match the dataset (" + std::to_string(data.vocab_size) + ")");
  }
  EvalOptions opts;
  opts.batch_size = batch_size;
  opts.stop_id = data.stop_id;
  auto it = ckpt.metadata.find("train.bidirectional_prefix");
  opts.bidirectional_prefix = it != ckpt.metadata.end() && it->second == "true";
  print_report(evaluate(params, data.eval, opts));
  return 0;
}

int run_compare(const std::vector<std::string>& files, const std::string& summary_out, const std::string& curves_out) {
  std::vector<fs::path> paths(files.begin(), files.end());
  const CompareResult r = compare_runs(paths);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (summary_out.empty()) {
    std::cout << r.summary_csv;
  } else {
    std::ofstream(summary_out) << r.summary_csv;
  }
  if (!curves_out.empty()) std::ofstream(curves_out) << r.curves_csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Register-token multi-token prediction: data, training, evaluation"};
  app.require_subcommand(1);

  auto* gs = app.add_subcommand("gen-stargraph", "Generate star-graph path-finding instances");
  int n = 5, l = 5, nodes = 50;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::string out, vocab_out;
  gs->add_option("--n", n, "Paths leaving the start node")->capture_default_str();
  gs->add_option("--l", l, "Edges per path")->capture_default_str();
  gs->add_option("--nodes", nodes, "Node label vocabulary size")->capture_default_str();
  gs->add_option("--count", count, "Number of instances")->capture_default_str();
  gs->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gs->add_option("--out", out, "Output JSONL path")->required();
  gs->add_option("--vocab", vocab_out, "Also write the token vocabulary here");

  auto* gg = app.add_subcommand("gen-grid", "Generate 2-D Markov texture grids");
  int h = 8, w = 8, pattern_vocab = 8, classes = 4;
  std::uint64_t table_seed = kDefaultGridTableSeed;
  gg->add_option("--height", h, "Grid height")->capture_default_str();
  gg->add_option("--width", w, "Grid width")->capture_default_str();
  gg->add_option("--pattern-vocab", pattern_vocab, "Cell vocabulary size")->capture_default_str();
  gg->add_option("--classes", classes, "Number of class labels")->capture_default_str();
  gg->add_option("--table-seed", table_seed, "Seed of the conditional tables");
  gg->add_option("--count", count, "Number of grids")->capture_default_str();
  gg->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gg->add_option("--out", out, "Output JSONL path")->required();

  auto* tr = app.add_subcommand("train", "Train a model from a config file");
  std::string config, data, test, out_dir = "run";
  std::size_t eval_count = 0;
  bool quiet = false;
  tr->add_option("--config", config, "TOML-style experiment config")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Training dataset (overrides [data] train)");
  tr->add_option("--test", test, "Held-out dataset for solve-rate evaluation");
  tr->add_option("--eval-count", eval_count, "Use only the first N test instances");
  tr->add_option("--out-dir", out_dir, "Directory for metrics.jsonl and model.ckpt")->capture_default_str();
  tr->add_flag("--quiet", quiet, "No progress output");

  auto* ev = app.add_subcommand("eval", "Greedy-decode a test set and report the solve rate");
  std::string checkpoint;
  std::size_t batch_size = 32;
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Test dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--batch-size", batch_size, "Decoding batch size")->capture_default_str();
  ev->add_option("--count", count, "Use only the first N instances (0: all)");
  ev->add_option("--seed", seed, "Seed of the prompt edge order (default: the training seed)");

  auto* cm = app.add_subcommand("compare", "Aggregate metrics files into CSV tables");
  std::vector<std::string> files;
  std::string summary_out, curves_out;
  cm->add_option("files", files, "Metrics JSONL files")->required()->check(CLI::ExistingFile);
  cm->add_option("--summary", summary_out, "Summary CSV path (default: stdout)");
  cm->add_option("--curves", curves_out, "Per-step curves CSV path");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gs->parsed()) return run_gen_stargraph(n, l, nodes, count, seed, out, vocab_out);
    if (gg->parsed()) return run_gen_grid(h, w, pattern_vocab, classes, table_seed, count, seed, out);
    if (tr->parsed()) return run_train(config, data, test, out_dir, eval_count, quiet);
    if (ev->parsed()) return run_eval(checkpoint, data, batch_size, ev->count("--count") ? count : 0,
                                       ev->count("--seed") ? std::optional<std::uint64_t>(seed) : std::nullopt);
    if (cm->parsed()) return run_compare(files, summary_out, curves_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
