#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mutor/augment.h"
#include "mutor/checkpoint.h"
#include "mutor/model.h"
#include "mutor/optim.h"
#include "mutor/tasks.h"

namespace mutor {

enum class Method : std::uint8_t { NextToken, MuToR, MultiTokenBaseline };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct TrainConfig {
  double lr_peak = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 1000;  // learning rate reaches 0 here
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double a = 0.5;
  OffsetSpec offset;
  Method method = Method::MuToR;
  bool bidirectional_prefix = false;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::size_t eval_every = 0;        // 0: final evaluation only
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double grad_clip = 1.0;  // 0 disables clipping
  // Stop after this many steps while keeping the schedule of total_steps.
  std::optional<std::size_t> max_steps;

  // NextToken ignores `a` and never inserts registers.
  double effective_a() const { return method == Method::NextToken ? 0.0 : a; }
  void validate() const;

  std::map<std::string, std::string> to_kv() const;
  // Missing keys keep their defaults; unknown keys throw ConfigError.
  static TrainConfig from_kv(const std::map<std::string, std::string>& kv);
};

// Linear warmup from 0 to lr_peak, then linear decay to 0 at total_steps.
double lr_at(std::size_t step, const TrainConfig& config);

// TOML-style file: `key = value` lines, `[section]` headers that prefix the
// following keys with "section.", `#` comments, optional double quotes.
std::map<std::string, std::string> parse_config_text(const std::string& text);

struct ExperimentConfig {
  TrainConfig train;
  ModelConfig model;
  // [data] and any other sections, keyed "section.key".
  std::map<std::string, std::string> other;

  std::map<std::string, std::string> to_kv() const;
};

// Reads [train], [offset], [model] and keeps the rest. MUTOR_SEED, when set,
// replaces train.seed.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_kv(const std::map<std::string, std::string>& kv);
void apply_env_overrides(TrainConfig& config);

// Produces the raw sequence for dataset entry `index`; `rng` is a stream
// private to (seed, index, epoch) for per-epoch variation such as edge order.
struct TrainingSet {
  std::size_t size = 0;
  std::function<RawSequence(std::size_t index, Rng& rng)> sample;
};

TrainingSet fixed_training_set(std::vector<RawSequence> sequences);
TrainingSet star_graph_training_set(std::vector<StarGraphInstance> instances, StarGraphVocab vocab);
TrainingSet grid_training_set(std::vector<GridInstance> instances, int pattern_vocab);

struct StepMetrics {
  std::size_t step = 0;
  double l_ntp = 0, l_reg = 0, l_total = 0, a = 0, lr = 0, grad_norm = 0;
  std::size_t tokens = 0;  // every slot fed to the model, registers included
  std::size_t register_tokens = 0;
};

struct TrainOutputs {
  std::optional<std::filesystem::path> metrics;
  std::optional<std::filesystem::path> checkpoint;
  // Solve-rate hook, run every eval_every steps and after the last step.
  std::function<double(const ModelParams<float>&)> evaluator;
  // Extra header fields (dataset description and the like).
  std::map<std::string, std::string> header_extra;
  bool verbose = false;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<StepMetrics> history;
  std::vector<std::pair<std::size_t, double>> evals;
  std::size_t steps_done = 0;
  bool aborted = false;
  std::string abort_reason;
  double wall_seconds = 0;
  std::size_t tokens = 0;
};

// Deterministic in (config, model config, data): the metrics file carries no
// timing. A non-finite loss or gradient stops the run, writes an abort line,
// and leaves the last checkpoint on disk untouched.
TrainResult train(const TrainConfig& config, const ModelConfig& model_config, const TrainingSet& data,
                  const TrainOutputs& outputs = {});

// The padded batch the training loop builds for these dataset entries, each
// seen in the given epoch.
AugmentedBatch training_batch(const TrainConfig& config, const ModelConfig& model_config,
                              const TrainingSet& data, std::span<const std::size_t> indices,
                              std::span<const std::size_t> epochs);

Checkpoint make_checkpoint(const ModelParams<float>& params, const std::map<std::string, std::string>& meta);
// Throws ConfigError when tensor names or shapes disagree with the stored
// model config, or with `expected` when given.
ModelParams<float> params_from_checkpoint(const Checkpoint& ckpt,
                                          const std::optional<ModelConfig>& expected = std::nullopt);

struct EvalExample {
  std::vector<TokenId> prompt;
  std::vector<TokenId> answer;  // gold continuation including the stop token
};

struct EvalOptions {
  std::size_t batch_size = 32;
  std::optional<TokenId> stop_id;
  bool bidirectional_prefix = false;
};

struct EvalReport {
  double solve_rate = 0;      // exact match of the whole answer
  double token_accuracy = 0;  // position-wise match over answer tokens
  std::size_t solved = 0;
  std::size_t total = 0;
  double wall_seconds = 0;
  double tokens_per_second = 0;
  std::vector<bool> correct;
};

// Greedy decoding without registers. Results do not depend on batch_size.
EvalReport evaluate(const ModelParams<float>& params, std::span<const EvalExample> examples,
                    const EvalOptions& options);

// Prompts with edges in an order fixed by (seed, index).
std::vector<EvalExample> star_graph_eval_set(std::span<const StarGraphInstance> instances,
                                             const StarGraphVocab& vocab, std::uint64_t seed);
std::vector<EvalExample> grid_eval_set(std::span<const GridInstance> instances, int pattern_vocab);

struct RunMetrics {
  std::filesystem::path path;
  std::string method;
  std::map<std::string, std::string> config;
  std::vector<StepMetrics> steps;
  std::vector<std::pair<std::size_t, double>> evals;
};

// Throws ParseError with the line number on malformed content.
RunMetrics read_metrics(const std::filesystem::path& path);

struct CompareResult {
  std::string summary_csv;  // one row per method
  std::string curves_csv;   // one row per (method, step)
  std::vector<std::string> warnings;
};

// Groups runs by method and reports mean and sample standard deviation
// across runs. Runs with differing step grids are linearly resampled onto
// the coarsest grid of the group, with a warning.
CompareResult compare_runs(const std::vector<RunMetrics>& runs);
CompareResult compare_runs(const std::vector<std::filesystem::path>& files);

}  // namespace mutor
