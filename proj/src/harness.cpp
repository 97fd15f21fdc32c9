#include "mutor/harness.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "mutor/errors.h"
#include "mutor/objectives.h"

namespace mutor {
namespace {

using nlohmann::json;

constexpr std::uint64_t kOrderStream = 0x4f52;
constexpr std::uint64_t kSampleStream = 0x5341;
constexpr std::uint64_t kAugmentStream = 0x4155;
constexpr std::uint64_t kEvalStream = 0x4556;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(value, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw ConfigError("config: '" + key + "' is not a number: " + value);
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
    out = std::stoull(value, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError("config: '" + key + "' is not a non-negative integer: " + value);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: '" + key + "' is not a boolean: " + value);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t size) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = derive_stream({seed, kOrderStream, epoch});
  for (std::size_t i = size; i > 1; --i) std::swap(order[i - 1], order[uniform_int<std::size_t>(rng, 0, i - 1)]);
  return order;
}

json kv_json(const std::map<std::string, std::string>& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

void save_optimizer(const std::filesystem::path& ckpt_path, const std::vector<NamedTensor<float>>& params,
                    const AdamState<float>& state) {
  Checkpoint c;
  c.metadata["step"] = std::to_string(state.step);
  for (std::size_t k = 0; k < state.m.size(); ++k) {
    const Shape& shape = params[k].tensor.shape();
    c.tensors.push_back({"m." + params[k].name, Tensor::from(shape, state.m[k])});
    c.tensors.push_back({"v." + params[k].name, Tensor::from(shape, state.v[k])});
  }
  write_checkpoint(optimizer_state_path(ckpt_path), c);
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::NextToken: return "next_token";
    case Method::MuToR: return "mutor";
    case Method::MultiTokenBaseline: return "multi_token";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "next_token" || name == "NextToken") return Method::NextToken;
  if (name == "mutor" || name == "MuToR") return Method::MuToR;
  if (name == "multi_token" || name == "MultiTokenBaseline") return Method::MultiTokenBaseline;
  throw ConfigError("unknown method '" + name + "' (expected next_token, mutor or multi_token)");
}

void TrainConfig::validate() const {
  if (!(lr_peak > 0.0)) throw ConfigError("train: lr_peak must be positive");
  if (total_steps == 0) throw ConfigError("train: total_steps must be positive");
  if (warmup_steps > total_steps) throw ConfigError("train: warmup_steps exceeds total_steps");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("train: a must lie in [0, 1]");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(grad_clip >= 0.0)) throw ConfigError("train: grad_clip must be non-negative");
  offset.validate();
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  std::map<std::string, std::string> kv{
      {"lr_peak", format_double(lr_peak)},
      {"warmup_steps", std::to_string(warmup_steps)},
      {"total_steps", std::to_string(total_steps)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"a", format_double(a)},
      {"method", to_string(method)},
      {"bidirectional_prefix", bidirectional_prefix ? "true" : "false"},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"eval_every", std::to_string(eval_every)},
      {"weight_decay", format_double(weight_decay)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"grad_clip", format_double(grad_clip)},
      {"offset.mode", to_string(offset.mode)},
      {"offset.d_max", std::to_string(offset.d_max)},
      {"offset.d_max_2d", std::to_string(offset.d_max_2d)},
      {"offset.min_offset", std::to_string(offset.min_offset)},
      {"offset.register_density", format_double(offset.register_density)},
      {"offset.skip_wrapped_2d", offset.skip_wrapped_2d ? "true" : "false"},
  };
  if (max_steps) kv["max_steps"] = std::to_string(*max_steps);
  return kv;
}

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "lr_peak") c.lr_peak = parse_double(k, v);
    else if (k == "warmup_steps") c.warmup_steps = parse_uint(k, v);
    else if (k == "total_steps") c.total_steps = parse_uint(k, v);
    else if (k == "batch_size") c.batch_size = parse_uint(k, v);
    else if (k == "seed") c.seed = parse_uint(k, v);
    else if (k == "a") c.a = parse_double(k, v);
    else if (k == "method") c.method = method_from_string(v);
    else if (k == "bidirectional_prefix") c.bidirectional_prefix = parse_bool(k, v);
    else if (k == "checkpoint_every") c.checkpoint_every = parse_uint(k, v);
    else if (k == "eval_every") c.eval_every = parse_uint(k, v);
    else if (k == "weight_decay") c.weight_decay = parse_double(k, v);
    else if (k == "beta1") c.beta1 = parse_double(k, v);
    else if (k == "beta2") c.beta2 = parse_double(k, v);
    else if (k == "grad_clip") c.grad_clip = parse_double(k, v);
    else if (k == "max_steps") c.max_steps = parse_uint(k, v);
    else if (k == "offset.mode") c.offset.mode = offset_mode_from_string(v);
    else if (k == "offset.d_max") c.offset.d_max = static_cast<int>(parse_uint(k, v));
    else if (k == "offset.d_max_2d") c.offset.d_max_2d = static_cast<int>(parse_uint(k, v));
    else if (k == "offset.min_offset") c.offset.min_offset = static_cast<int>(parse_uint(k, v));
    else if (k == "offset.register_density") c.offset.register_density = parse_double(k, v);
    else if (k == "offset.skip_wrapped_2d") c.offset.skip_wrapped_2d = parse_bool(k, v);
    else throw ConfigError("train config: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

double lr_at(std::size_t step, const TrainConfig& config) {
  const double s = static_cast<double>(std::min(step, config.total_steps));
  const double w = static_cast<double>(config.warmup_steps);
  const double total = static_cast<double>(config.total_steps);
  if (s < w) return config.lr_peak * s / w;
  if (total == w) return config.lr_peak;
  return config.lr_peak * (total - s) / (total - w);
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s;
    bool quoted = false;
    for (char ch : raw) {
      if (ch == '"') quoted = !quoted;
      if (ch == '#' && !quoted) break;
      s.push_back(ch);
    }
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("config: unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ParseError("config: empty section name", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key = value", line);
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError("config: empty key", line);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.find('"') != std::string::npos) {
      throw ParseError("config: unbalanced quotes", line);
    }
    if (!section.empty()) key = section + "." + key;
    if (out.count(key)) throw ParseError("config: duplicate key '" + key + "'", line);
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> ExperimentConfig::to_kv() const {
  std::map<std::string, std::string> kv = other;
  for (const auto& [k, v] : train.to_kv()) {
    kv[k.rfind("offset.", 0) == 0 ? k : "train." + k] = v;
  }
  for (const auto& [k, v] : model.to_kv()) kv["model." + k] = v;
  return kv;
}

ExperimentConfig experiment_config_from_kv(const std::map<std::string, std::string>& kv) {
  std::map<std::string, std::string> train_kv;
  std::map<std::string, std::string> model_kv = ModelConfig{}.to_kv();
  const std::set<std::string> model_keys = [&] {
    std::set<std::string> keys;
    for (const auto& [k, v] : model_kv) keys.insert(k);
    return keys;
  }();
  ExperimentConfig out;
  for (const auto& [k, v] : kv) {
    if (k.rfind("train.", 0) == 0) {
      train_kv[k.substr(6)] = v;
    } else if (k.rfind("offset.", 0) == 0) {
      train_kv[k] = v;
    } else if (k.rfind("model.", 0) == 0) {
      const std::string key = k.substr(6);
      if (!model_keys.count(key)) throw ConfigError("model config: unknown key '" + key + "'");
      model_kv[key] = v;
    } else {
      out.other[k] = v;
    }
  }
  out.train = TrainConfig::from_kv(train_kv);
  try {
    out.model = ModelConfig::from_kv(model_kv);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

void apply_env_overrides(TrainConfig& config) {
  if (const char* s = std::getenv("MUTOR_SEED"); s && *s) config.seed = parse_uint("MUTOR_SEED", s);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  ExperimentConfig c = experiment_config_from_kv(parse_config_text(ss.str()));
  apply_env_overrides(c.train);
  return c;
}

TrainingSet fixed_training_set(std::vector<RawSequence> sequences) {
  for (const auto& s : sequences) s.validate();
  auto shared = std::make_shared<const std::vector<RawSequence>>(std::move(sequences));
  return {shared->size(), [shared](std::size_t i, Rng&) { return (*shared)[i]; }};
}

TrainingSet star_graph_training_set(std::vector<StarGraphInstance> instances, StarGraphVocab vocab) {
  auto shared = std::make_shared<const std::vector<StarGraphInstance>>(std::move(instances));
  return {shared->size(),
          [shared, vocab](std::size_t i, Rng& rng) { return serialize_star_graph((*shared)[i], vocab, rng); }};
}

TrainingSet grid_training_set(std::vector<GridInstance> instances, int pattern_vocab) {
  auto shared = std::make_shared<const std::vector<GridInstance>>(std::move(instances));
  return {shared->size(),
          [shared, pattern_vocab](std::size_t i, Rng&) { return serialize_grid((*shared)[i], pattern_vocab); }};
}

AugmentedBatch training_batch(const TrainConfig& config, const ModelConfig& model_config,
                              const TrainingSet& data, std::span<const std::size_t> indices,
                              std::span<const std::size_t> epochs) {
  if (epochs.size() != indices.size()) throw InputError("training_batch: one epoch per index");
  std::vector<AugmentedSequence> seqs;
  seqs.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t idx = indices[j], epoch = epochs[j];
    Rng sample_rng = derive_stream({config.seed, kSampleStream, idx, epoch});
    RawSequence raw = data.sample(idx, sample_rng);
    if (config.method == Method::MuToR) {
      Rng aug_rng = derive_stream({config.seed, kAugmentStream, idx, epoch});
      const Offset offset = sample_offset(config.offset, raw.grid_width, aug_rng);
      seqs.push_back(interleave(raw, config.offset, offset, aug_rng, model_config.register_id()));
    } else {
      seqs.push_back(plain_sequence(raw));
    }
  }
  return make_batch(seqs, 0, config.bidirectional_prefix);
}

Checkpoint make_checkpoint(const ModelParams<float>& params, const std::map<std::string, std::string>& meta) {
  Checkpoint c;
  c.metadata = meta;
  for (const auto& [k, v] : params.config.to_kv()) c.metadata["model." + k] = v;
  for (const auto& p : params.named_parameters()) c.tensors.push_back({p.name, p.tensor.clone()});
  return c;
}

ModelParams<float> params_from_checkpoint(const Checkpoint& ckpt, const std::optional<ModelConfig>& expected) {
  std::map<std::string, std::string> model_kv;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.rfind("model.", 0) == 0) model_kv[k.substr(6)] = v;
  }
  ModelConfig config;
  try {
    config = ModelConfig::from_kv(model_kv);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  if (expected && !(*expected == config)) {
    throw ConfigError("checkpoint: model config does not match the expected one");
  }
  auto params = ModelParams<float>::init(config, 0);
  const auto named = params.named_parameters();
  if (named.size() != ckpt.tensors.size()) {
    throw ConfigError("checkpoint: holds " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                      std::to_string(named.size()));
  }
  for (const auto& p : named) {
    const Tensor* stored = nullptr;
    for (const auto& t : ckpt.tensors) {
      if (t.name == p.name) stored = &t.tensor;
    }
    if (!stored) throw ConfigError("checkpoint: missing tensor '" + p.name + "'");
    if (stored->shape() != p.tensor.shape()) {
      throw ConfigError("checkpoint: tensor '" + p.name + "' has shape " + shape_str(stored->shape()) +
                        ", model expects " + shape_str(p.tensor.shape()));
    }
    auto dst = BasicTensor<float>(p.tensor).data();
    std::copy(stored->data().begin(), stored->data().end(), dst.begin());
  }
  return params;
}

TrainResult train(const TrainConfig& config, const ModelConfig& model_config, const TrainingSet& data,
                  const TrainOutputs& outputs) {
  config.validate();
  model_config.validate();
  if (data.size == 0) throw ConfigError("train: empty dataset");
#if defined(__GLIBC__)
  // Per-step activation buffers stay in the heap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const double a = config.effective_a();
  if (config.method == Method::MultiTokenBaseline && a > 0.0 && model_config.baseline_heads == 0) {
    throw ConfigError("train: the multi-token baseline with a > 0 needs baseline_heads >= 1");
  }
  if (config.method != Method::MultiTokenBaseline && model_config.baseline_heads != 0) {
    throw ConfigError("train: baseline_heads is only used by the multi-token baseline");
  }
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  result.params = ModelParams<float>::init(model_config, config.seed);
  const auto params = result.params.named_parameters();
  AdamState<float> adam;
  const AdamWConfig adam_cfg{config.beta1, config.beta2, 1e-8, config.weight_decay};

  std::ofstream metrics;
  auto emit = [&](const json& j) {
    if (metrics.is_open()) metrics << j.dump() << '\n';
  };
  if (outputs.metrics) {
    metrics.open(*outputs.metrics, std::ios::trunc);
    if (!metrics) throw std::runtime_error("train: cannot open " + outputs.metrics->string());
    json header{{"type", "header"},
                {"format", "mutor-metrics"},
                {"version", 1},
                {"method", to_string(config.method)},
                {"train", kv_json(config.to_kv())},
                {"model", kv_json(model_config.to_kv())},
                {"extra", kv_json(outputs.header_extra)}};
    emit(header);
  }

  auto checkpoint_meta = [&](std::size_t step) {
    std::map<std::string, std::string> meta;
    for (const auto& [k, v] : config.to_kv()) meta["train." + k] = v;
    meta["step"] = std::to_string(step);
    return meta;
  };
  auto save = [&](std::size_t step) {
    if (!outputs.checkpoint) return;
    write_checkpoint(*outputs.checkpoint, make_checkpoint(result.params, checkpoint_meta(step)));
    save_optimizer(*outputs.checkpoint, params, adam);
  };
  auto run_eval = [&](std::size_t step) {
    if (!outputs.evaluator) return;
    const double rate = outputs.evaluator(result.params);
    result.evals.emplace_back(step, rate);
    emit(json{{"type", "eval"}, {"step", step}, {"solve_rate", rate}});
    if (outputs.verbose) std::fprintf(stderr, "step %zu  solve_rate %.4f\n", step, rate);
  };

  const std::size_t steps = std::min(config.total_steps, config.max_steps.value_or(config.total_steps));
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order;
  std::vector<std::size_t> indices(config.batch_size), epochs(config.batch_size);
  BasicTape<float> tape;
  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t j = 0; j < config.batch_size; ++j) {
      const std::size_t g = step * config.batch_size + j;
      epochs[j] = g / data.size;
      if (epochs[j] != cached_epoch) {
        order = epoch_order(config.seed, epochs[j], data.size);
        cached_epoch = epochs[j];
      }
      indices[j] = order[g % data.size];
    }
    const AugmentedBatch batch = training_batch(config, model_config, data, indices, epochs);

    tape.reset();
    result.params.zero_grad();
    const auto out = forward(tape, result.params, batch);
    LossBreakdown<float> loss =
        config.method == Method::MultiTokenBaseline
            ? baseline_mtp_loss(tape, out.logits, out.head_logits, batch, a)
            : combined_loss(tape, out.logits, batch, a);

    StepMetrics m;
    m.step = step;
    m.l_ntp = loss.l_ntp.item();
    m.l_reg = loss.l_reg.item();
    m.l_total = loss.l_total.item();
    m.a = a;
    m.lr = lr_at(step, config);
    m.tokens = batch.real_tokens();
    m.register_tokens = batch.register_count();

    std::string failure;
    if (!std::isfinite(m.l_total)) {
      failure = "non-finite loss";
    } else {
      tape.backward(loss.l_total);
      m.grad_norm = grad_norm(params);
      if (config.grad_clip > 0.0) clip_grad_norm(params, config.grad_clip);
      try {
        adamw_step(params, adam, m.lr, adam_cfg);
      } catch (const NonFiniteGradient& e) {
        failure = e.what();
      }
    }
    if (!failure.empty()) {
      result.aborted = true;
      result.abort_reason = failure;
      emit(json{{"type", "abort"}, {"step", step}, {"reason", failure}});
      if (outputs.verbose) std::fprintf(stderr, "aborted at step %zu: %s\n", step, failure.c_str());
      break;
    }

    result.tokens += m.tokens;
    result.history.push_back(m);
    result.steps_done = step + 1;
    emit(json{{"type", "step"},
              {"step", m.step},
              {"l_ntp", m.l_ntp},
              {"l_reg", m.l_reg},
              {"l_total", m.l_total},
              {"a", m.a},
              {"lr", m.lr},
              {"grad_norm", m.grad_norm},
              {"tokens", m.tokens},
              {"register_tokens", m.register_tokens}});
    if (outputs.verbose && (step % 50 == 0 || step + 1 == steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "step %zu  l_ntp %.4f  l_reg %.4f  l_total %.4f  lr %.2e  %.0f tok/s\n", step,
                   m.l_ntp, m.l_reg, m.l_total, m.lr, double(result.tokens) / std::max(secs, 1e-9));
    }
    if (config.checkpoint_every && result.steps_done % config.checkpoint_every == 0 &&
        result.steps_done != steps) {
      save(result.steps_done);
    }
    if (config.eval_every && result.steps_done % config.eval_every == 0 && result.steps_done != steps) {
      run_eval(result.steps_done);
    }
  }
  if (!result.aborted) {
    save(result.steps_done);
    run_eval(result.steps_done);
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

EvalReport evaluate(const ModelParams<float>& params, std::span<const EvalExample> examples,
                    const EvalOptions& options) {
  if (options.batch_size == 0) throw ConfigError("eval: batch_size must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  report.total = examples.size();
  report.correct.assign(examples.size(), false);
  std::size_t matched_tokens = 0, answer_tokens = 0, generated_tokens = 0;
  for (std::size_t begin = 0; begin < examples.size(); begin += options.batch_size) {
    const std::size_t end = std::min(examples.size(), begin + options.batch_size);
    std::vector<std::vector<TokenId>> prompts;
    std::size_t longest = 0;
    for (std::size_t i = begin; i < end; ++i) {
      prompts.push_back(examples[i].prompt);
      longest = std::max(longest, examples[i].answer.size());
    }
    DecodeOptions dec;
    dec.max_new = longest;
    dec.stop_id = options.stop_id;
    dec.keep_stop = true;
    dec.bidirectional_prefix = options.bidirectional_prefix;
    auto outs = decode_greedy(params, prompts, dec);
    for (std::size_t i = begin; i < end; ++i) {
      auto& got = outs[i - begin];
      const auto& gold = examples[i].answer;
      // Greedy decoding is prefix-consistent, so truncating to this example's
      // budget equals decoding it alone with that budget.
      if (got.size() > gold.size()) got.resize(gold.size());
      generated_tokens += got.size();
      for (std::size_t t = 0; t < gold.size(); ++t) {
        if (t < got.size() && got[t] == gold[t]) ++matched_tokens;
      }
      answer_tokens += gold.size();
      if (got == gold) {
        report.correct[i] = true;
        ++report.solved;
      }
    }
  }
  report.solve_rate = report.total ? double(report.solved) / double(report.total) : 0.0;
  report.token_accuracy = answer_tokens ? double(matched_tokens) / double(answer_tokens) : 0.0;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.tokens_per_second = double(generated_tokens) / std::max(report.wall_seconds, 1e-9);
  return report;
}

std::vector<EvalExample> star_graph_eval_set(std::span<const StarGraphInstance> instances,
                                             const StarGraphVocab& vocab, std::uint64_t seed) {
  std::vector<EvalExample> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Rng rng = derive_stream({seed, kEvalStream, i});
    const RawSequence raw = serialize_star_graph(instances[i], vocab, rng);
    out.push_back({std::vector<TokenId>(raw.tokens.begin(), raw.tokens.begin() + raw.prefix_len),
                   std::vector<TokenId>(raw.tokens.begin() + raw.prefix_len, raw.tokens.end())});
  }
  return out;
}

std::vector<EvalExample> grid_eval_set(std::span<const GridInstance> instances, int pattern_vocab) {
  std::vector<EvalExample> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    const RawSequence raw = serialize_grid(inst, pattern_vocab);
    out.push_back({std::vector<TokenId>(raw.tokens.begin(), raw.tokens.begin() + raw.prefix_len),
                   std::vector<TokenId>(raw.tokens.begin() + raw.prefix_len, raw.tokens.end())});
  }
  return out;
}

RunMetrics read_metrics(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("metrics: cannot open " + path.string());
  RunMetrics run;
  run.path = path;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(is, text)) {
    ++line;
    if (text.empty()) continue;
    try {
      const json j = json::parse(text);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        have_header = true;
        run.method = j.at("method").get<std::string>();
        for (const auto& [k, v] : j.at("train").items()) run.config[k] = v.get<std::string>();
      } else if (!have_header) {
        throw ParseError("metrics: missing header line", line);
      } else if (type == "step") {
        StepMetrics m;
        m.step = j.at("step").get<std::size_t>();
        m.l_ntp = j.at("l_ntp").get<double>();
        m.l_reg = j.at("l_reg").get<double>();
        m.l_total = j.at("l_total").get<double>();
        m.a = j.at("a").get<double>();
        m.lr = j.at("lr").get<double>();
        m.grad_norm = j.value("grad_norm", 0.0);
        m.tokens = j.at("tokens").get<std::size_t>();
        m.register_tokens = j.at("register_tokens").get<std::size_t>();
        run.steps.push_back(m);
      } else if (type == "eval") {
        run.evals.emplace_back(j.at("step").get<std::size_t>(), j.at("solve_rate").get<double>());
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("metrics: ") + e.what(), line);
    }
  }
  if (!have_header) throw ParseError("metrics: missing header line in " + path.string());
  return run;
}

namespace {

// Linear interpolation of (xs, ys) at x, clamped to the end values.
double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (xs.empty()) return std::nan("");
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(v.size() - 1))};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

CompareResult compare_runs(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw ConfigError("compare: need at least one metrics file");
  CompareResult out;
  std::map<std::string, std::vector<const RunMetrics*>> groups;
  for (const auto& r : runs) groups[r.method].push_back(&r);

  std::ostringstream curves, summary;
  curves << "method,step,runs,l_ntp_mean,l_ntp_std,l_reg_mean,l_reg_std,l_total_mean,l_total_std\n";
  summary << "method,runs,steps,final_l_ntp_mean,final_l_ntp_std,final_l_reg_mean,final_l_reg_std,"
             "final_l_total_mean,final_l_total_std,solve_rate_mean,solve_rate_std\n";

  for (const auto& [method, members] : groups) {
    const RunMetrics* coarsest = members.front();
    bool mismatch = false;
    for (const RunMetrics* r : members) {
      std::vector<std::size_t> a, b;
      for (const auto& m : r->steps) a.push_back(m.step);
      for (const auto& m : coarsest->steps) b.push_back(m.step);
      if (a != b) mismatch = true;
      if (r->steps.size() < coarsest->steps.size()) coarsest = r;
    }
    if (mismatch) {
      out.warnings.push_back("method " + method + ": step grids differ; resampled onto the grid of " +
                             coarsest->path.string() + " (" + std::to_string(coarsest->steps.size()) +
                             " points)");
    }
    std::vector<double> grid;
    for (const auto& m : coarsest->steps) grid.push_back(double(m.step));

    // series[run][metric] resampled onto grid
    std::vector<std::array<std::vector<double>, 3>> series;
    for (const RunMetrics* r : members) {
      std::vector<double> xs;
      std::array<std::vector<double>, 3> ys;
      for (const auto& m : r->steps) {
        xs.push_back(double(m.step));
        ys[0].push_back(m.l_ntp);
        ys[1].push_back(m.l_reg);
        ys[2].push_back(m.l_total);
      }
      std::array<std::vector<double>, 3> res;
      for (int k = 0; k < 3; ++k) {
        for (double x : grid) res[k].push_back(interpolate(xs, ys[k], x));
      }
      series.push_back(std::move(res));
    }
    std::array<std::pair<double, double>, 3> final_stats{};
    for (std::size_t g = 0; g < grid.size(); ++g) {
      curves << method << ',' << static_cast<std::size_t>(grid[g]) << ',' << members.size();
      for (int k = 0; k < 3; ++k) {
        std::vector<double> vals;
        for (const auto& s : series) vals.push_back(s[k][g]);
        const auto ms = mean_std(vals);
        curves << ',' << fmt(ms.first) << ',' << fmt(ms.second);
        if (g + 1 == grid.size()) final_stats[k] = ms;
      }
      curves << '\n';
    }
    if (grid.empty()) {
      for (auto& f : final_stats) f = {std::nan(""), std::nan("")};
    }
    std::vector<double> rates;
    for (const RunMetrics* r : members) {
      if (!r->evals.empty()) rates.push_back(r->evals.back().second);
    }
    const auto rate = mean_std(rates);
    summary << method << ',' << members.size() << ',' << grid.size();
    for (const auto& f : final_stats) summary << ',' << fmt(f.first) << ',' << fmt(f.second);
    summary << ',' << fmt(rate.first) << ',' << fmt(rate.second) << '\n';
  }
  out.curves_csv = curves.str();
  out.summary_csv = summary.str();
  return out;
}

CompareResult compare_runs(const std::vector<std::filesystem::path>& files) {
  std::vector<RunMetrics> runs;
  for (const auto& f : files) runs.push_back(read_metrics(f));
  return compare_runs(runs);
}

}  // namespace mutor
