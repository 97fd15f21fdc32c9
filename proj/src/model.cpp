#include "mutor/model.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mutor/errors.h"
#include "mutor/ops.h"

namespace mutor {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers == 0) throw ConfigError("model: n_layers must be positive");
  if (n_heads == 0 || d_head == 0) throw ConfigError("model: n_heads and d_head must be positive");
  if (d_model != n_heads * d_head) {
    throw ConfigError("model: d_model (" + std::to_string(d_model) + ") != n_heads * d_head (" +
                      std::to_string(n_heads * d_head) + ")");
  }
  if (d_head % 2 != 0) throw ConfigError("model: d_head must be even for rotary embeddings");
  if (vocab_size == 0) throw ConfigError("model: vocab_size must be positive");
  if (mlp_ratio == 0) throw ConfigError("model: mlp_ratio must be positive");
  if (register_embedding == RegisterEmbedding::PerOffset && d_max < 1) {
    throw ConfigError("model: per-offset register embeddings need d_max >= 1");
  }
  if (!(theta > 1.0)) throw ConfigError("model: theta must exceed 1");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"n_layers", std::to_string(n_layers)},
      {"n_heads", std::to_string(n_heads)},
      {"d_model", std::to_string(d_model)},
      {"d_head", std::to_string(d_head)},
      {"vocab_size", std::to_string(vocab_size)},
      {"mlp_ratio", std::to_string(mlp_ratio)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"theta", format_double(theta)},
      {"register_embedding", register_embedding == RegisterEmbedding::Shared ? "shared" : "per_offset"},
      {"d_max", std::to_string(d_max)},
      {"baseline_heads", std::to_string(baseline_heads)},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("model config: missing key '") + key + "'");
    return it->second;
  };
  auto size = [&](const char* key) -> std::size_t {
    try {
      return std::stoull(get(key));
    } catch (const std::logic_error&) {
      throw ParseError(std::string("model config: bad value for '") + key + "'");
    }
  };
  ModelConfig c;
  c.n_layers = size("n_layers");
  c.n_heads = size("n_heads");
  c.d_model = size("d_model");
  c.d_head = size("d_head");
  c.vocab_size = size("vocab_size");
  c.mlp_ratio = size("mlp_ratio");
  c.max_seq_len = size("max_seq_len");
  c.theta = std::stod(get("theta"));
  const std::string& mode = get("register_embedding");
  if (mode == "shared") {
    c.register_embedding = RegisterEmbedding::Shared;
  } else if (mode == "per_offset") {
    c.register_embedding = RegisterEmbedding::PerOffset;
  } else {
    throw ParseError("model config: unknown register_embedding '" + mode + "'");
  }
  c.d_max = size("d_max");
  c.baseline_heads = size("baseline_heads");
  c.validate();
  return c;
}

ParamCount count_params(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.d_model;
  const std::size_t block = 2 * d + 4 * d * d + 2 * d * c.mlp_hidden();
  ParamCount p;
  p.register_only = c.register_rows() * d;
  p.baseline_heads = c.baseline_heads * block;
  p.total = (c.vocab_size + c.register_rows()) * d + c.n_layers * block + d + p.baseline_heads;
  return p;
}

namespace {

template <typename T>
BasicTensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return BasicTensor<T>::from(std::move(shape), std::move(v), true);
}

template <typename T>
BlockParams<T> init_block(const ModelConfig& c, Rng& rng) {
  const std::size_t d = c.d_model, hid = c.mlp_hidden();
  const double std_in = 0.02;
  const double std_out = 0.02 / std::sqrt(2.0 * double(c.n_layers));
  BlockParams<T> b;
  b.attn_norm = BasicTensor<T>::full({d}, T(1), true);
  b.wq = normal_tensor<T>({d, d}, std_in, rng);
  b.wk = normal_tensor<T>({d, d}, std_in, rng);
  b.wv = normal_tensor<T>({d, d}, std_in, rng);
  b.wo = normal_tensor<T>({d, d}, std_out, rng);
  b.mlp_norm = BasicTensor<T>::full({d}, T(1), true);
  b.w_up = normal_tensor<T>({d, hid}, std_in, rng);
  b.w_down = normal_tensor<T>({hid, d}, std_out, rng);
  return b;
}

template <typename T>
void append_block(std::vector<NamedTensor<T>>& out, const std::string& prefix, const BlockParams<T>& b) {
  out.push_back({prefix + ".attn_norm", b.attn_norm});
  out.push_back({prefix + ".wq", b.wq});
  out.push_back({prefix + ".wk", b.wk});
  out.push_back({prefix + ".wv", b.wv});
  out.push_back({prefix + ".wo", b.wo});
  out.push_back({prefix + ".mlp_norm", b.mlp_norm});
  out.push_back({prefix + ".w_up", b.w_up});
  out.push_back({prefix + ".w_down", b.w_down});
}

template <typename T>
BasicTensor<T> block_forward(BasicTape<T>& tape, const ModelConfig& c, const BlockParams<T>& b,
                             const BasicTensor<T>& x, const AugmentedBatch& batch) {
  const std::size_t n = x.dim(0);
  const Shape heads{n, c.n_heads, c.d_head};
  auto h = ops::rmsnorm(tape, x, b.attn_norm);
  auto q = ops::matmul(tape, h, b.wq).reshaped(heads);
  auto k = ops::matmul(tape, h, b.wk).reshaped(heads);
  auto v = ops::matmul(tape, h, b.wv).reshaped(heads);
  q = ops::rope_apply(tape, q, std::span<const std::int32_t>(batch.position_ids), c.theta);
  k = ops::rope_apply(tape, k, std::span<const std::int32_t>(batch.position_ids), c.theta);
  auto att = ops::masked_attention(tape, q, k, v, std::span<const AttentionMask>(batch.masks))
                 .reshaped({n, c.d_model});
  auto y = ops::add(tape, x, ops::matmul(tape, att, b.wo));
  auto h2 = ops::rmsnorm(tape, y, b.mlp_norm);
  auto up = ops::gelu(tape, ops::matmul(tape, h2, b.w_up));
  return ops::add(tape, y, ops::matmul(tape, up, b.w_down));
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p;
  p.config = config;
  p.embedding = normal_tensor<T>({config.vocab_size + config.register_rows(), config.d_model}, 0.02, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) p.blocks.push_back(init_block<T>(config, rng));
  for (std::size_t h = 0; h < config.baseline_heads; ++h) p.heads.push_back(init_block<T>(config, rng));
  p.final_norm = BasicTensor<T>::full({config.d_model}, T(1), true);
  return p;
}

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::named_parameters() const {
  std::vector<NamedTensor<T>> out;
  out.push_back({"embedding", embedding});
  for (std::size_t l = 0; l < blocks.size(); ++l) append_block(out, "block" + std::to_string(l), blocks[l]);
  for (std::size_t h = 0; h < heads.size(); ++h) append_block(out, "head" + std::to_string(h), heads[h]);
  out.push_back({"final_norm", final_norm});
  return out;
}

template <typename T>
std::span<T> ModelParams<T>::register_rows() {
  return embedding.data().subspan(config.vocab_size * config.d_model);
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& p : named_parameters()) p.tensor.zero_grad();
}

template <typename T>
ForwardOutput<T> forward(BasicTape<T>& tape, const ModelParams<T>& params, const AugmentedBatch& batch) {
  const ModelConfig& c = params.config;
  const std::size_t rows = batch.rows();
  if (batch.tokens.size() != rows || batch.masks.size() != batch.batch_size) {
    throw InputError("forward: malformed batch");
  }
  std::vector<TokenId> ids(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const TokenId tok = batch.tokens[r];
    if (batch.kind[r] == TokenKind::Register) {
      std::size_t row = c.vocab_size;
      if (c.register_embedding == RegisterEmbedding::PerOffset) {
        const int d = batch.offset_d[r / batch.seq_len];
        if (d < 1 || static_cast<std::size_t>(d) > c.d_max) {
          throw InputError("forward: offset " + std::to_string(d) + " has no register embedding row");
        }
        row += static_cast<std::size_t>(d - 1);
      }
      ids[r] = static_cast<TokenId>(row);
    } else {
      if (tok < 0 || static_cast<std::size_t>(tok) >= c.vocab_size) {
        throw InputError("forward: token id " + std::to_string(tok) + " outside vocabulary of " +
                         std::to_string(c.vocab_size));
      }
      ids[r] = tok;
    }
  }
  auto x = ops::embedding(tape, params.embedding, std::span<const TokenId>(ids));
  for (const auto& b : params.blocks) x = block_forward(tape, c, b, x, batch);
  auto unembed = ops::slice_rows(tape, params.embedding, 0, c.vocab_size);
  ForwardOutput<T> out;
  out.logits = ops::matmul_nt(tape, ops::rmsnorm(tape, x, params.final_norm), unembed);
  for (const auto& h : params.heads) {
    auto y = block_forward(tape, c, h, x, batch);
    out.head_logits.push_back(ops::matmul_nt(tape, ops::rmsnorm(tape, y, params.final_norm), unembed));
  }
  return out;
}

template <typename T>
std::vector<std::vector<TokenId>> decode_greedy(const ModelParams<T>& params,
                                                const std::vector<std::vector<TokenId>>& prompts,
                                                const DecodeOptions& options) {
  const ModelConfig& c = params.config;
  for (const auto& p : prompts) {
    if (p.empty()) throw InputError("decode: empty prompt");
    if (p.size() > c.max_seq_len) {
      throw ContextError("decode: prompt of " + std::to_string(p.size()) +
                         " tokens exceeds context of " + std::to_string(c.max_seq_len));
    }
  }
  std::vector<std::vector<TokenId>> generated(prompts.size());
  std::vector<bool> done(prompts.size(), false);
  BasicTape<T> tape(false);
  for (std::size_t step = 0; step < options.max_new; ++step) {
    std::vector<std::size_t> active;
    std::vector<AugmentedSequence> seqs;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (done[i]) continue;
      if (prompts[i].size() + generated[i].size() >= c.max_seq_len) {
        done[i] = true;
        continue;
      }
      RawSequence raw;
      raw.tokens = prompts[i];
      raw.tokens.insert(raw.tokens.end(), generated[i].begin(), generated[i].end());
      raw.prefix_len = options.bidirectional_prefix ? prompts[i].size() : 0;
      seqs.push_back(plain_sequence(raw));
      active.push_back(i);
    }
    if (active.empty()) break;
    const AugmentedBatch batch = make_batch(seqs, 0, options.bidirectional_prefix);
    const auto out = forward(tape, params, batch);
    const auto logits = out.logits.data();
    for (std::size_t s = 0; s < active.size(); ++s) {
      const std::size_t row = s * batch.seq_len + batch.lengths[s] - 1;
      const T* l = logits.data() + row * c.vocab_size;
      // Only task rows are scored, so the register sentinel cannot win.
      const auto best = static_cast<TokenId>(std::max_element(l, l + c.vocab_size) - l);
      const std::size_t i = active[s];
      if (options.stop_id && best == *options.stop_id) {
        done[i] = true;
        if (options.keep_stop) generated[i].push_back(best);
      } else {
        generated[i].push_back(best);
      }
    }
  }
  return generated;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ForwardOutput<float> forward(BasicTape<float>&, const ModelParams<float>&, const AugmentedBatch&);
template ForwardOutput<double> forward(BasicTape<double>&, const ModelParams<double>&, const AugmentedBatch&);
template std::vector<std::vector<TokenId>> decode_greedy(const ModelParams<float>&,
                                                         const std::vector<std::vector<TokenId>>&,
                                                         const DecodeOptions&);
template std::vector<std::vector<TokenId>> decode_greedy(const ModelParams<double>&,
                                                         const std::vector<std::vector<TokenId>>&,
                                                         const DecodeOptions&);

}  // namespace mutor
