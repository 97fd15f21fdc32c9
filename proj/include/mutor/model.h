#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mutor/augment.h"
#include "mutor/tensor.h"

namespace mutor {

enum class RegisterEmbedding : std::uint8_t { Shared, PerOffset };

// Pre-norm decoder: RMSNorm, RoPE multi-head attention, GELU MLP, tied
// embedding/unembedding. The embedding table holds vocab_size task rows
// followed by the register row(s); only the task rows are used as the
// output projection, so register parameters never enter a softmax.
struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 16;
  std::size_t d_head = 8;
  std::size_t vocab_size = 16;
  std::size_t mlp_ratio = 4;
  std::size_t max_seq_len = 512;
  double theta = 10000.0;
  RegisterEmbedding register_embedding = RegisterEmbedding::Shared;
  std::size_t d_max = 1;  // rows reserved in PerOffset mode
  std::size_t baseline_heads = 0;

  // Sentinel id carried by register slots in augmented sequences.
  TokenId register_id() const { return static_cast<TokenId>(vocab_size); }
  std::size_t register_rows() const {
    return register_embedding == RegisterEmbedding::Shared ? 1 : d_max;
  }
  std::size_t mlp_hidden() const { return mlp_ratio * d_model; }

  void validate() const;

  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
  bool operator==(const ModelConfig&) const = default;
};

struct ParamCount {
  std::size_t total = 0;
  std::size_t register_only = 0;
  std::size_t baseline_heads = 0;
};

ParamCount count_params(const ModelConfig& config);

template <typename T>
struct BlockParams {
  BasicTensor<T> attn_norm, wq, wk, wv, wo;
  BasicTensor<T> mlp_norm, w_up, w_down;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  BasicTensor<T> embedding;  // [(vocab_size + register_rows) x d_model]
  std::vector<BlockParams<T>> blocks;
  std::vector<BlockParams<T>> heads;  // extra-head baseline branch
  BasicTensor<T> final_norm;

  // Seeded initialisation; identical seeds give bit-identical parameters.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  // Stable names and order; shared storage with the model.
  std::vector<NamedTensor<T>> named_parameters() const;
  std::span<T> register_rows();
  void zero_grad();
};

template <typename T>
struct ForwardOutput {
  BasicTensor<T> logits;                    // [rows x vocab_size]
  std::vector<BasicTensor<T>> head_logits;  // one per baseline head
};

// Runs every slot of the batch. Register slots are looked up in the register
// row(s) (row chosen by the sequence's offset in PerOffset mode). Throws
// InputError for out-of-range token ids.
template <typename T>
ForwardOutput<T> forward(BasicTape<T>& tape, const ModelParams<T>& params,
                         const AugmentedBatch& batch);

struct DecodeOptions {
  std::size_t max_new = 16;
  std::optional<TokenId> stop_id;
  // Append the stop token to the output when it is produced.
  bool keep_stop = false;
  // Prompt tokens attend to each other bidirectionally (must match training).
  bool bidirectional_prefix = false;
};

// Greedy continuation of each prompt; prompts run as one padded batch. The
// result omits the prompt, and the stop token unless keep_stop is set.
// Registers are never inserted and never emitted. Throws ContextError when a prompt exceeds max_seq_len.
template <typename T>
std::vector<std::vector<TokenId>> decode_greedy(const ModelParams<T>& params,
                                                const std::vector<std::vector<TokenId>>& prompts,
                                                const DecodeOptions& options);

template <typename T>
std::vector<TokenId> decode_greedy(const ModelParams<T>& params, const std::vector<TokenId>& prompt,
                                   const DecodeOptions& options) {
  return decode_greedy(params, std::vector<std::vector<TokenId>>{prompt}, options).front();
}

}  // namespace mutor
