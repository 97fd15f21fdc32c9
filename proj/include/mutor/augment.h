#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mutor/mask.h"
#include "mutor/rng.h"

// Register augmentation: turns raw token sequences into training sequences
// with interleaved register slots, per-slot position ids, loss targets and
// the attention mask that keeps regular tokens blind to registers.
namespace mutor {

enum class TokenKind : std::uint8_t { Regular, Register };
enum class TargetKind : std::uint8_t { NtpLoss, RegLoss, NoLoss };
enum class OffsetMode : std::uint8_t { OneD, TwoD, StarGraph };

std::string to_string(OffsetMode mode);
OffsetMode offset_mode_from_string(const std::string& name);

struct RawSequence {
  std::vector<TokenId> tokens;
  std::size_t prefix_len = 0;
  std::optional<std::size_t> grid_width;

  std::size_t size() const { return tokens.size(); }
  std::size_t answer_len() const { return tokens.size() - prefix_len; }
  // Throws InputError when prefix_len > size or the answer region is not a
  // whole number of grid rows.
  void validate() const;

  bool operator==(const RawSequence&) const = default;
};

struct OffsetSpec {
  OffsetMode mode = OffsetMode::OneD;
  int d_max = 1;
  int d_max_2d = 2;
  int min_offset = 1;  // StarGraph mode always uses 2
  double register_density = 1.0;
  // TwoD only: leave out registers whose target column would wrap past the
  // right grid edge.
  bool skip_wrapped_2d = false;

  int lowest_offset() const { return mode == OffsetMode::StarGraph ? 2 : min_offset; }
  void validate() const;
};

struct Offset {
  int d = 1;
  // Vertical and horizontal displacement, TwoD mode only. (1, 1) is the
  // token the register follows.
  std::optional<std::pair<int, int>> d2;
};

// Flat distance of a 2-D displacement on a width-w raster.
inline int rasterized_offset(int d_h, int d_w, std::size_t width) {
  return (d_h - 1) * static_cast<int>(width) + d_w - 1;
}

// Draws one offset for a whole sequence. TwoD needs the grid width and
// throws ConfigError without it.
Offset sample_offset(const OffsetSpec& spec, std::optional<std::size_t> grid_width, Rng& rng);

// Every offset sample_offset can return, in a canonical order.
std::vector<Offset> admissible_offsets(const OffsetSpec& spec, std::optional<std::size_t> grid_width);

struct AugmentedSequence {
  std::vector<TokenId> tokens;
  std::vector<TokenKind> kind;
  std::vector<std::int32_t> position_ids;
  std::vector<TokenId> targets;
  std::vector<TargetKind> target_kind;
  // Original index for regular slots; the index of the regular token the
  // register follows for register slots.
  std::vector<std::size_t> source_index;
  int offset_d = 0;
  std::optional<std::pair<int, int>> offset_2d;
  std::size_t prefix_len = 0;
  std::optional<std::size_t> grid_width;
  // Set when there was no answer region to place registers in.
  bool unaugmented = false;

  std::size_t size() const { return tokens.size(); }
  std::size_t register_count() const;
};

// Eligible insertion points: after every answer token except the last,
// given as the original index of the token the register follows.
std::vector<std::size_t> insertion_slots(const RawSequence& seq);

// Sequence without registers. Regular targets are the next token whenever
// that token lies in the answer region.
AugmentedSequence plain_sequence(const RawSequence& seq);

// Inserts one register after each listed original index (sorted, unique,
// each an eligible slot). Register after index i sits at position id
// i + d - 1 and targets tokens[i + d], or kIgnore past the end.
AugmentedSequence interleave_at(const RawSequence& seq, const Offset& offset,
                                std::span<const std::size_t> after, TokenId register_id);

// Chooses slots according to spec.register_density (all slots at 1.0,
// otherwise a uniform random subset without replacement) and interleaves.
// An empty answer region yields the plain sequence with `unaugmented` set.
AugmentedSequence interleave(const RawSequence& seq, const OffsetSpec& spec, const Offset& offset,
                             Rng& rng, TokenId register_id);

// Visibility law: every slot sees itself; regular slots see earlier regular
// slots (all prefix slots when bidirectional_prefix and both are in the
// prefix); register slots see the regular slots up to their insertion point.
// Nothing else is visible; in particular no register is seen by any other
// slot.
AttentionMask build_mask(const AugmentedSequence& aug, bool bidirectional_prefix);

RawSequence strip_registers(const AugmentedSequence& aug);

struct AugmentedBatch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  // Flattened [batch_size x seq_len] row-major.
  std::vector<TokenId> tokens;
  std::vector<TokenKind> kind;
  std::vector<std::int32_t> position_ids;
  std::vector<TokenId> targets;
  std::vector<TargetKind> target_kind;
  std::vector<AttentionMask> masks;
  std::vector<int> offset_d;
  std::vector<std::size_t> lengths;  // unpadded length per sequence
  std::vector<std::size_t> prefix_lens;

  std::size_t rows() const { return batch_size * seq_len; }
  std::size_t register_count() const;
  std::size_t real_tokens() const;
};

// Right-pads to the longest sequence. Pad cells carry pad_id, kIgnore,
// NoLoss, and mask rows that allow only themselves. Throws InputError for an
// empty list.
AugmentedBatch make_batch(std::span<const AugmentedSequence> seqs, TokenId pad_id,
                          bool bidirectional_prefix = false);

// One JSON object per line: tokens, kind, position_ids, targets,
// target_kind, offset_d.
std::string to_jsonl(const AugmentedSequence& aug);

}  // namespace mutor
