#include "mutor/augment.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "mutor/errors.h"

namespace mutor {

std::string to_string(OffsetMode mode) {
  switch (mode) {
    case OffsetMode::OneD: return "1d";
    case OffsetMode::TwoD: return "2d";
    case OffsetMode::StarGraph: return "stargraph";
  }
  return "?";
}

OffsetMode offset_mode_from_string(const std::string& name) {
  if (name == "1d") return OffsetMode::OneD;
  if (name == "2d") return OffsetMode::TwoD;
  if (name == "stargraph") return OffsetMode::StarGraph;
  throw ConfigError("unknown offset mode '" + name + "' (expected 1d, 2d or stargraph)");
}

void RawSequence::validate() const {
  if (prefix_len > tokens.size()) {
    throw InputError("sequence: prefix_len " + std::to_string(prefix_len) + " exceeds length " +
                     std::to_string(tokens.size()));
  }
  if (grid_width) {
    if (*grid_width == 0 || answer_len() % *grid_width != 0) {
      throw InputError("sequence: answer length " + std::to_string(answer_len()) +
                       " is not a multiple of grid width " + std::to_string(grid_width.value_or(0)));
    }
  }
}

void OffsetSpec::validate() const {
  if (min_offset < 1) throw ConfigError("offset spec: min_offset must be >= 1");
  if (!(register_density >= 0.0 && register_density <= 1.0)) {
    throw ConfigError("offset spec: register_density must lie in [0, 1]");
  }
  if (mode == OffsetMode::TwoD) {
    if (d_max_2d < 2) throw ConfigError("offset spec: d_max_2d must be >= 2");
  } else if (d_max < lowest_offset()) {
    throw ConfigError("offset spec: d_max " + std::to_string(d_max) + " below smallest offset " +
                      std::to_string(lowest_offset()));
  }
}

std::vector<Offset> admissible_offsets(const OffsetSpec& spec, std::optional<std::size_t> grid_width) {
  spec.validate();
  std::vector<Offset> out;
  if (spec.mode == OffsetMode::TwoD) {
    if (!grid_width) throw ConfigError("2d offsets need a grid width");
    for (int dh = 1; dh <= spec.d_max_2d; ++dh) {
      for (int dw = 1; dw <= spec.d_max_2d; ++dw) {
        if (dh == 1 && dw == 1) continue;
        out.push_back({rasterized_offset(dh, dw, *grid_width), std::pair{dh, dw}});
      }
    }
  } else {
    for (int d = spec.lowest_offset(); d <= spec.d_max; ++d) out.push_back({d, std::nullopt});
  }
  return out;
}

Offset sample_offset(const OffsetSpec& spec, std::optional<std::size_t> grid_width, Rng& rng) {
  spec.validate();
  if (spec.mode != OffsetMode::TwoD) {
    return {uniform_int(rng, spec.lowest_offset(), spec.d_max), std::nullopt};
  }
  if (!grid_width) throw ConfigError("2d offsets need a grid width");
  const int side = spec.d_max_2d;
  // Index into the side*side neighbourhood with cell 0, i.e. (1, 1), removed.
  const int cell = uniform_int(rng, 0, side * side - 2) + 1;
  const int dh = cell / side + 1;
  const int dw = cell % side + 1;
  return {rasterized_offset(dh, dw, *grid_width), std::pair{dh, dw}};
}

std::size_t AugmentedSequence::register_count() const {
  return static_cast<std::size_t>(std::count(kind.begin(), kind.end(), TokenKind::Register));
}

std::vector<std::size_t> insertion_slots(const RawSequence& seq) {
  std::vector<std::size_t> slots;
  for (std::size_t i = seq.prefix_len; i + 1 < seq.size(); ++i) slots.push_back(i);
  return slots;
}

namespace {

void push_regular(AugmentedSequence& out, const RawSequence& seq, std::size_t i) {
  const std::size_t t = seq.size();
  out.tokens.push_back(seq.tokens[i]);
  out.kind.push_back(TokenKind::Regular);
  out.position_ids.push_back(static_cast<std::int32_t>(i));
  out.source_index.push_back(i);
  if (i + 1 < t && i + 1 >= seq.prefix_len) {
    out.targets.push_back(seq.tokens[i + 1]);
    out.target_kind.push_back(TargetKind::NtpLoss);
  } else {
    out.targets.push_back(kIgnore);
    out.target_kind.push_back(TargetKind::NoLoss);
  }
}

AugmentedSequence empty_like(const RawSequence& seq) {
  AugmentedSequence out;
  out.prefix_len = seq.prefix_len;
  out.grid_width = seq.grid_width;
  return out;
}

}  // namespace

AugmentedSequence plain_sequence(const RawSequence& seq) {
  seq.validate();
  AugmentedSequence out = empty_like(seq);
  for (std::size_t i = 0; i < seq.size(); ++i) push_regular(out, seq, i);
  return out;
}

AugmentedSequence interleave_at(const RawSequence& seq, const Offset& offset,
                                std::span<const std::size_t> after, TokenId register_id) {
  seq.validate();
  if (offset.d < 1) throw ConfigError("interleave: offset must be >= 1, got " + std::to_string(offset.d));
  for (std::size_t j = 0; j < after.size(); ++j) {
    if (after[j] < seq.prefix_len || after[j] + 1 >= seq.size()) {
      throw InputError("interleave: index " + std::to_string(after[j]) + " is not an insertion slot");
    }
    if (j > 0 && after[j] <= after[j - 1]) throw InputError("interleave: slots must be sorted and unique");
  }
  AugmentedSequence out = empty_like(seq);
  out.offset_d = offset.d;
  out.offset_2d = offset.d2;
  const std::size_t t = seq.size();
  const std::size_t d = static_cast<std::size_t>(offset.d);
  std::size_t next = 0;
  for (std::size_t i = 0; i < t; ++i) {
    push_regular(out, seq, i);
    if (next < after.size() && after[next] == i) {
      ++next;
      out.tokens.push_back(register_id);
      out.kind.push_back(TokenKind::Register);
      out.position_ids.push_back(static_cast<std::int32_t>(i + d - 1));
      out.source_index.push_back(i);
      if (i + d < t) {
        out.targets.push_back(seq.tokens[i + d]);
        out.target_kind.push_back(TargetKind::RegLoss);
      } else {
        out.targets.push_back(kIgnore);
        out.target_kind.push_back(TargetKind::NoLoss);
      }
    }
  }
  return out;
}

AugmentedSequence interleave(const RawSequence& seq, const OffsetSpec& spec, const Offset& offset,
                             Rng& rng, TokenId register_id) {
  spec.validate();
  seq.validate();
  std::vector<std::size_t> slots = insertion_slots(seq);
  if (spec.mode == OffsetMode::TwoD && spec.skip_wrapped_2d && offset.d2 && seq.grid_width) {
    const std::size_t w = *seq.grid_width;
    const std::size_t dw = static_cast<std::size_t>(offset.d2->second);
    std::erase_if(slots, [&](std::size_t i) { return (i - seq.prefix_len) % w + dw - 1 >= w; });
  }
  if (slots.empty()) {
    AugmentedSequence out = plain_sequence(seq);
    out.offset_d = offset.d;
    out.offset_2d = offset.d2;
    out.unaugmented = true;
    return out;
  }
  const auto keep = static_cast<std::size_t>(
      std::llround(spec.register_density * static_cast<double>(slots.size())));
  if (keep < slots.size()) {
    // Partial Fisher-Yates: the first `keep` entries become a uniform subset.
    for (std::size_t j = 0; j < keep; ++j) {
      const std::size_t pick = uniform_int<std::size_t>(rng, j, slots.size() - 1);
      std::swap(slots[j], slots[pick]);
    }
    slots.resize(keep);
    std::sort(slots.begin(), slots.end());
  }
  return interleave_at(seq, offset, slots, register_id);
}

AttentionMask build_mask(const AugmentedSequence& aug, bool bidirectional_prefix) {
  const std::size_t n = aug.size();
  AttentionMask mask(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src_r = aug.source_index[r];
    const bool row_in_prefix = aug.kind[r] == TokenKind::Regular && src_r < aug.prefix_len;
    for (std::size_t c = 0; c < n; ++c) {
      bool allow = r == c;
      if (!allow && aug.kind[c] == TokenKind::Regular) {
        const std::size_t src_c = aug.source_index[c];
        allow = src_c <= src_r || (bidirectional_prefix && row_in_prefix && src_c < aug.prefix_len);
      }
      mask.set(r, c, allow);
    }
  }
  return mask;
}

RawSequence strip_registers(const AugmentedSequence& aug) {
  RawSequence out;
  out.prefix_len = aug.prefix_len;
  out.grid_width = aug.grid_width;
  for (std::size_t i = 0; i < aug.size(); ++i) {
    if (aug.kind[i] == TokenKind::Regular) out.tokens.push_back(aug.tokens[i]);
  }
  return out;
}

std::size_t AugmentedBatch::register_count() const {
  return static_cast<std::size_t>(std::count(kind.begin(), kind.end(), TokenKind::Register));
}

std::size_t AugmentedBatch::real_tokens() const {
  return std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
}

AugmentedBatch make_batch(std::span<const AugmentedSequence> seqs, TokenId pad_id,
                          bool bidirectional_prefix) {
  if (seqs.empty()) throw InputError("batch: empty sequence list");
  AugmentedBatch b;
  b.batch_size = seqs.size();
  for (const auto& s : seqs) b.seq_len = std::max(b.seq_len, s.size());
  const std::size_t len = b.seq_len;
  const std::size_t rows = b.batch_size * len;
  b.tokens.assign(rows, pad_id);
  b.kind.assign(rows, TokenKind::Regular);
  b.position_ids.assign(rows, 0);
  b.targets.assign(rows, kIgnore);
  b.target_kind.assign(rows, TargetKind::NoLoss);
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const AugmentedSequence& a = seqs[s];
    const std::size_t base = s * len;
    std::copy(a.tokens.begin(), a.tokens.end(), b.tokens.begin() + base);
    std::copy(a.kind.begin(), a.kind.end(), b.kind.begin() + base);
    std::copy(a.position_ids.begin(), a.position_ids.end(), b.position_ids.begin() + base);
    std::copy(a.targets.begin(), a.targets.end(), b.targets.begin() + base);
    std::copy(a.target_kind.begin(), a.target_kind.end(), b.target_kind.begin() + base);
    // Pads continue the position count so ids stay distinct; they are never
    // visible to real slots.
    for (std::size_t i = a.size(); i < len; ++i) {
      b.position_ids[base + i] = static_cast<std::int32_t>(i);
    }
    const AttentionMask inner = build_mask(a, bidirectional_prefix);
    AttentionMask mask(len);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a.size(); ++j) mask.set(i, j, inner.allowed(i, j));
    }
    for (std::size_t i = a.size(); i < len; ++i) mask.set(i, i, true);
    b.masks.push_back(std::move(mask));
    b.offset_d.push_back(a.offset_d);
    b.lengths.push_back(a.size());
    b.prefix_lens.push_back(a.prefix_len);
  }
  return b;
}

std::string to_jsonl(const AugmentedSequence& aug) {
  nlohmann::json j;
  j["tokens"] = aug.tokens;
  std::vector<std::string> kinds, tkinds;
  for (auto k : aug.kind) kinds.push_back(k == TokenKind::Regular ? "regular" : "register");
  for (auto k : aug.target_kind) {
    tkinds.push_back(k == TargetKind::NtpLoss ? "ntp" : k == TargetKind::RegLoss ? "reg" : "none");
  }
  j["kind"] = kinds;
  j["position_ids"] = aug.position_ids;
  j["targets"] = aug.targets;
  j["target_kind"] = tkinds;
  j["offset_d"] = aug.offset_d;
  return j.dump();
}

}  // namespace mutor
