#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "mutor/augment.h"
#include "mutor/errors.h"
#include "oracles.h"

using namespace mutor;

namespace {

constexpr TokenId kReg = 100;

RawSequence raw(std::vector<TokenId> tokens, std::size_t prefix = 0) {
  RawSequence s;
  s.tokens = std::move(tokens);
  s.prefix_len = prefix;
  return s;
}

std::vector<std::size_t> all_slots(const RawSequence& s) { return insertion_slots(s); }

}  // namespace

TEST(Interleave, FourTokensOffsetTwo) {
  auto s = raw({11, 12, 13, 14});
  auto slots = all_slots(s);
  auto aug = interleave_at(s, Offset{2, std::nullopt}, slots, kReg);
  EXPECT_EQ(aug.tokens, (std::vector<TokenId>{11, kReg, 12, kReg, 13, kReg, 14}));
  EXPECT_EQ(aug.targets[1], 13);
  EXPECT_EQ(aug.targets[3], 14);
  EXPECT_EQ(aug.targets[5], kIgnore);
  EXPECT_EQ(aug.target_kind[1], TargetKind::RegLoss);
  EXPECT_EQ(aug.target_kind[5], TargetKind::NoLoss);
  EXPECT_EQ(aug.position_ids, (std::vector<std::int32_t>{0, 1, 1, 2, 2, 3, 3}));
}

TEST(Interleave, RegisterPositionMatchesRegularPredictingSameTarget) {
  auto s = raw({1, 2, 3, 4, 5, 6});
  std::vector<std::size_t> after{1};
  auto aug = interleave_at(s, Offset{3, std::nullopt}, after, kReg);
  ASSERT_EQ(aug.kind[2], TokenKind::Register);
  EXPECT_EQ(aug.position_ids[2], 3);
  EXPECT_EQ(aug.targets[2], 5);
  // x4 sits at original index 3 and predicts x5.
  auto it = std::find(aug.tokens.begin(), aug.tokens.end(), 4);
  const auto k = static_cast<std::size_t>(it - aug.tokens.begin());
  EXPECT_EQ(aug.position_ids[k], 3);
  EXPECT_EQ(aug.targets[k], 5);
}

TEST(Interleave, OffsetOneDuplicatesNextTokenTargets) {
  auto s = raw({4, 8, 15, 16, 23, 42});
  auto aug = interleave_at(s, Offset{1, std::nullopt}, all_slots(s), kReg);
  for (std::size_t i = 0; i < aug.size(); ++i) {
    if (aug.kind[i] != TokenKind::Register) continue;
    EXPECT_EQ(aug.targets[i], aug.tokens[i + 1]);
    EXPECT_EQ(aug.targets[i], aug.targets[i - 1]);
  }
}

TEST(Interleave, RegistersOnlyInsideAnswer) {
  auto s = raw({1, 2, 3, 4, 5, 6, 7}, 3);
  EXPECT_EQ(all_slots(s), (std::vector<std::size_t>{3, 4, 5}));
  auto aug = interleave_at(s, Offset{2, std::nullopt}, all_slots(s), kReg);
  for (std::size_t i = 0; i < aug.size(); ++i) {
    if (aug.kind[i] == TokenKind::Register) {
      EXPECT_GE(aug.source_index[i], 3u);
    }
  }
  std::vector<std::size_t> bad{2};
  EXPECT_THROW(interleave_at(s, Offset{2, std::nullopt}, bad, kReg), InputError);
}

TEST(Interleave, PrefixTargetsAndLastToken) {
  auto s = raw({1, 2, 3, 4, 5}, 2);
  auto aug = plain_sequence(s);
  // Position 0 predicts a prefix token: no loss. Position 1 predicts the
  // first answer token. The final token has nothing to predict.
  EXPECT_EQ(aug.target_kind[0], TargetKind::NoLoss);
  EXPECT_EQ(aug.target_kind[1], TargetKind::NtpLoss);
  EXPECT_EQ(aug.targets[1], 3);
  EXPECT_EQ(aug.target_kind[4], TargetKind::NoLoss);
  EXPECT_EQ(aug.targets[4], kIgnore);
}

TEST(Interleave, EmptyAnswerIsFlaggedUnaugmented) {
  OffsetSpec spec;
  Rng rng(1);
  for (auto s : {raw({1, 2, 3}, 3), raw({1, 2, 3}, 2)}) {
    auto aug = interleave(s, spec, Offset{1, std::nullopt}, rng, kReg);
    EXPECT_TRUE(aug.unaugmented);
    EXPECT_EQ(aug.register_count(), 0u);
    EXPECT_EQ(strip_registers(aug), s);
  }
}

TEST(Interleave, DensitySelectsRoundedSubset) {
  OffsetSpec spec;
  spec.register_density = 0.5;
  std::mt19937_64 gen(2);
  auto s = raw(oracle::random_tokens(gen, 21, 10));
  Rng rng(3);
  auto aug = interleave(s, spec, Offset{1, std::nullopt}, rng, kReg);
  EXPECT_EQ(aug.register_count(), 10u);
  spec.register_density = 0.0;
  EXPECT_EQ(interleave(s, spec, Offset{1, std::nullopt}, rng, kReg).register_count(), 0u);
}

TEST(Interleave, DensitySlotsAreUniform) {
  OffsetSpec spec;
  spec.register_density = 0.25;
  auto s = raw(std::vector<TokenId>(9, 1));
  const int draws = 20000;
  std::vector<int> hits(8, 0);
  Rng rng(4);
  for (int k = 0; k < draws; ++k) {
    auto aug = interleave(s, spec, Offset{1, std::nullopt}, rng, kReg);
    for (std::size_t i = 0; i < aug.size(); ++i) {
      if (aug.kind[i] == TokenKind::Register) ++hits[aug.source_index[i]];
    }
  }
  const double p = 2.0 / 8.0, mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (int h : hits) EXPECT_LT(std::abs(h - mean), 4 * sd);
}

TEST(Laws, TargetAndPositionLawsOnRandomSequences) {
  std::mt19937_64 rng(5);
  Rng aug_rng(6);
  OffsetSpec spec;
  spec.d_max = 6;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t t = 1 + rng() % 40;
    auto s = raw(oracle::random_tokens(rng, t, 30), rng() % (t + 1));
    spec.register_density = (rng() % 5) / 4.0;
    const Offset off = sample_offset(spec, std::nullopt, aug_rng);
    auto aug = interleave(s, spec, off, aug_rng, kReg);
    std::size_t regular = 0;
    for (std::size_t i = 0; i < aug.size(); ++i) {
      if (aug.kind[i] == TokenKind::Regular) {
        ASSERT_EQ(aug.position_ids[i], static_cast<std::int32_t>(regular));
        ASSERT_NE(aug.tokens[i], kReg);
        const bool live = regular + 1 < t && regular + 1 >= s.prefix_len;
        ASSERT_EQ(aug.target_kind[i] == TargetKind::NtpLoss, live);
        ++regular;
        continue;
      }
      const std::size_t at = regular - 1;
      ASSERT_EQ(aug.source_index[i], at);
      ASSERT_EQ(aug.position_ids[i], static_cast<std::int32_t>(at + off.d - 1));
      if (at + off.d < t) {
        ASSERT_EQ(aug.targets[i], s.tokens[at + off.d]);
        ASSERT_NE(aug.targets[i], kReg);
      } else {
        ASSERT_EQ(aug.targets[i], kIgnore);
      }
    }
    ASSERT_EQ(strip_registers(aug), s);
  }
}

TEST(Strip, RoundTripUpToLength64) {
  std::mt19937_64 rng(7);
  Rng aug_rng(8);
  OffsetSpec spec;
  spec.d_max = 4;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t t = 1 + rng() % 64;
    auto s = raw(oracle::random_tokens(rng, t, 50), rng() % t);
    auto aug = interleave(s, spec, sample_offset(spec, std::nullopt, aug_rng), aug_rng, kReg);
    auto back = strip_registers(aug);
    ASSERT_EQ(back, s);
    ASSERT_EQ(strip_registers(plain_sequence(back)), back);
    auto plain = plain_sequence(back);
    for (std::size_t i = 0; i < plain.size(); ++i) ASSERT_EQ(plain.position_ids[i], static_cast<std::int32_t>(i));
  }
}

TEST(Mask, SmallExampleAllowedSets) {
  auto s = raw({1, 2});
  std::vector<std::size_t> after{0};
  auto aug = interleave_at(s, Offset{1, std::nullopt}, after, kReg);
  auto m = build_mask(aug, false);
  auto row = [&](std::size_t r) {
    std::vector<int> out;
    for (std::size_t c = 0; c < 3; ++c) out.push_back(m.allowed(r, c));
    return out;
  };
  EXPECT_EQ(row(0), (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(row(1), (std::vector<int>{1, 1, 0}));
  EXPECT_EQ(row(2), (std::vector<int>{1, 0, 1}));
}

TEST(Mask, NoRegistersIsCausal) {
  auto aug = plain_sequence(raw({1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(build_mask(aug, false), AttentionMask::causal(6));
}

TEST(Mask, RegisterColumnsOnlyOnDiagonal) {
  auto s = raw({1, 2, 3, 4, 5, 6, 7}, 2);
  auto aug = interleave_at(s, Offset{2, std::nullopt}, all_slots(s), kReg);
  for (bool bidir : {false, true}) {
    auto m = build_mask(aug, bidir);
    for (std::size_t c = 0; c < aug.size(); ++c) {
      if (aug.kind[c] != TokenKind::Register) continue;
      for (std::size_t r = 0; r < aug.size(); ++r) EXPECT_EQ(m.allowed(r, c), r == c);
    }
  }
}

TEST(Mask, BidirectionalPrefixOnlyAmongPrefixTokens) {
  auto s = raw({1, 2, 3, 4, 5}, 3);
  auto m = build_mask(plain_sequence(s), true);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_TRUE(m.allowed(r, c));
    EXPECT_FALSE(m.allowed(r, 3));
  }
  EXPECT_FALSE(m.allowed(3, 4));
}

// Every sequence length up to 8, every prefix length, every subset of
// insertion slots, offsets 1..4, both prefix modes.
TEST(Mask, ExhaustiveOracleEquivalence) {
  std::size_t checked = 0;
  for (std::size_t t = 1; t <= 8; ++t) {
    for (std::size_t prefix = 0; prefix <= t; ++prefix) {
      auto s = raw(std::vector<TokenId>(t, 3), prefix);
      const auto slots = all_slots(s);
      for (std::uint32_t subset = 0; subset < (1u << slots.size()); ++subset) {
        std::vector<std::size_t> after;
        for (std::size_t b = 0; b < slots.size(); ++b) {
          if (subset >> b & 1u) after.push_back(slots[b]);
        }
        for (int d = 1; d <= 4; ++d) {
          auto aug = interleave_at(s, Offset{d, std::nullopt}, after, kReg);
          for (bool bidir : {false, true}) {
            auto m = build_mask(aug, bidir);
            for (std::size_t r = 0; r < aug.size(); ++r) {
              for (std::size_t c = 0; c < aug.size(); ++c) {
                ASSERT_EQ(m.allowed(r, c), oracle::visible(aug, r, c, bidir))
                    << "t=" << t << " prefix=" << prefix << " subset=" << subset << " d=" << d << " cell " << r
                    << "," << c;
              }
            }
            ++checked;
          }
        }
      }
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(Offsets, TwoDExamples) {
  EXPECT_EQ(rasterized_offset(2, 3, 16), 18);
  EXPECT_EQ(rasterized_offset(1, 2, 16), 1);
}

TEST(Offsets, TwoDHasFifteenTargetsAndNeverOneOne) {
  OffsetSpec spec;
  spec.mode = OffsetMode::TwoD;
  spec.d_max_2d = 4;
  auto all = admissible_offsets(spec, 16);
  EXPECT_EQ(all.size(), 15u);
  std::set<std::pair<int, int>> seen;
  Rng rng(9);
  for (int k = 0; k < 10000; ++k) {
    auto o = sample_offset(spec, 16, rng);
    ASSERT_TRUE(o.d2);
    ASSERT_NE(*o.d2, (std::pair<int, int>{1, 1}));
    ASSERT_EQ(o.d, rasterized_offset(o.d2->first, o.d2->second, 16));
    seen.insert(*o.d2);
  }
  EXPECT_EQ(seen.size(), 15u);
}

TEST(Offsets, TwoDWithoutWidthIsAConfigError) {
  OffsetSpec spec;
  spec.mode = OffsetMode::TwoD;
  Rng rng(10);
  EXPECT_THROW(sample_offset(spec, std::nullopt, rng), ConfigError);
}

namespace {

void expect_uniform(const OffsetSpec& spec, std::optional<std::size_t> width, std::size_t expected_support) {
  Rng rng(11);
  const int draws = 10000;
  std::map<int, int> counts;
  for (int k = 0; k < draws; ++k) ++counts[sample_offset(spec, width, rng).d];
  ASSERT_EQ(counts.size(), expected_support);
  const double p = 1.0 / double(expected_support);
  const double mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (auto [d, c] : counts) EXPECT_LT(std::abs(c - mean), 4 * sd) << "offset " << d;
}

}  // namespace

TEST(Offsets, UniformAtFourSigma) {
  OffsetSpec one;
  one.d_max = 6;
  expect_uniform(one, std::nullopt, 6);
  OffsetSpec star;
  star.mode = OffsetMode::StarGraph;
  star.d_max = 4;
  expect_uniform(star, std::nullopt, 3);
  Rng rng(12);
  for (int k = 0; k < 1000; ++k) EXPECT_GE(sample_offset(star, std::nullopt, rng).d, 2);
  OffsetSpec two;
  two.mode = OffsetMode::TwoD;
  two.d_max_2d = 4;
  expect_uniform(two, 16, 15);
}

TEST(Offsets, InvalidSpecs) {
  OffsetSpec spec;
  spec.min_offset = 3;
  spec.d_max = 2;
  EXPECT_THROW(spec.validate(), ConfigError);
  OffsetSpec star;
  star.mode = OffsetMode::StarGraph;
  star.d_max = 1;
  EXPECT_THROW(star.validate(), ConfigError);
  OffsetSpec dens;
  dens.register_density = 1.5;
  EXPECT_THROW(dens.validate(), ConfigError);
}

TEST(TwoD, FlatTargetMatchesGridCoordinates) {
  const std::size_t h = 5, w = 6, prefix = 1;
  RawSequence s;
  s.tokens.push_back(99);
  for (std::size_t i = 0; i < h * w; ++i) s.tokens.push_back(static_cast<TokenId>(i));
  s.prefix_len = prefix;
  s.grid_width = w;
  OffsetSpec spec;
  spec.mode = OffsetMode::TwoD;
  spec.d_max_2d = 3;
  for (const auto& off : admissible_offsets(spec, w)) {
    Rng rng(13);
    auto aug = interleave(s, spec, off, rng, kReg);
    for (std::size_t i = 0; i < aug.size(); ++i) {
      if (aug.kind[i] != TokenKind::Register) continue;
      const std::size_t cell = aug.source_index[i] - prefix;
      const std::size_t row = cell / w, col = cell % w;
      const auto [dh, dw] = *off.d2;
      if (col + dw - 1 >= w) continue;
      const std::size_t trow = row + dh - 1, tcol = col + dw - 1;
      if (trow >= h) {
        EXPECT_EQ(aug.targets[i], kIgnore);
      } else {
        // Cell values equal their raster index.
        EXPECT_EQ(aug.targets[i], static_cast<TokenId>(trow * w + tcol));
      }
    }
  }
}

TEST(TwoD, SkipFlagDropsWrappedRegisters) {
  RawSequence s;
  for (int i = 0; i < 16; ++i) s.tokens.push_back(i);
  s.grid_width = 4;
  OffsetSpec spec;
  spec.mode = OffsetMode::TwoD;
  spec.skip_wrapped_2d = true;
  Offset off{rasterized_offset(2, 2, 4), std::pair{2, 2}};
  Rng rng(14);
  auto aug = interleave(s, spec, off, rng, kReg);
  for (std::size_t i = 0; i < aug.size(); ++i) {
    if (aug.kind[i] == TokenKind::Register) {
      EXPECT_NE(aug.source_index[i] % 4, 3u);
    }
  }
  EXPECT_EQ(aug.register_count(), 12u);
  spec.skip_wrapped_2d = false;
  EXPECT_EQ(interleave(s, spec, off, rng, kReg).register_count(), 15u);
}

TEST(RawSequenceValidation, GridWidthMustDivideAnswer) {
  RawSequence s = raw({1, 2, 3, 4, 5}, 1);
  s.grid_width = 3;
  EXPECT_THROW(s.validate(), InputError);
  s.grid_width = 2;
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(raw({1}, 2).validate(), InputError);
}

TEST(Batch, PaddingCells) {
  std::vector<AugmentedSequence> seqs{plain_sequence(raw({1, 2, 3, 4, 5})), plain_sequence(raw({1, 2, 3, 4, 5, 6, 7}))};
  auto b = make_batch(seqs, 0);
  EXPECT_EQ(b.seq_len, 7u);
  EXPECT_EQ(b.real_tokens(), 12u);
  for (std::size_t c = 5; c < 7; ++c) {
    EXPECT_EQ(b.target_kind[c], TargetKind::NoLoss);
    EXPECT_EQ(b.targets[c], kIgnore);
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(b.masks[0].allowed(c, j), c == j);
  }
  EXPECT_THROW(make_batch(std::span<const AugmentedSequence>{}, 0), InputError);
}

TEST(Batch, MasksMatchBuildMask) {
  auto s = raw({1, 2, 3, 4, 5, 6}, 2);
  auto aug = interleave_at(s, Offset{3, std::nullopt}, all_slots(s), kReg);
  std::vector<AugmentedSequence> seqs{aug};
  auto b = make_batch(seqs, 0, true);
  EXPECT_EQ(b.masks[0], build_mask(aug, true));
  EXPECT_EQ(b.register_count(), aug.register_count());
}

TEST(DebugDump, JsonLineCarriesAllFields) {
  auto s = raw({1, 2, 3});
  auto aug = interleave_at(s, Offset{2, std::nullopt}, all_slots(s), kReg);
  auto j = nlohmann::json::parse(to_jsonl(aug));
  EXPECT_EQ(j["tokens"].size(), aug.size());
  EXPECT_EQ(j["offset_d"], 2);
  for (const char* key : {"kind", "position_ids", "targets", "target_kind"}) EXPECT_TRUE(j.contains(key)) << key;
}
