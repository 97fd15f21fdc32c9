#pragma once

#include <cstddef>
#include <vector>

#include "mutor/augment.h"
#include "mutor/tensor.h"

namespace mutor {

template <typename T>
struct LossBreakdown {
  BasicTensor<T> l_ntp;
  BasicTensor<T> l_reg;
  BasicTensor<T> l_total;  // (1 - a) * l_ntp + a * l_reg
  double a = 0.0;
  std::size_t ntp_positions = 0;
  std::size_t reg_positions = 0;
};

// Mean next-token cross-entropy over NtpLoss slots.
template <typename T>
BasicTensor<T> ntp_loss(BasicTape<T>& tape, const BasicTensor<T>& logits, const AugmentedBatch& batch);

// Mean cross-entropy of register slots against their offset targets.
template <typename T>
BasicTensor<T> reg_loss(BasicTape<T>& tape, const BasicTensor<T>& logits, const AugmentedBatch& batch);

// Throws ConfigError unless 0 <= a <= 1. With a == 0 the register term gets
// no gradient at all.
template <typename T>
LossBreakdown<T> combined_loss(BasicTape<T>& tape, const BasicTensor<T>& logits,
                               const AugmentedBatch& batch, double a);

// Target of extra head `head` (0-based) at a slot whose next-token target is
// live: the token head + 2 places ahead, or kIgnore past the sequence end.
std::vector<TokenId> baseline_head_targets(const AugmentedBatch& batch, std::size_t head);

// (1 - a) * next-token loss + a * mean over heads of the head losses. The
// batch must be register-free. Throws ConfigError when a > 0 without heads.
template <typename T>
LossBreakdown<T> baseline_mtp_loss(BasicTape<T>& tape, const BasicTensor<T>& trunk_logits,
                                   const std::vector<BasicTensor<T>>& head_logits,
                                   const AugmentedBatch& batch, double a);

}  // namespace mutor
