#include "mutor/objectives.h"

#include <algorithm>
#include <string>

#include "mutor/errors.h"
#include "mutor/ops.h"

namespace mutor {
namespace {

template <typename T>
BasicTensor<T> masked_ce(BasicTape<T>& tape, const BasicTensor<T>& logits, const AugmentedBatch& batch,
                         TargetKind kind, std::size_t* count) {
  std::vector<T> weights(batch.rows(), T(0));
  std::size_t n = 0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    if (batch.target_kind[r] == kind && batch.targets[r] != kIgnore) {
      weights[r] = T(1);
      ++n;
    }
  }
  if (count) *count = n;
  return ops::softmax_cross_entropy(tape, logits, std::span<const TokenId>(batch.targets),
                                    std::span<const T>(weights));
}

void check_coefficient(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("loss coefficient a must lie in [0, 1], got " + std::to_string(a));
}

}  // namespace

template <typename T>
BasicTensor<T> ntp_loss(BasicTape<T>& tape, const BasicTensor<T>& logits, const AugmentedBatch& batch) {
  return masked_ce(tape, logits, batch, TargetKind::NtpLoss, nullptr);
}

template <typename T>
BasicTensor<T> reg_loss(BasicTape<T>& tape, const BasicTensor<T>& logits, const AugmentedBatch& batch) {
  return masked_ce(tape, logits, batch, TargetKind::RegLoss, nullptr);
}

template <typename T>
LossBreakdown<T> combined_loss(BasicTape<T>& tape, const BasicTensor<T>& logits,
                               const AugmentedBatch& batch, double a) {
  check_coefficient(a);
  LossBreakdown<T> out;
  out.a = a;
  out.l_ntp = masked_ce(tape, logits, batch, TargetKind::NtpLoss, &out.ntp_positions);
  out.l_reg = masked_ce(tape, logits, batch, TargetKind::RegLoss, &out.reg_positions);
  out.l_total = ops::linear_combination<T>(tape, {out.l_ntp, out.l_reg}, {T(1.0 - a), T(a)});
  return out;
}

std::vector<TokenId> baseline_head_targets(const AugmentedBatch& batch, std::size_t head) {
  std::vector<TokenId> targets(batch.rows(), kIgnore);
  const std::size_t ahead = head + 2;
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    for (std::size_t i = 0; i < batch.lengths[b]; ++i) {
      const std::size_t r = b * batch.seq_len + i;
      if (batch.target_kind[r] != TargetKind::NtpLoss) continue;
      if (i + ahead < batch.lengths[b]) targets[r] = batch.tokens[b * batch.seq_len + i + ahead];
    }
  }
  return targets;
}

template <typename T>
LossBreakdown<T> baseline_mtp_loss(BasicTape<T>& tape, const BasicTensor<T>& trunk_logits,
                                   const std::vector<BasicTensor<T>>& head_logits,
                                   const AugmentedBatch& batch, double a) {
  check_coefficient(a);
  if (head_logits.empty() && a > 0.0) {
    throw ConfigError("multi-token baseline: a > 0 requires at least one extra head");
  }
  if (batch.register_count() != 0) throw InputError("multi-token baseline: batch contains registers");
  LossBreakdown<T> out;
  out.a = a;
  out.l_ntp = masked_ce(tape, trunk_logits, batch, TargetKind::NtpLoss, &out.ntp_positions);
  if (head_logits.empty()) {
    out.l_reg = BasicTensor<T>::scalar(T(0));
    out.l_total = ops::linear_combination<T>(tape, {out.l_ntp}, {T(1)});
    return out;
  }
  std::vector<BasicTensor<T>> terms;
  for (std::size_t h = 0; h < head_logits.size(); ++h) {
    const std::vector<TokenId> targets = baseline_head_targets(batch, h);
    std::vector<T> weights(targets.size());
    for (std::size_t r = 0; r < targets.size(); ++r) {
      weights[r] = targets[r] == kIgnore ? T(0) : T(1);
      out.reg_positions += targets[r] != kIgnore;
    }
    terms.push_back(ops::softmax_cross_entropy(tape, head_logits[h], std::span<const TokenId>(targets),
                                               std::span<const T>(weights)));
  }
  out.l_reg = ops::linear_combination<T>(tape, terms, std::vector<T>(terms.size(), T(1) / T(terms.size())));
  out.l_total = ops::linear_combination<T>(tape, {out.l_ntp, out.l_reg}, {T(1.0 - a), T(a)});
  return out;
}

#define MUTOR_INSTANTIATE_OBJECTIVES(T)                                                             \
  template BasicTensor<T> ntp_loss(BasicTape<T>&, const BasicTensor<T>&, const AugmentedBatch&);    \
  template BasicTensor<T> reg_loss(BasicTape<T>&, const BasicTensor<T>&, const AugmentedBatch&);    \
  template LossBreakdown<T> combined_loss(BasicTape<T>&, const BasicTensor<T>&, const AugmentedBatch&, \
                                          double);                                                  \
  template LossBreakdown<T> baseline_mtp_loss(BasicTape<T>&, const BasicTensor<T>&,                 \
                                              const std::vector<BasicTensor<T>>&,                   \
                                              const AugmentedBatch&, double);

MUTOR_INSTANTIATE_OBJECTIVES(float)
MUTOR_INSTANTIATE_OBJECTIVES(double)

#undef MUTOR_INSTANTIATE_OBJECTIVES

}  // namespace mutor
