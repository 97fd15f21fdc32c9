#pragma once

#include <span>
#include <vector>

#include "mutor/mask.h"
#include "mutor/tensor.h"

// Differentiable primitives. Each op computes its result eagerly and, when
// any input requires a gradient and the tape is recording, appends its
// backward closure to the tape.
namespace mutor::ops {

// [m x k] * [k x n] -> [m x n]
template <typename T>
BasicTensor<T> matmul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

// [m x k] * [n x k]^T -> [m x n]
template <typename T>
BasicTensor<T> matmul_nt(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

// sum_i coeffs[i] * terms[i]; all terms share one shape. Terms with a zero
// coefficient receive no gradient at all.
template <typename T>
BasicTensor<T> linear_combination(BasicTape<T>& tape, const std::vector<BasicTensor<T>>& terms,
                                  const std::vector<T>& coeffs);

// Row gather: out[i] = table[ids[i]].
template <typename T>
BasicTensor<T> embedding(BasicTape<T>& tape, const BasicTensor<T>& table,
                         std::span<const TokenId> ids);

// Rows [begin, begin + count) of a 2-D tensor.
template <typename T>
BasicTensor<T> slice_rows(BasicTape<T>& tape, const BasicTensor<T>& x, std::size_t begin,
                          std::size_t count);

// Per-row x / rms(x) * gain over the last axis.
template <typename T>
BasicTensor<T> rmsnorm(BasicTape<T>& tape, const BasicTensor<T>& x, const BasicTensor<T>& gain,
                       T eps = T(1e-6));

// tanh-approximated GELU.
template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& x);

// Rotary embedding on x of shape [n, heads, head_dim]. Pair (2i, 2i+1) of
// token t is rotated by positions[t] * theta^(-2i/head_dim). Throws
// ConfigError for an odd head_dim.
template <typename T>
BasicTensor<T> rope_apply(BasicTape<T>& tape, const BasicTensor<T>& x,
                          std::span<const std::int32_t> positions, double theta = 10000.0);

// Scaled dot-product attention over [n, heads, head_dim] inputs. The n rows
// are split into masks.size() consecutive sequences of equal length, each
// governed by its own mask. Disallowed cells get exactly zero weight and are
// never read.
template <typename T>
BasicTensor<T> masked_attention(BasicTape<T>& tape, const BasicTensor<T>& q,
                                const BasicTensor<T>& k, const BasicTensor<T>& v,
                                std::span<const AttentionMask> masks);

// Weighted mean of -log softmax(logits[i])[targets[i]] over rows whose
// weight is positive and whose target is not kIgnore. Returns 0 (with zero
// gradient) when no row contributes.
template <typename T>
BasicTensor<T> softmax_cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& logits,
                                     std::span<const TokenId> targets, std::span<const T> weights);

}  // namespace mutor::ops
