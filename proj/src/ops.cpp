#include "mutor/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "mutor/kernels.h"

namespace mutor::ops {
namespace {

template <typename T>
bool any_requires_grad(std::initializer_list<const BasicTensor<T>*> ts) {
  for (const auto* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const bool track = any_requires_grad({&a, &b});
  auto out = BasicTensor<T>::zeros({m, n}, track);
  kernels::gemm(a.data().data(), b.data().data(), out.data().data(), m, k, n, false);
  if (track && tape.recording()) {
    tape.record("matmul", [a = a, b = b, out, m, k = k, n]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad()) kernels::gemm_nt(g, b.data().data(), a.grad().data(), m, n, k, true);
      if (b.requires_grad()) kernels::gemm_tn(a.data().data(), g, b.grad().data(), k, m, n, true);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> matmul_nt(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  }
  const bool track = any_requires_grad({&a, &b});
  auto out = BasicTensor<T>::zeros({m, n}, track);
  kernels::gemm_nt(a.data().data(), b.data().data(), out.data().data(), m, k, n, false);
  if (track && tape.recording()) {
    tape.record("matmul_nt", [a = a, b = b, out, m, k = k, n]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad()) kernels::gemm(g, b.data().data(), a.grad().data(), m, n, k, true);
      if (b.requires_grad()) kernels::gemm_tn(g, a.data().data(), b.grad().data(), n, m, k, true);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  }
  const bool track = any_requires_grad({&a, &b});
  auto out = BasicTensor<T>::zeros(a.shape(), track);
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (track && tape.recording()) {
    tape.record("add", [a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      for (auto* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dst = t->grad();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> linear_combination(BasicTape<T>& tape, const std::vector<BasicTensor<T>>& terms,
                                  const std::vector<T>& coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) {
    throw DimensionError("linear_combination: need one coefficient per term");
  }
  bool track = false;
  for (const auto& t : terms) {
    if (t.shape() != terms[0].shape()) throw DimensionError("linear_combination: shape mismatch");
    track = track || t.requires_grad();
  }
  auto out = BasicTensor<T>::zeros(terms[0].shape(), track);
  auto o = out.data();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    auto x = terms[t].data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += coeffs[t] * x[i];
  }
  if (track && tape.recording()) {
    tape.record("linear_combination", [terms = terms, coeffs, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      for (std::size_t t = 0; t < terms.size(); ++t) {
        if (coeffs[t] == T(0) || !terms[t].requires_grad()) continue;
        auto dst = terms[t].grad();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += coeffs[t] * g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> embedding(BasicTape<T>& tape, const BasicTensor<T>& table,
                         std::span<const TokenId> ids) {
  require_rank(table, 2, "embedding");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw InputError("embedding: id " + std::to_string(ids[i]) + " at position " +
                       std::to_string(i) + " outside table of " + std::to_string(rows) + " rows");
    }
  }
  const bool track = table.requires_grad();
  auto out = BasicTensor<T>::zeros({ids.size(), width}, track);
  auto src = table.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(src.begin() + ids[i] * width, width, dst.begin() + i * width);
  }
  if (track && tape.recording()) {
    std::vector<TokenId> idv(ids.begin(), ids.end());
    tape.record("embedding", [table = table, out, idv = std::move(idv), width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto tg = table.grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        T* row = tg.data() + idv[i] * width;
        const T* gi = g.data() + i * width;
        for (std::size_t j = 0; j < width; ++j) row[j] += gi[j];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> slice_rows(BasicTape<T>& tape, const BasicTensor<T>& x, std::size_t begin,
                          std::size_t count) {
  require_rank(x, 2, "slice_rows");
  if (begin + count > x.dim(0)) throw DimensionError("slice_rows: range past end");
  const std::size_t width = x.dim(1);
  const bool track = x.requires_grad();
  auto out = BasicTensor<T>::zeros({count, width}, track);
  std::copy_n(x.data().begin() + begin * width, count * width, out.data().begin());
  if (track && tape.recording()) {
    tape.record("slice_rows", [x = x, out, begin, width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto dst = x.grad().subspan(begin * width, g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> rmsnorm(BasicTape<T>& tape, const BasicTensor<T>& x, const BasicTensor<T>& gain,
                       T eps) {
  require_rank(x, 2, "rmsnorm");
  const std::size_t rows = x.dim(0), width = x.dim(1);
  if (gain.numel() != width) throw DimensionError("rmsnorm: gain width mismatch");
  const bool track = any_requires_grad({&x, &gain});
  auto out = BasicTensor<T>::zeros(x.shape(), track);
  auto inv = std::make_shared<std::vector<T>>(rows);
  auto xs = x.data();
  auto gs = gain.data();
  auto os = out.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const T* xr = xs.data() + i * width;
    T ss = 0;
    for (std::size_t j = 0; j < width; ++j) ss += xr[j] * xr[j];
    const T r = T(1) / std::sqrt(ss / T(width) + eps);
    (*inv)[i] = r;
    T* orow = os.data() + i * width;
    for (std::size_t j = 0; j < width; ++j) orow[j] = xr[j] * r * gs[j];
  }
  if (track && tape.recording()) {
    tape.record("rmsnorm", [x = x, gain = gain, out, inv, rows, width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xs = x.data();
      auto gs = gain.data();
      if (gain.requires_grad()) {
        auto gg = gain.grad();
        for (std::size_t i = 0; i < rows; ++i) {
          const T r = (*inv)[i];
          for (std::size_t j = 0; j < width; ++j) gg[j] += g[i * width + j] * xs[i * width + j] * r;
        }
      }
      if (x.requires_grad()) {
        auto xg = x.grad();
        for (std::size_t i = 0; i < rows; ++i) {
          const T r = (*inv)[i];
          const T* xr = xs.data() + i * width;
          const T* gr = g.data() + i * width;
          T dot = 0;
          for (std::size_t j = 0; j < width; ++j) dot += gr[j] * gs[j] * xr[j];
          const T c = r * r * r * dot / T(width);
          for (std::size_t j = 0; j < width; ++j) xg[i * width + j] += r * gs[j] * gr[j] - c * xr[j];
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  const bool track = x.requires_grad();
  auto out = BasicTensor<T>::zeros(x.shape(), track);
  auto xs = x.data();
  auto os = out.data();
  auto th = std::make_shared<std::vector<T>>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const T v = xs[i];
    (*th)[i] = std::tanh(kC * (v + kA * v * v * v));
    os[i] = T(0.5) * v * (T(1) + (*th)[i]);
  }
  if (track && tape.recording()) {
    tape.record("gelu", [x = x, out, th]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xs = x.data();
      auto xg = x.grad();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const T v = xs[i];
        const T t = (*th)[i];
        const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * kC * (T(1) + T(3) * kA * v * v);
        xg[i] += g[i] * d;
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> rope_apply(BasicTape<T>& tape, const BasicTensor<T>& x,
                          std::span<const std::int32_t> positions, double theta) {
  require_rank(x, 3, "rope_apply");
  const std::size_t n = x.dim(0), heads = x.dim(1), hd = x.dim(2);
  if (hd % 2 != 0) throw ConfigError("rope_apply: head dimension must be even, got " + std::to_string(hd));
  if (positions.size() != n) throw DimensionError("rope_apply: one position id per token required");
  const std::size_t half = hd / 2;
  auto cs = std::make_shared<std::vector<T>>(n * hd);  // cos, sin interleaved per pair
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::pow(theta, -2.0 * double(i) / double(hd));
      const double angle = double(positions[t]) * freq;
      (*cs)[t * hd + 2 * i] = T(std::cos(angle));
      (*cs)[t * hd + 2 * i + 1] = T(std::sin(angle));
    }
  }
  const bool track = x.requires_grad();
  auto out = BasicTensor<T>::zeros(x.shape(), track);
  auto xs = x.data();
  auto os = out.data();
  for (std::size_t t = 0; t < n; ++t) {
    const T* c = cs->data() + t * hd;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base = (t * heads + h) * hd;
      for (std::size_t i = 0; i < half; ++i) {
        const T x0 = xs[base + 2 * i], x1 = xs[base + 2 * i + 1];
        const T co = c[2 * i], si = c[2 * i + 1];
        os[base + 2 * i] = x0 * co - x1 * si;
        os[base + 2 * i + 1] = x0 * si + x1 * co;
      }
    }
  }
  if (track && tape.recording()) {
    tape.record("rope_apply", [x = x, out, cs, n, heads, hd, half]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xg = x.grad();
      for (std::size_t t = 0; t < n; ++t) {
        const T* c = cs->data() + t * hd;
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t base = (t * heads + h) * hd;
          for (std::size_t i = 0; i < half; ++i) {
            const T g0 = g[base + 2 * i], g1 = g[base + 2 * i + 1];
            const T co = c[2 * i], si = c[2 * i + 1];
            xg[base + 2 * i] += g0 * co + g1 * si;
            xg[base + 2 * i + 1] += -g0 * si + g1 * co;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> masked_attention(BasicTape<T>& tape, const BasicTensor<T>& q,
                                const BasicTensor<T>& k, const BasicTensor<T>& v,
                                std::span<const AttentionMask> masks) {
  require_rank(q, 3, "masked_attention");
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw DimensionError("masked_attention: q/k/v shapes differ");
  }
  const std::size_t n = q.dim(0), heads = q.dim(1), hd = q.dim(2);
  const std::size_t batch = masks.size();
  if (batch == 0 || n % batch != 0) throw DimensionError("masked_attention: rows not divisible into masks");
  const std::size_t len = n / batch;
  for (const auto& m : masks) {
    if (m.size() != len) {
      throw DimensionError("masked_attention: mask of size " + std::to_string(m.size()) +
                           " for sequences of length " + std::to_string(len));
    }
    m.validate();
  }
  const std::size_t stride = heads * hd;
  const T scale = T(1) / std::sqrt(T(hd));
  const bool track = any_requires_grad({&q, &k, &v});
  auto out = BasicTensor<T>::zeros(q.shape(), track);
  auto probs = std::make_shared<std::vector<T>>(batch * heads * len * len, T(0));
  auto qs = q.data(), ks = k.data(), vs = v.data();
  auto os = out.data();
  // Per (sequence, head) the slices are packed into contiguous [len x hd]
  // blocks so the products run through the gemm kernels. Masked cells hold
  // probability 0, and a zero product leaves the kernels' running sums
  // unchanged, so visible cells see exactly the arithmetic of a sequence
  // that never contained the masked slots.
  std::vector<T> qh(len * hd), kh(len * hd), vh(len * hd), oh(len * hd), scores(len * len);
  auto pack = [&](std::span<const T> src, std::vector<T>& dst, std::size_t b, std::size_t h) {
    for (std::size_t i = 0; i < len; ++i) {
      std::copy_n(src.data() + (b * len + i) * stride + h * hd, hd, dst.data() + i * hd);
    }
  };
  for (std::size_t b = 0; b < batch; ++b) {
    const AttentionMask& mask = masks[b];
    for (std::size_t h = 0; h < heads; ++h) {
      pack(qs, qh, b, h);
      pack(ks, kh, b, h);
      pack(vs, vh, b, h);
      kernels::gemm_nt(qh.data(), kh.data(), scores.data(), len, hd, len, false);
      T* pb = probs->data() + (b * heads + h) * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const T* si = scores.data() + i * len;
        T* p = pb + i * len;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          if (mask.allowed(i, j)) mx = std::max(mx, si[j] * scale);
        }
        T sum = 0;
        for (std::size_t j = 0; j < len; ++j) {
          if (!mask.allowed(i, j)) continue;
          p[j] = std::exp(si[j] * scale - mx);
          sum += p[j];
        }
        for (std::size_t j = 0; j < len; ++j) {
          if (mask.allowed(i, j)) p[j] /= sum;
        }
      }
      kernels::gemm(pb, vh.data(), oh.data(), len, len, hd, false);
      for (std::size_t i = 0; i < len; ++i) {
        std::copy_n(oh.data() + i * hd, hd, os.data() + (b * len + i) * stride + h * hd);
      }
    }
  }
  if (track && tape.recording()) {
    std::vector<AttentionMask> mv(masks.begin(), masks.end());
    tape.record("masked_attention", [q = q, k = k, v = v, out, probs, mv = std::move(mv), batch, heads, len, hd, stride, scale]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto qs = q.data(), ks = k.data(), vs = v.data();
      std::span<T> qg, kg, vg;
      if (q.requires_grad()) qg = q.grad();
      if (k.requires_grad()) kg = k.grad();
      if (v.requires_grad()) vg = v.grad();
      std::vector<T> qh(len * hd), kh(len * hd), vh(len * hd), gh(len * hd), dh(len * hd);
      std::vector<T> dp(len * len);
      auto pack = [&](std::span<const T> src, std::vector<T>& dst, std::size_t b, std::size_t h) {
        for (std::size_t i = 0; i < len; ++i) {
          std::copy_n(src.data() + (b * len + i) * stride + h * hd, hd, dst.data() + i * hd);
        }
      };
      auto unpack_add = [&](const std::vector<T>& src, std::span<T> dst, std::size_t b, std::size_t h) {
        for (std::size_t i = 0; i < len; ++i) {
          T* d = dst.data() + (b * len + i) * stride + h * hd;
          const T* s = src.data() + i * hd;
          for (std::size_t t = 0; t < hd; ++t) d[t] += s[t];
        }
      };
      for (std::size_t b = 0; b < batch; ++b) {
        const AttentionMask& mask = mv[b];
        for (std::size_t h = 0; h < heads; ++h) {
          const T* p = probs->data() + (b * heads + h) * len * len;
          pack(std::span<const T>(g.data(), g.size()), gh, b, h);
          pack(vs, vh, b, h);
          // dP = dO V^T, then dS = P * (dP - rowsum(P * dP)) * scale.
          kernels::gemm_nt(gh.data(), vh.data(), dp.data(), len, hd, len, false);
          for (std::size_t i = 0; i < len; ++i) {
            T* di = dp.data() + i * len;
            const T* pi = p + i * len;
            T total = 0;
            for (std::size_t j = 0; j < len; ++j) {
              if (mask.allowed(i, j)) total += pi[j] * di[j];
            }
            for (std::size_t j = 0; j < len; ++j) {
              di[j] = mask.allowed(i, j) ? pi[j] * (di[j] - total) * scale : T(0);
            }
          }
          if (!qg.empty()) {
            pack(ks, kh, b, h);
            kernels::gemm(dp.data(), kh.data(), dh.data(), len, len, hd, false);
            unpack_add(dh, qg, b, h);
          }
          if (!kg.empty()) {
            pack(qs, qh, b, h);
            kernels::gemm_tn(dp.data(), qh.data(), dh.data(), len, len, hd, false);
            unpack_add(dh, kg, b, h);
          }
          if (!vg.empty()) {
            kernels::gemm_tn(p, gh.data(), dh.data(), len, len, hd, false);
            unpack_add(dh, vg, b, h);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax_cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& logits,
                                     std::span<const TokenId> targets, std::span<const T> weights) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != n || weights.size() != n) {
    throw DimensionError("softmax_cross_entropy: need one target and weight per row");
  }
  std::vector<std::size_t> rows;
  double wsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= T(0))) throw InputError("softmax_cross_entropy: negative weight at row " + std::to_string(i));
    if (targets[i] == kIgnore) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab) {
      throw InputError("softmax_cross_entropy: target " + std::to_string(targets[i]) +
                       " outside vocabulary at row " + std::to_string(i));
    }
    if (weights[i] > T(0)) {
      rows.push_back(i);
      wsum += double(weights[i]);
    }
  }
  const bool track = logits.requires_grad();
  auto out = BasicTensor<T>::scalar(T(0), track);
  if (rows.empty()) return out;

  auto lse = std::make_shared<std::vector<double>>(rows.size());
  auto ls = logits.data();
  double total = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const T* row = ls.data() + rows[r] * vocab;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < vocab; ++c) mx = std::max(mx, double(row[c]));
    double s = 0;
    for (std::size_t c = 0; c < vocab; ++c) s += std::exp(double(row[c]) - mx);
    (*lse)[r] = mx + std::log(s);
    total += double(weights[rows[r]]) * ((*lse)[r] - double(row[targets[rows[r]]]));
  }
  out.data()[0] = T(total / wsum);

  if (track && tape.recording()) {
    std::vector<TokenId> tv(targets.begin(), targets.end());
    std::vector<T> wv(weights.begin(), weights.end());
    tape.record("softmax_cross_entropy", [logits = logits, out, lse, rows = std::move(rows), tv = std::move(tv), wv = std::move(wv), wsum, vocab]() mutable {
      if (!out.has_grad()) return;
      const double upstream = double(out.grad()[0]);
      auto ls = logits.data();
      auto lg = logits.grad();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        const double scale = upstream * double(wv[i]) / wsum;
        const T* row = ls.data() + i * vocab;
        T* grow = lg.data() + i * vocab;
        for (std::size_t c = 0; c < vocab; ++c) {
          double p = std::exp(double(row[c]) - (*lse)[r]);
          if (static_cast<TokenId>(c) == tv[i]) p -= 1.0;
          grow[c] += T(scale * p);
        }
      }
    });
  }
  return out;
}

#define MUTOR_INSTANTIATE_OPS(T)                                                                   \
  template BasicTensor<T> matmul(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);     \
  template BasicTensor<T> matmul_nt(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> add(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> linear_combination(BasicTape<T>&, const std::vector<BasicTensor<T>>&,    \
                                             const std::vector<T>&);                               \
  template BasicTensor<T> embedding(BasicTape<T>&, const BasicTensor<T>&, std::span<const TokenId>); \
  template BasicTensor<T> slice_rows(BasicTape<T>&, const BasicTensor<T>&, std::size_t, std::size_t); \
  template BasicTensor<T> rmsnorm(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T); \
  template BasicTensor<T> gelu(BasicTape<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> rope_apply(BasicTape<T>&, const BasicTensor<T>&,                         \
                                     std::span<const std::int32_t>, double);                       \
  template BasicTensor<T> masked_attention(BasicTape<T>&, const BasicTensor<T>&,                   \
                                           const BasicTensor<T>&, const BasicTensor<T>&,           \
                                           std::span<const AttentionMask>);                        \
  template BasicTensor<T> softmax_cross_entropy(BasicTape<T>&, const BasicTensor<T>&,              \
                                                std::span<const TokenId>, std::span<const T>);

MUTOR_INSTANTIATE_OPS(float)
MUTOR_INSTANTIATE_OPS(double)

#undef MUTOR_INSTANTIATE_OPS

}  // namespace mutor::ops
