#include "mutor/mask.h"

#include <string>

#include "mutor/errors.h"

namespace mutor {

AttentionMask AttentionMask::causal(std::size_t n) {
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
  }
  return m;
}

std::size_t AttentionMask::row_count(std::size_t row) const {
  std::size_t c = 0;
  for (std::size_t j = 0; j < n_; ++j) c += allow_[row * n_ + j];
  return c;
}

void AttentionMask::validate() const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (row_count(i) == 0) throw MaskError("attention mask row " + std::to_string(i) + " allows no column");
  }
}

}  // namespace mutor
