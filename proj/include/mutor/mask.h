#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mutor {

using TokenId = std::int32_t;

// Target value excluded from every loss term.
inline constexpr TokenId kIgnore = -1;

// Square boolean allow-matrix: allowed(i, j) means row i may attend to
// column j.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t n) : n_(n), allow_(n * n, 0) {}

  static AttentionMask causal(std::size_t n);

  std::size_t size() const { return n_; }
  bool allowed(std::size_t row, std::size_t col) const { return allow_[row * n_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool value) { allow_[row * n_ + col] = value; }
  std::size_t row_count(std::size_t row) const;

  // Throws MaskError naming the first row with no allowed column.
  void validate() const;

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> allow_;
};

}  // namespace mutor
