#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mutor/tensor.h"

// Binary checkpoint layout, all integers little-endian:
//
//   "MUTOR1"                      6 bytes
//   version                       u32
//   metadata count                u32
//     key length u32, key bytes, value length u32, value bytes
//   tensor count                  u32
//     name length u32, name bytes, rank u32, dims u32[rank],
//     payload f32[prod(dims)]
//
// Optimizer state goes to a sibling file with the same layout.
namespace mutor {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor<float>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

// Writes atomically: the data goes to a temporary file that replaces `path`
// only once complete.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws ParseError on bad magic, unknown version or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Sibling path for optimizer state: "<path>.optim".
std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint);

}  // namespace mutor
