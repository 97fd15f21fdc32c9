#include "mutor/checkpoint.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mutor/errors.h"

namespace mutor {
namespace {

constexpr std::array<char, 6> kMagic{'M', 'U', 'T', 'O', 'R', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  void bytes(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw ParseError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw ParseError("checkpoint: implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  std::istream& is_;
};

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw ParseError("checkpoint: no tensor named '" + name + "'");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp.string());
    os.write(kMagic.data(), kMagic.size());
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(ckpt.metadata.size()));
    for (const auto& [k, v] : ckpt.metadata) {
      put_string(os, k);
      put_string(os, v);
    }
    put_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
      put_string(os, t.name);
      put_u32(os, static_cast<std::uint32_t>(t.tensor.rank()));
      for (std::size_t d : t.tensor.shape()) put_u32(os, static_cast<std::uint32_t>(d));
      for (float f : t.tensor.data()) put_f32(os, f);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("checkpoint: cannot open " + path.string());
  Reader r(is);
  std::array<char, 6> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw ParseError("checkpoint: bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t nmeta = r.u32();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    ckpt.metadata[k] = r.str();
  }
  const std::uint32_t ntensors = r.u32();
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw ParseError("checkpoint: implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<float> values(shape_numel(shape));
    for (auto& v : values) v = r.f32();
    ckpt.tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return ckpt;
}

std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".optim";
}

}  // namespace mutor
