#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mutor/augment.h"
#include "mutor/rng.h"

namespace mutor {

// n disjoint directed paths of l edges each, all leaving `start`.
struct StarGraphInstance {
  int n = 0;
  int l = 0;
  std::vector<std::pair<TokenId, TokenId>> edges;
  TokenId start = 0;
  TokenId end = 0;
  std::vector<TokenId> gold_path;  // start ... end, l + 1 nodes

  // Throws InputError when the edges do not form n disjoint length-l paths
  // from start, or gold_path is not the one leading to end.
  void validate() const;
  bool operator==(const StarGraphInstance&) const = default;
};

// Node labels 0..node_count-1 followed by the separator tokens.
struct StarGraphVocab {
  int node_count = 50;

  TokenId comma() const { return node_count; }
  TokenId bar() const { return node_count + 1; }
  TokenId equals() const { return node_count + 2; }
  TokenId eos() const { return node_count + 3; }
  std::size_t size() const { return static_cast<std::size_t>(node_count) + 4; }
  std::string token_name(TokenId id) const;
};

// Labels are drawn without replacement from [0, node_count); the end is a
// uniformly chosen leaf. Throws ConfigError when n < 2, l < 2 or the label
// space is smaller than n * l + 1.
StarGraphInstance gen_star_graph(int n, int l, int node_count, Rng& rng);

// Prefix: "u v , u v , ... u v | start end =" with the edges in shuffled
// order. Answer: the gold path followed by EOS.
RawSequence serialize_star_graph(const StarGraphInstance& inst, const StarGraphVocab& vocab,
                                 Rng& edge_shuffle_rng);

struct StarGraphPrompt {
  std::vector<std::pair<TokenId, TokenId>> edges;
  TokenId start = 0;
  TokenId end = 0;
};

// Inverse of the prefix layout. Throws ParseError on any deviation.
StarGraphPrompt parse_star_graph_prefix(std::span<const TokenId> prefix, const StarGraphVocab& vocab);

// Conditional tables of a 2-D Markov texture, one set per class label.
// Cell (0,0) is drawn from `start`, the rest of row 0 from `left[c][x]`,
// the rest of column 0 from `up[c][y]`, interior cells from
// `both[c][x * v + y]` where x is the left and y the upper neighbour.
struct GridProcess {
  int pattern_vocab = 8;
  int num_classes = 4;
  std::uint64_t table_seed = 0;
  std::vector<std::vector<double>> start;
  std::vector<std::vector<std::vector<double>>> left, up, both;

  static GridProcess make(int pattern_vocab, int num_classes, std::uint64_t table_seed);
};

inline constexpr std::uint64_t kDefaultGridTableSeed = 0x6d75746f72677264ULL;

struct GridInstance {
  int h = 0;
  int w = 0;
  int class_label = 0;
  std::vector<TokenId> grid;  // raster order, h * w cells

  bool operator==(const GridInstance&) const = default;
};

// Throws ConfigError when h or w is below 4.
GridInstance gen_grid(int h, int w, const GridProcess& process, Rng& rng);
GridInstance gen_grid(int h, int w, int pattern_vocab, Rng& rng);

// Cells use ids 0..pattern_vocab-1; the class token pattern_vocab + label
// forms the one-token prefix.
RawSequence serialize_grid(const GridInstance& inst, int pattern_vocab);
inline std::size_t grid_vocab_size(int pattern_vocab, int num_classes) {
  return static_cast<std::size_t>(pattern_vocab + num_classes);
}

// First line of every dataset file.
struct DatasetHeader {
  std::string kind;  // "stargraph" or "grid"
  std::uint64_t seed = 0;
  std::size_t count = 0;
  int n = 0, l = 0, node_count = 0;
  int h = 0, w = 0, pattern_vocab = 0, num_classes = 0;
  std::uint64_t table_seed = 0;

  bool operator==(const DatasetHeader&) const = default;
};

// Per-instance streams keyed by (seed, index), so any instance can be
// regenerated alone.
StarGraphInstance star_graph_at(const DatasetHeader& header, std::size_t index);
GridInstance grid_at(const DatasetHeader& header, const GridProcess& process, std::size_t index);

// Writes header + `count` generated instances line by line.
void generate_dataset(const std::filesystem::path& path, const DatasetHeader& header);

class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, const DatasetHeader& header);
  void write(const StarGraphInstance& inst);
  void write(const GridInstance& inst);
  // Flushes and moves the file into place. Called by the destructor too.
  void close();
  ~DatasetWriter();

 private:
  std::filesystem::path path_, tmp_;
  std::ofstream os_;
  bool open_ = false;
};

// Reads one instance per call; memory use does not grow with file size.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);
  const DatasetHeader& header() const { return header_; }
  std::optional<StarGraphInstance> next_star_graph();
  std::optional<GridInstance> next_grid();
  std::size_t line() const { return line_; }

 private:
  bool next_line(std::string& out);
  std::ifstream is_;
  DatasetHeader header_;
  std::size_t line_ = 0;
};

std::vector<StarGraphInstance> read_star_graphs(const std::filesystem::path& path,
                                                DatasetHeader* header = nullptr);
std::vector<GridInstance> read_grids(const std::filesystem::path& path,
                                     DatasetHeader* header = nullptr);

// One token name per line, line k naming id k.
void write_vocab(const std::filesystem::path& path, const std::vector<std::string>& names);
std::vector<std::string> star_graph_token_names(const StarGraphVocab& vocab);

}  // namespace mutor
