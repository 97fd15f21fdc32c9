#include "mutor/tasks.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"

#include "mutor/errors.h"

namespace mutor {
namespace {

using nlohmann::json;

constexpr int kDatasetVersion = 1;
constexpr std::uint64_t kStarGraphStream = 0x5354;
constexpr std::uint64_t kGridStream = 0x4752;

std::vector<double> peaked_distribution(int size, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> p(size);
  double total = 0.0;
  for (auto& x : p) {
    x = std::exp(2.5 * normal(rng));
    total += x;
  }
  for (auto& x : p) x /= total;
  return p;
}

TokenId draw(const std::vector<double>& p, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (u < p[i]) return static_cast<TokenId>(i);
    u -= p[i];
  }
  return static_cast<TokenId>(p.size() - 1);
}

}  // namespace

void StarGraphInstance::validate() const {
  auto fail = [](const std::string& why) { throw InputError("star graph: " + why); };
  if (n < 2 || l < 2) fail("need n >= 2 and l >= 2");
  if (edges.size() != static_cast<std::size_t>(n) * l) fail("expected n * l edges");
  std::map<TokenId, std::vector<TokenId>> out;
  std::map<TokenId, int> in_degree;
  for (auto [u, v] : edges) {
    out[u].push_back(v);
    ++in_degree[v];
  }
  if (in_degree.count(start)) fail("start node has an incoming edge");
  if (out[start].size() != static_cast<std::size_t>(n)) fail("start node must have n out-edges");
  std::vector<TokenId> leaves;
  std::vector<TokenId> path_to_end;
  for (TokenId first : out[start]) {
    std::vector<TokenId> path{start, first};
    TokenId cur = first;
    for (int step = 1; step < l; ++step) {
      if (in_degree[cur] != 1 || out[cur].size() != 1) fail("paths must be simple and disjoint");
      cur = out[cur][0];
      path.push_back(cur);
    }
    if (in_degree[cur] != 1 || !out[cur].empty()) fail("path does not end after l edges");
    leaves.push_back(cur);
    if (cur == end) path_to_end = path;
  }
  if (path_to_end.empty()) fail("end is not a leaf");
  if (gold_path != path_to_end) fail("gold path does not lead from start to end");
}

std::string StarGraphVocab::token_name(TokenId id) const {
  if (id >= 0 && id < node_count) return std::to_string(id);
  if (id == comma()) return ",";
  if (id == bar()) return "|";
  if (id == equals()) return "=";
  if (id == eos()) return "<eos>";
  return "<" + std::to_string(id) + ">";
}

StarGraphInstance gen_star_graph(int n, int l, int node_count, Rng& rng) {
  if (n < 2 || l < 2) throw ConfigError("star graph: need n >= 2 and l >= 2");
  const int needed = n * l + 1;
  if (node_count < needed) {
    throw ConfigError("star graph: G(" + std::to_string(n) + "," + std::to_string(l) + ") needs " +
                      std::to_string(needed) + " node labels, vocabulary has " +
                      std::to_string(node_count));
  }
  std::vector<TokenId> labels(node_count);
  std::iota(labels.begin(), labels.end(), 0);
  for (int i = 0; i < needed; ++i) {
    std::swap(labels[i], labels[uniform_int(rng, i, node_count - 1)]);
  }
  StarGraphInstance inst;
  inst.n = n;
  inst.l = l;
  inst.start = labels[0];
  for (int p = 0; p < n; ++p) {
    TokenId prev = inst.start;
    for (int s = 0; s < l; ++s) {
      const TokenId node = labels[1 + p * l + s];
      inst.edges.emplace_back(prev, node);
      prev = node;
    }
  }
  const int chosen = uniform_int(rng, 0, n - 1);
  inst.gold_path.push_back(inst.start);
  for (int s = 0; s < l; ++s) inst.gold_path.push_back(labels[1 + chosen * l + s]);
  inst.end = inst.gold_path.back();
  return inst;
}

RawSequence serialize_star_graph(const StarGraphInstance& inst, const StarGraphVocab& vocab,
                                 Rng& edge_shuffle_rng) {
  auto edges = inst.edges;
  for (std::size_t i = edges.size(); i > 1; --i) {
    std::swap(edges[i - 1], edges[uniform_int<std::size_t>(edge_shuffle_rng, 0, i - 1)]);
  }
  RawSequence seq;
  seq.tokens.reserve(edges.size() * 3 + 4 + inst.gold_path.size() + 1);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i) seq.tokens.push_back(vocab.comma());
    seq.tokens.push_back(edges[i].first);
    seq.tokens.push_back(edges[i].second);
  }
  seq.tokens.push_back(vocab.bar());
  seq.tokens.push_back(inst.start);
  seq.tokens.push_back(inst.end);
  seq.tokens.push_back(vocab.equals());
  seq.prefix_len = seq.tokens.size();
  seq.tokens.insert(seq.tokens.end(), inst.gold_path.begin(), inst.gold_path.end());
  seq.tokens.push_back(vocab.eos());
  return seq;
}

StarGraphPrompt parse_star_graph_prefix(std::span<const TokenId> prefix, const StarGraphVocab& vocab) {
  auto is_node = [&](TokenId t) { return t >= 0 && t < vocab.node_count; };
  auto expect_node = [&](std::size_t i) {
    if (i >= prefix.size() || !is_node(prefix[i])) {
      throw ParseError("star graph prefix: expected a node at position " + std::to_string(i));
    }
    return prefix[i];
  };
  StarGraphPrompt out;
  std::size_t i = 0;
  for (;;) {
    const TokenId u = expect_node(i);
    const TokenId v = expect_node(i + 1);
    out.edges.emplace_back(u, v);
    i += 2;
    if (i < prefix.size() && prefix[i] == vocab.comma()) {
      ++i;
      continue;
    }
    break;
  }
  if (i >= prefix.size() || prefix[i] != vocab.bar()) {
    throw ParseError("star graph prefix: expected '|' at position " + std::to_string(i));
  }
  out.start = expect_node(i + 1);
  out.end = expect_node(i + 2);
  if (i + 3 >= prefix.size() || prefix[i + 3] != vocab.equals() || i + 4 != prefix.size()) {
    throw ParseError("star graph prefix: expected '=' as the final token");
  }
  return out;
}

GridProcess GridProcess::make(int pattern_vocab, int num_classes, std::uint64_t table_seed) {
  if (pattern_vocab < 2 || num_classes < 1) {
    throw ConfigError("grid: need pattern_vocab >= 2 and num_classes >= 1");
  }
  GridProcess g;
  g.pattern_vocab = pattern_vocab;
  g.num_classes = num_classes;
  g.table_seed = table_seed;
  Rng rng = derive_stream({table_seed, static_cast<std::uint64_t>(pattern_vocab),
                           static_cast<std::uint64_t>(num_classes)});
  const int v = pattern_vocab;
  for (int c = 0; c < num_classes; ++c) {
    g.start.push_back(peaked_distribution(v, rng));
    g.left.emplace_back();
    g.up.emplace_back();
    g.both.emplace_back();
    for (int x = 0; x < v; ++x) g.left[c].push_back(peaked_distribution(v, rng));
    for (int y = 0; y < v; ++y) g.up[c].push_back(peaked_distribution(v, rng));
    for (int xy = 0; xy < v * v; ++xy) g.both[c].push_back(peaked_distribution(v, rng));
  }
  return g;
}

GridInstance gen_grid(int h, int w, const GridProcess& process, Rng& rng) {
  if (h < 4 || w < 4) throw ConfigError("grid: need h >= 4 and w >= 4");
  GridInstance inst;
  inst.h = h;
  inst.w = w;
  inst.class_label = uniform_int(rng, 0, process.num_classes - 1);
  const int c = inst.class_label;
  const int v = process.pattern_vocab;
  inst.grid.resize(static_cast<std::size_t>(h) * w);
  auto at = [&](int r, int col) -> TokenId& { return inst.grid[static_cast<std::size_t>(r) * w + col]; };
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      if (r == 0 && col == 0) {
        at(r, col) = draw(process.start[c], rng);
      } else if (r == 0) {
        at(r, col) = draw(process.left[c][at(r, col - 1)], rng);
      } else if (col == 0) {
        at(r, col) = draw(process.up[c][at(r - 1, col)], rng);
      } else {
        at(r, col) = draw(process.both[c][at(r, col - 1) * v + at(r - 1, col)], rng);
      }
    }
  }
  return inst;
}

GridInstance gen_grid(int h, int w, int pattern_vocab, Rng& rng) {
  return gen_grid(h, w, GridProcess::make(pattern_vocab, 4, kDefaultGridTableSeed), rng);
}

RawSequence serialize_grid(const GridInstance& inst, int pattern_vocab) {
  RawSequence seq;
  seq.tokens.push_back(pattern_vocab + inst.class_label);
  seq.tokens.insert(seq.tokens.end(), inst.grid.begin(), inst.grid.end());
  seq.prefix_len = 1;
  seq.grid_width = static_cast<std::size_t>(inst.w);
  return seq;
}

StarGraphInstance star_graph_at(const DatasetHeader& header, std::size_t index) {
  Rng rng = derive_stream({header.seed, kStarGraphStream, index});
  return gen_star_graph(header.n, header.l, header.node_count, rng);
}

GridInstance grid_at(const DatasetHeader& header, const GridProcess& process, std::size_t index) {
  Rng rng = derive_stream({header.seed, kGridStream, index});
  return gen_grid(header.h, header.w, process, rng);
}

void generate_dataset(const std::filesystem::path& path, const DatasetHeader& header) {
  DatasetWriter writer(path, header);
  if (header.kind == "stargraph") {
    for (std::size_t i = 0; i < header.count; ++i) writer.write(star_graph_at(header, i));
  } else if (header.kind == "grid") {
    const auto process = GridProcess::make(header.pattern_vocab, header.num_classes, header.table_seed);
    for (std::size_t i = 0; i < header.count; ++i) writer.write(grid_at(header, process, i));
  } else {
    throw ConfigError("dataset: unknown kind '" + header.kind + "'");
  }
  writer.close();
}

namespace {

json header_json(const DatasetHeader& h) {
  json j{{"format", "mutor-dataset"}, {"version", kDatasetVersion}, {"kind", h.kind},
         {"seed", h.seed},            {"count", h.count}};
  if (h.kind == "stargraph") {
    j["n"] = h.n;
    j["l"] = h.l;
    j["node_count"] = h.node_count;
  } else {
    j["h"] = h.h;
    j["w"] = h.w;
    j["pattern_vocab"] = h.pattern_vocab;
    j["num_classes"] = h.num_classes;
    j["table_seed"] = h.table_seed;
  }
  return j;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::filesystem::path& path, const DatasetHeader& header)
    : path_(path), tmp_(path.string() + ".tmp") {
  if (header.kind != "stargraph" && header.kind != "grid") {
    throw ConfigError("dataset: unknown kind '" + header.kind + "'");
  }
  os_.open(tmp_, std::ios::trunc);
  if (!os_) throw std::runtime_error("dataset: cannot open " + tmp_.string());
  open_ = true;
  os_ << header_json(header).dump() << '\n';
}

void DatasetWriter::write(const StarGraphInstance& inst) {
  json edges = json::array();
  for (auto [u, v] : inst.edges) edges.push_back({u, v});
  os_ << json{{"edges", edges}, {"start", inst.start}, {"end", inst.end}, {"path", inst.gold_path}}.dump()
      << '\n';
}

void DatasetWriter::write(const GridInstance& inst) {
  os_ << json{{"label", inst.class_label}, {"cells", inst.grid}}.dump() << '\n';
}

void DatasetWriter::close() {
  if (!open_) return;
  open_ = false;
  os_.close();
  if (!os_) throw std::runtime_error("dataset: write failed for " + tmp_.string());
  std::filesystem::rename(tmp_, path_);
}

DatasetWriter::~DatasetWriter() {
  try {
    close();
  } catch (...) {
  }
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : is_(path) {
  if (!is_) throw ParseError("dataset: cannot open " + path.string());
  std::string text;
  if (!next_line(text)) throw ParseError("dataset: empty file", 1);
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "mutor-dataset") throw ParseError("dataset: missing format tag", line_);
    if (j.at("version").get<int>() != kDatasetVersion) {
      throw ParseError("dataset: unsupported version", line_);
    }
    header_.kind = j.at("kind").get<std::string>();
    header_.seed = j.at("seed").get<std::uint64_t>();
    header_.count = j.at("count").get<std::size_t>();
    if (header_.kind == "stargraph") {
      header_.n = j.at("n").get<int>();
      header_.l = j.at("l").get<int>();
      header_.node_count = j.at("node_count").get<int>();
    } else if (header_.kind == "grid") {
      header_.h = j.at("h").get<int>();
      header_.w = j.at("w").get<int>();
      header_.pattern_vocab = j.at("pattern_vocab").get<int>();
      header_.num_classes = j.at("num_classes").get<int>();
      header_.table_seed = j.at("table_seed").get<std::uint64_t>();
    } else {
      throw ParseError("dataset: unknown kind '" + header_.kind + "'", line_);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset header: ") + e.what(), line_);
  }
}

bool DatasetReader::next_line(std::string& out) {
  while (std::getline(is_, out)) {
    ++line_;
    if (!out.empty()) return true;
  }
  return false;
}

std::optional<StarGraphInstance> DatasetReader::next_star_graph() {
  if (header_.kind != "stargraph") throw ParseError("dataset: file holds " + header_.kind + " instances");
  std::string text;
  if (!next_line(text)) return std::nullopt;
  try {
    const json j = json::parse(text);
    StarGraphInstance inst;
    inst.n = header_.n;
    inst.l = header_.l;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ParseError("dataset: edge must be a [u, v] pair", line_);
      inst.edges.emplace_back(e[0].get<TokenId>(), e[1].get<TokenId>());
    }
    inst.start = j.at("start").get<TokenId>();
    inst.end = j.at("end").get<TokenId>();
    inst.gold_path = j.at("path").get<std::vector<TokenId>>();
    inst.validate();
    return inst;
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset: ") + e.what(), line_);
  } catch (const InputError& e) {
    throw ParseError(std::string("dataset: ") + e.what(), line_);
  }
}

std::optional<GridInstance> DatasetReader::next_grid() {
  if (header_.kind != "grid") throw ParseError("dataset: file holds " + header_.kind + " instances");
  std::string text;
  if (!next_line(text)) return std::nullopt;
  try {
    const json j = json::parse(text);
    GridInstance inst;
    inst.h = header_.h;
    inst.w = header_.w;
    inst.class_label = j.at("label").get<int>();
    inst.grid = j.at("cells").get<std::vector<TokenId>>();
    if (inst.grid.size() != static_cast<std::size_t>(inst.h) * inst.w) {
      throw ParseError("dataset: grid has " + std::to_string(inst.grid.size()) + " cells", line_);
    }
    return inst;
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset: ") + e.what(), line_);
  }
}

std::vector<StarGraphInstance> read_star_graphs(const std::filesystem::path& path, DatasetHeader* header) {
  DatasetReader reader(path);
  if (header) *header = reader.header();
  std::vector<StarGraphInstance> out;
  out.reserve(reader.header().count);
  while (auto inst = reader.next_star_graph()) out.push_back(std::move(*inst));
  return out;
}

std::vector<GridInstance> read_grids(const std::filesystem::path& path, DatasetHeader* header) {
  DatasetReader reader(path);
  if (header) *header = reader.header();
  std::vector<GridInstance> out;
  out.reserve(reader.header().count);
  while (auto inst = reader.next_grid()) out.push_back(std::move(*inst));
  return out;
}

void write_vocab(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("vocab: cannot open " + path.string());
  for (const auto& n : names) os << n << '\n';
}

std::vector<std::string> star_graph_token_names(const StarGraphVocab& vocab) {
  std::vector<std::string> names;
  for (std::size_t id = 0; id < vocab.size(); ++id) names.push_back(vocab.token_name(static_cast<TokenId>(id)));
  return names;
}

}  // namespace mutor
