#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/graph.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

// On-disk dataset layout (one directory per dataset):
//   edges.txt      "i j" per line, '#' comments
//   features.csv   n rows of d comma-separated doubles, no header
//   labels.txt     one class id per line
//   train.txt, val.txt, test.txt   optional fixed split, one node id per line
//   meta.json      {"name": ..., "n": ..., "m": ..., "c": ..., "d": ...}
//                  (only "name" is required; present counts are verified)

struct NodeSplit {
  std::vector<std::size_t> train, val, test;
  friend bool operator==(const NodeSplit&, const NodeSplit&) = default;
};

struct DatasetBundle {
  std::string name;
  Graph graph;
  DenseMatrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::optional<NodeSplit> fixed_split;

  std::size_t num_nodes() const noexcept { return graph.num_nodes(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
};

/// Checks label range, feature row count and that every class is populated.
inline void validate_bundle(const DatasetBundle& b) {
  const std::size_t n = b.graph.num_nodes();
  if (b.features.rows() != n)
    throw DataError(b.name + ": " + std::to_string(b.features.rows()) + " feature rows for " +
                    std::to_string(n) + " nodes");
  if (b.labels.size() != n)
    throw DataError(b.name + ": " + std::to_string(b.labels.size()) + " labels for " +
                    std::to_string(n) + " nodes");
  std::vector<std::size_t> count(b.num_classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = b.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= b.num_classes)
      throw DataError(b.name + ": label " + std::to_string(y) + " of node " + std::to_string(i) +
                      " outside [0," + std::to_string(b.num_classes) + ")");
    ++count[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < count.size(); ++k)
    if (count[k] == 0) throw DataError(b.name + ": class " + std::to_string(k) + " has no nodes");
  if (b.fixed_split) {
    for (const auto* ids : {&b.fixed_split->train, &b.fixed_split->val, &b.fixed_split->test})
      for (std::size_t i : *ids)
        if (i >= n) throw DataError(b.name + ": split node id " + std::to_string(i) + " out of range");
  }
}

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

inline std::vector<std::size_t> read_id_list(const std::filesystem::path& p) {
  auto in = open_input(p);
  std::vector<std::size_t> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto v = trim(line);
    if (v.empty() || v.front() == '#') continue;
    std::size_t id = 0;
    if (!parse_number(v, id))
      throw DataError(p.string() + ":" + std::to_string(lineno) + ": bad integer '" + std::string(v) + "'");
    ids.push_back(id);
  }
  return ids;
}

inline DenseMatrix read_feature_csv(const std::filesystem::path& p) {
  auto in = open_input(p);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto v = trim(line);
    if (v.empty()) continue;
    std::size_t fields = 0;
    for (auto f : split(v, ',')) {
      double x = 0.0;
      if (!parse_number(f, x))
        throw DataError(p.string() + ":" + std::to_string(rows + 1) + ": bad value '" +
                        std::string(trim(f)) + "'");
      values.push_back(x);
      ++fields;
    }
    if (rows == 0) cols = fields;
    if (fields != cols)
      throw DataError(p.string() + ":" + std::to_string(rows + 1) + ": expected " +
                      std::to_string(cols) + " columns, got " + std::to_string(fields));
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(values));
}

/// Shortest round-trip decimal form, locale independent.
inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace detail

inline DatasetBundle load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  DatasetBundle b;
  nlohmann::json meta = nlohmann::json::object();
  if (std::filesystem::exists(dir / "meta.json")) {
    auto in = detail::open_input(dir / "meta.json");
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError((dir / "meta.json").string() + ": " + e.what());
    }
  }
  b.name = meta.value("name", dir.filename().string());

  b.features = detail::read_feature_csv(dir / "features.csv");
  for (std::size_t id : detail::read_id_list(dir / "labels.txt")) b.labels.push_back(static_cast<int>(id));
  const std::size_t n = b.labels.size();
  b.graph = [&] {
    try {
      return build_graph(read_edge_list((dir / "edges.txt").string()), n);
    } catch (const InvalidArgument& e) {
      throw DataError((dir / "edges.txt").string() + ": " + e.what());
    }
  }();
  b.num_classes =
      n == 0 ? 0 : static_cast<std::size_t>(*std::max_element(b.labels.begin(), b.labels.end()) + 1);

  if (std::filesystem::exists(dir / "train.txt")) {
    NodeSplit s;
    s.train = detail::read_id_list(dir / "train.txt");
    if (std::filesystem::exists(dir / "val.txt")) s.val = detail::read_id_list(dir / "val.txt");
    if (std::filesystem::exists(dir / "test.txt")) s.test = detail::read_id_list(dir / "test.txt");
    b.fixed_split = std::move(s);
  }

  std::ostringstream mismatch;
  auto check = [&](const char* key, std::size_t actual) {
    if (meta.contains(key) && meta[key].get<std::size_t>() != actual)
      mismatch << " " << key << " (meta " << meta[key].get<std::size_t>() << ", found " << actual << ")";
  };
  check("n", n);
  check("m", b.graph.num_edges());
  check("c", b.num_classes);
  check("d", b.features.cols());
  if (!mismatch.str().empty()) throw DataError(b.name + ": statistics differ from meta.json:" + mismatch.str());
  validate_bundle(b);
  return b;
}

inline void save_dataset(const DatasetBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "edges.txt");
    write_edge_list(out, b.graph);
  }
  {
    auto out = detail::open_output(dir / "features.csv");
    std::string line;
    for (std::size_t i = 0; i < b.features.rows(); ++i) {
      line.clear();
      const auto r = b.features.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (j) line += ',';
        detail::append_double(line, r[j]);
      }
      line += '\n';
      out << line;
    }
  }
  {
    auto out = detail::open_output(dir / "labels.txt");
    for (int y : b.labels) out << y << '\n';
  }
  if (b.fixed_split) {
    const std::pair<const char*, const std::vector<std::size_t>*> files[] = {
        {"train.txt", &b.fixed_split->train}, {"val.txt", &b.fixed_split->val}, {"test.txt", &b.fixed_split->test}};
    for (const auto& [file, ids] : files) {
      auto out = detail::open_output(dir / file);
      for (std::size_t i : *ids) out << i << '\n';
    }
  }
  nlohmann::json meta = {{"name", b.name},
                         {"n", b.num_nodes()},
                         {"m", b.graph.num_edges()},
                         {"c", b.num_classes},
                         {"d", b.feature_dim()}};
  auto out = detail::open_output(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

/// Induced subgraph on the largest connected component (ties go to the
/// component containing the smallest node id), with contiguous relabeling.
inline DatasetBundle largest_connected_component(const DatasetBundle& b) {
  const auto labels = connected_components(b.graph);
  const std::size_t n = b.num_nodes();
  if (n == 0) return b;
  std::vector<std::size_t> size(*std::max_element(labels.begin(), labels.end()) + 1, 0);
  for (std::size_t l : labels) ++size[l];
  const std::size_t keep = static_cast<std::size_t>(std::max_element(size.begin(), size.end()) - size.begin());

  constexpr auto dropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(n, dropped);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] == keep) remap[i] = next++;

  DatasetBundle out;
  out.name = b.name;
  out.num_classes = b.num_classes;
  std::vector<Edge> edges;
  for (const auto& [i, j] : b.graph.edges())
    if (remap[i] != dropped && remap[j] != dropped) edges.emplace_back(remap[i], remap[j]);
  out.graph = build_graph(edges, next);
  out.features = DenseMatrix(next, b.features.cols());
  out.labels.resize(next);
  for (std::size_t i = 0; i < n; ++i) {
    if (remap[i] == dropped) continue;
    std::copy_n(b.features.row(i).begin(), b.features.cols(), out.features.row(remap[i]).begin());
    out.labels[remap[i]] = b.labels[i];
  }
  if (b.fixed_split) {
    auto filter = [&](const std::vector<std::size_t>& ids) {
      std::vector<std::size_t> kept;
      for (std::size_t i : ids)
        if (remap[i] != dropped) kept.push_back(remap[i]);
      return kept;
    };
    out.fixed_split = NodeSplit{filter(b.fixed_split->train), filter(b.fixed_split->val),
                                filter(b.fixed_split->test)};
  }
  return out;
}

/// Rows scaled to unit L1 norm; all-zero rows are left untouched.
inline DenseMatrix row_normalize(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double s = 0.0;
    for (double v : r) s += std::abs(v);
    if (s > 0.0)
      for (double& v : r) v /= s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV export

inline void export_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows,
                       const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  auto write_row = [&](const std::vector<std::string>& r) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
    out << '\n';
  };
  write_row(header);
  for (const auto& r : rows) write_row(r);
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::string format_double(double v) {
  std::string s;
  detail::append_double(s, v);
  return s;
}

/// Header "node_id,x0,…,x{d−1}" then one line per requested node.
inline void export_embeddings(const DenseMatrix& x, std::span<const std::size_t> ids,
                              const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  std::string line = "node_id";
  for (std::size_t j = 0; j < x.cols(); ++j) line += ",x" + std::to_string(j);
  out << line << '\n';
  for (std::size_t i : ids) {
    if (i >= x.rows()) throw InvalidArgument("export_embeddings: node id out of range");
    line = std::to_string(i);
    for (double v : x.row(i)) {
      line += ',';
      detail::append_double(line, v);
    }
    out << line << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

struct EmbeddingTable {
  std::vector<std::size_t> ids;
  DenseMatrix values;
};

inline EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  const std::size_t cols = detail::split(detail::trim(line), ',').size() - 1;
  EmbeddingTable t;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    const auto fields = detail::split(detail::trim(line), ',');
    if (fields.size() != cols + 1) throw DataError(path.string() + ": ragged row");
    std::size_t id = 0;
    if (!detail::parse_number(fields[0], id)) throw DataError(path.string() + ": bad node id");
    t.ids.push_back(id);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double v = 0.0;
      if (!detail::parse_number(fields[j], v)) throw DataError(path.string() + ": bad value");
      vals.push_back(v);
    }
  }
  t.values = DenseMatrix(t.ids.size(), cols, std::move(vals));
  return t;
}

// ---------------------------------------------------------------------------
// Synthetic citation-style data

/// Contextual stochastic block model: an sbm graph with one block per class
/// and sparse binary bag-of-words features. Each node draws `words_per_node`
/// tokens; with probability `signal` a token comes from its class's topic
/// vocabulary, otherwise from the whole vocabulary.
struct SyntheticCitationSpec {
  std::size_t classes = 7;
  std::size_t nodes_per_class = 150;
  double p_in = 0.02;
  double p_out = 0.001;
  std::size_t feature_dim = 500;
  std::size_t words_per_node = 12;
  double signal = 0.35;
  std::size_t train_per_class = 20;
  std::size_t val_size = 300;
  std::size_t test_size = 500;
  std::uint64_t seed = 0;
};

inline DatasetBundle synth_citation(const SyntheticCitationSpec& s) {
  if (s.classes == 0 || s.nodes_per_class == 0 || s.feature_dim < s.classes)
    throw InvalidArgument("synth_citation: degenerate spec");
  GraphSpec gs;
  gs.kind = SynthKind::Sbm;
  gs.sizes.assign(s.classes, s.nodes_per_class);
  gs.p_in = s.p_in;
  gs.p_out = s.p_out;
  gs.seed = derive_seed(s.seed, 1);

  DatasetBundle b;
  b.name = "synthetic-citation";
  b.graph = synth_graph(gs);
  b.num_classes = s.classes;
  const std::size_t n = b.graph.num_nodes();
  const auto block = block_assignment(gs);
  b.labels.assign(block.begin(), block.end());

  const std::size_t topic = s.feature_dim / s.classes;
  Rng rng(derive_seed(s.seed, 2));
  b.features = DenseMatrix(n, s.feature_dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t w = 0; w < s.words_per_node; ++w) {
      const std::size_t word = rng.uniform() < s.signal ? block[i] * topic + rng.below(topic)
                                                        : rng.below(s.feature_dim);
      b.features(i, word) = 1.0;
    }

  // Fixed split: train_per_class per class, then val/test from the shuffled rest.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(s.seed, 3));
  split_rng.shuffle(order);
  NodeSplit split;
  std::vector<std::size_t> taken(s.classes, 0), rest;
  for (std::size_t i : order) {
    auto& t = taken[block[i]];
    if (t < s.train_per_class) {
      split.train.push_back(i);
      ++t;
    } else {
      rest.push_back(i);
    }
  }
  const std::size_t nv = std::min(s.val_size, rest.size());
  const std::size_t nt = std::min(s.test_size, rest.size() - nv);
  split.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(nv));
  split.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(nv),
                    rest.begin() + static_cast<std::ptrdiff_t>(nv + nt));
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  b.fixed_split = std::move(split);
  validate_bundle(b);
  return b;
}

}  // namespace deepgnn
