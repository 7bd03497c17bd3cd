#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, unweighted graph stored as the CSR pattern of Ã = A + I.
/// Every row holds its own self-loop; columns are sorted and unique.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const noexcept { return degrees_.size(); }
  /// Undirected non-loop edge count.
  std::size_t num_edges() const noexcept { return num_edges_; }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const std::size_t> neighbors(std::size_t i) const noexcept {
    return {col_indices_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }
  /// D̃(i,i): CSR row length including the self-loop.
  std::span<const double> degrees() const noexcept { return degrees_; }
  double degree(std::size_t i) const noexcept { return degrees_[i]; }
  double total_degree() const noexcept {
    return std::accumulate(degrees_.begin(), degrees_.end(), 0.0);
  }

  /// Non-loop edges as (i<j) pairs in CSR order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges_);
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (std::size_t j : neighbors(i))
        if (i < j) out.emplace_back(i, j);
    return out;
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  friend Graph build_graph(std::span<const Edge> edges, std::size_t n);

  std::size_t num_edges_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> degrees_;
};

/// Builds Ã from an edge list. Input self-loops and duplicates are absorbed;
/// exactly one self-loop per node is always present.
inline Graph build_graph(std::span<const Edge> edges, std::size_t n) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [i, j] : edges) {
    if (i >= n || j >= n)
      throw InvalidArgument("build_graph: edge (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for n=" + std::to_string(n));
    if (i == j) continue;
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  Graph g;
  g.row_offsets_.assign(1, 0);
  g.row_offsets_.reserve(n + 1);
  g.degrees_.resize(n);
  std::size_t directed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = adj[i];
    row.push_back(i);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.col_indices_.insert(g.col_indices_.end(), row.begin(), row.end());
    g.row_offsets_.push_back(g.col_indices_.size());
    g.degrees_[i] = static_cast<double>(row.size());
    directed += row.size() - 1;
    row = {};
  }
  g.num_edges_ = directed / 2;
  return g;
}

inline Graph build_graph(const std::vector<Edge>& edges, std::size_t n) {
  return build_graph(std::span<const Edge>(edges), n);
}

/// 2m / n², self-loops excluded.
inline double edge_density(const Graph& g) {
  const auto n = static_cast<double>(g.num_nodes());
  if (n < 1) throw InvalidArgument("edge_density: empty graph");
  return 2.0 * static_cast<double>(g.num_edges()) / (n * n);
}

/// Component id per node. Ids are assigned in order of each component's
/// smallest node index.
inline std::vector<std::size_t> connected_components(const Graph& g) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(g.num_nodes(), unset);
  std::size_t next = 0;
  std::queue<std::size_t> frontier;
  for (std::size_t s = 0; s < g.num_nodes(); ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    frontier.push(s);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : g.neighbors(u))
        if (label[v] == unset) {
          label[v] = next;
          frontier.push(v);
        }
    }
    ++next;
  }
  return label;
}

inline std::size_t component_count(const Graph& g) {
  const auto labels = connected_components(g);
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

inline bool is_connected(const Graph& g) { return component_count(g) == 1; }

enum class NormKind { RowAvg, Symmetric };

inline std::string to_string(NormKind k) { return k == NormKind::RowAvg ? "rowavg" : "symmetric"; }

/// Normalized operator sharing the CSR pattern of its graph.
///   RowAvg:    D̃⁻¹ Ã
///   Symmetric: D̃^(-1/2) Ã D̃^(-1/2)
/// Holds a copy of the pattern so it stays valid independently of the graph.
class PropagationOperator {
 public:
  PropagationOperator(const Graph& g, NormKind kind) : kind_(kind), graph_(g) {
    const auto offsets = g.row_offsets();
    const auto cols = g.col_indices();
    values_.resize(cols.size());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      const double di = g.degree(i);
      for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
        values_[p] = kind == NormKind::RowAvg ? 1.0 / di
                                              : 1.0 / std::sqrt(di * g.degree(cols[p]));
      }
    }
  }

  NormKind kind() const noexcept { return kind_; }
  const Graph& graph() const noexcept { return graph_; }
  std::size_t num_nodes() const noexcept { return graph_.num_nodes(); }
  std::span<const double> values() const noexcept { return values_; }

  DenseMatrix to_dense() const {
    const std::size_t n = num_nodes();
    DenseMatrix d(n, n);
    const auto offsets = graph_.row_offsets();
    const auto cols = graph_.col_indices();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) d(i, cols[p]) = values_[p];
    return d;
  }

 private:
  NormKind kind_;
  Graph graph_;
  std::vector<double> values_;
};

inline PropagationOperator normalize(const Graph& g, NormKind kind) { return {g, kind}; }

/// Â · x by sparse row accumulation, O((m+n)·c).
inline DenseMatrix propagate(const PropagationOperator& op, const DenseMatrix& x) {
  if (x.rows() != op.num_nodes())
    throw InvalidArgument("propagate: operator has " + std::to_string(op.num_nodes()) +
                          " nodes, input is " + shape_str(x));
  const auto offsets = op.graph().row_offsets();
  const auto cols = op.graph().col_indices();
  const auto vals = op.values();
  const std::size_t c = x.cols();
  DenseMatrix out(x.rows(), c);
  for (std::size_t i = 0; i < op.num_nodes(); ++i) {
    double* o = out.data() + i * c;
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
      const double w = vals[p];
      const double* xr = x.data() + cols[p] * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += w * xr[j];
    }
  }
  return out;
}

/// Âᵀ · x. Equal to propagate() for the symmetric operator; needed for the
/// row-averaging one in backward passes and left-eigenvector checks.
inline DenseMatrix propagate_transpose(const PropagationOperator& op, const DenseMatrix& x) {
  if (op.kind() == NormKind::Symmetric) return propagate(op, x);
  if (x.rows() != op.num_nodes())
    throw InvalidArgument("propagate_transpose: operator has " + std::to_string(op.num_nodes()) +
                          " nodes, input is " + shape_str(x));
  const auto offsets = op.graph().row_offsets();
  const auto cols = op.graph().col_indices();
  const auto vals = op.values();
  const std::size_t c = x.cols();
  DenseMatrix out(x.rows(), c);
  for (std::size_t i = 0; i < op.num_nodes(); ++i) {
    const double* xr = x.data() + i * c;
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
      const double w = vals[p];
      double* o = out.data() + cols[p] * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += w * xr[j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic graphs

enum class SynthKind { Path, Cycle, Complete, Sbm };

struct GraphSpec {
  SynthKind kind = SynthKind::Path;
  std::vector<std::size_t> sizes;  // one entry except for sbm blocks
  double p_in = 0.0;
  double p_out = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_nodes() const { return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}); }
};

/// Block id per node for an sbm spec (all zero for the other kinds).
inline std::vector<std::size_t> block_assignment(const GraphSpec& spec) {
  std::vector<std::size_t> block;
  for (std::size_t b = 0; b < spec.sizes.size(); ++b) block.insert(block.end(), spec.sizes[b], b);
  return block;
}

inline Graph synth_graph(const GraphSpec& spec) {
  const std::size_t n = spec.num_nodes();
  if (n == 0) throw InvalidArgument("synth_graph: empty graph");
  std::vector<Edge> edges;
  switch (spec.kind) {
    case SynthKind::Path:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case SynthKind::Cycle:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n > 2) edges.emplace_back(n - 1, 0);
      break;
    case SynthKind::Complete:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      break;
    case SynthKind::Sbm: {
      if (!(spec.p_in >= 0.0 && spec.p_in <= 1.0 && spec.p_out >= 0.0 && spec.p_out <= 1.0))
        throw InvalidArgument("synth_graph: sbm probabilities must lie in [0,1]");
      const auto block = block_assignment(spec);
      // one hash draw per unordered pair, keyed by the pair index
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double p = block[i] == block[j] ? spec.p_in : spec.p_out;
          const double u = to_unit(derive_seed(spec.seed, i * n + j));
          if (u < p) edges.emplace_back(i, j);
        }
      break;
    }
  }
  return build_graph(edges, n);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses "path:n", "cycle:n", "complete:n" or "sbm:s1,s2,...,p_in,p_out,seed".
inline GraphSpec parse_graph_spec(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw InvalidArgument("graph spec '" + std::string(text) + "' lacks ':'");
  const auto kind = text.substr(0, colon);
  const auto args = detail::split(text.substr(colon + 1), ',');
  GraphSpec spec;
  auto bad = [&] { return InvalidArgument("malformed graph spec '" + std::string(text) + "'"); };
  if (kind == "path" || kind == "cycle" || kind == "complete") {
    spec.kind = kind == "path" ? SynthKind::Path
                : kind == "cycle" ? SynthKind::Cycle
                                  : SynthKind::Complete;
    std::size_t n = 0;
    if (args.size() != 1 || !detail::parse_number(args[0], n)) throw bad();
    spec.sizes = {n};
  } else if (kind == "sbm") {
    if (args.size() < 4) throw bad();
    spec.kind = SynthKind::Sbm;
    for (std::size_t a = 0; a + 3 < args.size(); ++a) {
      std::size_t s = 0;
      if (!detail::parse_number(args[a], s)) throw bad();
      spec.sizes.push_back(s);
    }
    const auto tail = args.size() - 3;
    if (!detail::parse_number(args[tail], spec.p_in) ||
        !detail::parse_number(args[tail + 1], spec.p_out) ||
        !detail::parse_number(args[tail + 2], spec.seed))
      throw bad();
  } else {
    throw InvalidArgument("unknown graph kind '" + std::string(kind) + "'");
  }
  if (spec.num_nodes() == 0) throw InvalidArgument("graph spec '" + std::string(text) + "' has no nodes");
  return spec;
}

// ---------------------------------------------------------------------------
// Edge-list files: one "i j" pair per line, '#' starts a comment.

inline std::vector<Edge> read_edge_list(std::istream& in, const std::string& source = "<stream>") {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = detail::trim(v);
    if (v.empty()) continue;
    std::istringstream fields{std::string(v)};
    std::string a, b, extra;
    Edge e;
    if (!(fields >> a >> b) || (fields >> extra) || !detail::parse_number(a, e.first) ||
        !detail::parse_number(b, e.second))
      throw DataError(source + ":" + std::to_string(lineno) + ": expected 'i j', got '" +
                      std::string(v) + "'");
    edges.push_back(e);
  }
  return edges;
}

inline std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list " + path);
  return read_edge_list(in, path);
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  for (const auto& [i, j] : g.edges()) out << i << ' ' << j << '\n';
}

/// Relabels nodes: node i of g becomes perm[i].
inline Graph permute_graph(const Graph& g, std::span<const std::size_t> perm) {
  std::vector<Edge> edges;
  for (const auto& [i, j] : g.edges()) edges.emplace_back(perm[i], perm[j]);
  return build_graph(edges, g.num_nodes());
}

}  // namespace deepgnn
