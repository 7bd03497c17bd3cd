#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

// Normalized Euclidean distance between node representations, its per-node
// mean (SMVᵢ) and whole-graph mean (SMV_G). Zero vectors normalize to zero.

/// Exact evaluation is allowed up to this many nodes; beyond it use sampling.
inline constexpr std::size_t kExactSmoothnessCap = 5000;
inline constexpr std::size_t kMinSampledPairs = 1000;

namespace detail {

inline double inverse_norm(std::span<const double> x) {
  const double n = norm2(x);
  return n > 0.0 ? 1.0 / n : 0.0;
}

inline double normalized_distance(std::span<const double> a, double inv_a,
                                  std::span<const double> b, double inv_b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] * inv_a - b[k] * inv_b;
    s += d * d;
  }
  return 0.5 * std::sqrt(s);
}

}  // namespace detail

/// D(xᵢ, xⱼ) = ½ ‖xᵢ/‖xᵢ‖ − xⱼ/‖xⱼ‖‖, in [0,1].
inline double pair_distance(std::span<const double> xi, std::span<const double> xj) {
  if (xi.size() != xj.size())
    throw InvalidArgument("pair_distance: dimension " + std::to_string(xi.size()) + " vs " +
                          std::to_string(xj.size()));
  return detail::normalized_distance(xi, detail::inverse_norm(xi), xj, detail::inverse_norm(xj));
}

inline double node_smoothness(const DenseMatrix& x, std::size_t i) {
  const std::size_t n = x.rows();
  if (n < 2) throw InvalidArgument("node_smoothness: need at least 2 nodes");
  if (i >= n) throw InvalidArgument("node_smoothness: node " + std::to_string(i) + " out of range");
  const double inv_i = detail::inverse_norm(x.row(i));
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) sum += detail::normalized_distance(x.row(i), inv_i, x.row(j), detail::inverse_norm(x.row(j)));
  return sum / static_cast<double>(n - 1);
}

struct SmoothnessMode {
  bool sampled = false;
  std::size_t pairs = 0;
  std::uint64_t seed = 0;

  static SmoothnessMode exact() { return {}; }
  static SmoothnessMode sample(std::size_t pairs, std::uint64_t seed) { return {true, pairs, seed}; }
};

struct SmoothnessResult {
  std::vector<double> per_node;  // empty in sampled mode
  double graph_value = 0.0;
  SmoothnessMode mode;
};

inline SmoothnessResult graph_smoothness(const DenseMatrix& x,
                                         SmoothnessMode mode = SmoothnessMode::exact()) {
  const std::size_t n = x.rows();
  if (n < 2) throw InvalidArgument("graph_smoothness: need at least 2 nodes");
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = detail::inverse_norm(x.row(i));

  SmoothnessResult out;
  out.mode = mode;
  if (!mode.sampled) {
    if (n > kExactSmoothnessCap)
      throw InvalidArgument("graph_smoothness: n=" + std::to_string(n) +
                            " too large for exact mode; use sampled mode");
    out.per_node.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = detail::normalized_distance(x.row(i), inv[i], x.row(j), inv[j]);
        out.per_node[i] += d;
        out.per_node[j] += d;
      }
    double total = 0.0;
    for (double& v : out.per_node) {
      v /= static_cast<double>(n - 1);
      total += v;
    }
    out.graph_value = total / static_cast<double>(n);
    return out;
  }

  if (mode.pairs < kMinSampledPairs)
    throw InvalidArgument("graph_smoothness: sampled mode needs at least " +
                          std::to_string(kMinSampledPairs) + " pairs, got " +
                          std::to_string(mode.pairs));
  // SMV_G is the mean over unordered pairs, so a uniform pair sample is unbiased.
  Rng rng(mode.seed);
  double sum = 0.0;
  for (std::size_t p = 0; p < mode.pairs; ++p) {
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    sum += detail::normalized_distance(x.row(i), inv[i], x.row(j), inv[j]);
  }
  out.graph_value = sum / static_cast<double>(mode.pairs);
  return out;
}

/// Exact below the cap, otherwise a fixed 200k-pair sample.
inline SmoothnessResult auto_smoothness(const DenseMatrix& x, std::uint64_t seed = 0) {
  return x.rows() <= kExactSmoothnessCap ? graph_smoothness(x)
                                         : graph_smoothness(x, SmoothnessMode::sample(200'000, seed));
}

}  // namespace deepgnn
