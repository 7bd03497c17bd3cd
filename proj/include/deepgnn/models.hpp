#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/graph.hpp"
#include "deepgnn/nn.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

// Forward and backward passes for the four node classifiers:
//   MLP        logits = MLP(X)
//   GCN        X⁽ˡ⁾ = σ(Â X⁽ˡ⁻¹⁾ W⁽ˡ⁾), softmax after the last layer
//   Decoupled  softmax(Âᵏ MLP(X))
//   DAGNN      Z = MLP(X), Hₗ = Âˡ Z, Sᵢₗ = sigmoid(Hₗ[i]·s),
//              out[i] = softmax(Σₗ Sᵢₗ Hₗ[i])
// Gradients are hand-derived. Backward passes take ∂L/∂logits, so any loss
// on top of the logits can be used; the trainer uses softmax cross-entropy.

struct DropoutConfig {
  double rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;  // required when training with rate > 0

  bool active() const noexcept { return training && rate > 0.0; }
};

// ---------------------------------------------------------------------------
// MLP

struct MlpParams {
  std::vector<DenseMatrix> weights;  // weights[l] is in_l × out_l
  std::vector<DenseMatrix> biases;   // biases[l] is 1 × out_l

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t in_dim() const { return weights.front().rows(); }
  std::size_t out_dim() const { return weights.back().cols(); }

  /// Gradient storage of matching shape.
  MlpParams zeros_like() const {
    MlpParams z;
    for (const auto& w : weights) z.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : biases) z.biases.emplace_back(b.rows(), b.cols());
    return z;
  }
};

/// dims = {d, hidden..., c}; Glorot weights, zero biases.
inline MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidArgument("init_mlp: need at least input and output dims");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.push_back(glorot_init(dims[l], dims[l + 1], derive_seed(seed, 100 + l)));
    p.biases.emplace_back(1, dims[l + 1]);
  }
  return p;
}

inline MlpParams init_mlp(std::initializer_list<std::size_t> dims, std::uint64_t seed) {
  return init_mlp(std::span<const std::size_t>(dims.begin(), dims.size()), seed);
}

struct MlpCache {
  std::vector<DenseMatrix> inputs;  // post-dropout input of each layer
  std::vector<DenseMatrix> masks;   // dropout multipliers; masks[0] unused
  std::vector<DenseMatrix> pre;     // pre-activation of each hidden layer
};

inline void check_mlp_shapes(const MlpParams& p) {
  if (p.weights.empty() || p.weights.size() != p.biases.size())
    throw InvalidArgument("MlpParams: inconsistent layer lists");
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (p.biases[l].rows() != 1 || p.biases[l].cols() != p.weights[l].cols())
      throw InvalidArgument("MlpParams: bias " + std::to_string(l) + " shape mismatch");
    if (l > 0 && p.weights[l].rows() != p.weights[l - 1].cols())
      throw InvalidArgument("MlpParams: layer " + std::to_string(l) + " input dim mismatch");
  }
}

/// ReLU between layers, dropout before every linear layer when training,
/// no activation after the last layer. Returns logits.
inline DenseMatrix mlp_forward(const MlpParams& p, const DenseMatrix& x, const DropoutConfig& drop,
                               MlpCache* cache = nullptr) {
  check_mlp_shapes(p);
  if (x.cols() != p.in_dim())
    throw InvalidArgument("mlp_forward: input " + shape_str(x) + " for weight " +
                          shape_str(p.weights.front()));
  if (drop.active() && !drop.rng) throw InvalidArgument("mlp_forward: dropout needs an rng");
  if (cache) *cache = {};
  DenseMatrix h = x;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    DenseMatrix mask;
    DenseMatrix in = drop.active() ? dropout(h, drop.rate, *drop.rng, true, l > 0 ? &mask : nullptr)
                                   : std::move(h);
    DenseMatrix z = matmul(in, p.weights[l]);
    add_row_vector(z, p.biases[l]);
    if (cache) {
      cache->inputs.push_back(std::move(in));
      cache->masks.push_back(std::move(mask));
    }
    if (l + 1 < p.num_layers()) {
      h = relu(z);
      if (cache) cache->pre.push_back(std::move(z));
    } else {
      return z;
    }
  }
  return {};  // unreachable: at least one layer
}

/// Overwrites `grads` with ∂L/∂params given ∂L/∂logits.
inline void mlp_backward(const MlpParams& p, const MlpCache& cache, DenseMatrix d_out,
                         MlpParams& grads) {
  // Reallocate only on a layout change so existing ParamRef views stay valid.
  if (grads.weights.size() != p.weights.size() || grads.biases.size() != p.biases.size()) grads = p.zeros_like();
  for (std::size_t l = p.num_layers(); l-- > 0;) {
    grads.weights[l] = matmul_at_b(cache.inputs[l], d_out);
    grads.biases[l] = column_sums(d_out);
    if (l == 0) break;
    DenseMatrix d_in = matmul_a_bt(d_out, p.weights[l]);
    if (!cache.masks[l].empty()) d_in = hadamard(d_in, cache.masks[l]);
    d_out = relu_backward(d_in, cache.pre[l - 1]);
  }
}

// ---------------------------------------------------------------------------
// GCN

struct GcnParams {
  std::vector<DenseMatrix> weights;  // no biases

  std::size_t depth() const noexcept { return weights.size(); }
  GcnParams zeros_like() const {
    GcnParams z;
    for (const auto& w : weights) z.weights.emplace_back(w.rows(), w.cols());
    return z;
  }
};

/// depth layers: d → hidden → … → hidden → c.
inline GcnParams init_gcn(std::size_t d, std::size_t hidden, std::size_t c, std::size_t depth,
                          std::uint64_t seed) {
  if (depth == 0) throw InvalidArgument("init_gcn: depth must be at least 1");
  GcnParams p;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t in = l == 0 ? d : hidden;
    const std::size_t out = l + 1 == depth ? c : hidden;
    p.weights.push_back(glorot_init(in, out, derive_seed(seed, 200 + l)));
  }
  return p;
}

struct GcnCache {
  std::vector<DenseMatrix> inputs;  // post-dropout input of each layer
  std::vector<DenseMatrix> masks;
  std::vector<DenseMatrix> pre;     // Â·in·W of each layer
  DenseMatrix probs;
};

struct ForwardOutput {
  DenseMatrix logits;  // pre-softmax node representations
  DenseMatrix probs;
};

inline ForwardOutput gcn_forward(const GcnParams& p, const PropagationOperator& op,
                                 const DenseMatrix& x, const DropoutConfig& drop,
                                 GcnCache* cache = nullptr) {
  if (p.weights.empty()) throw InvalidArgument("gcn_forward: no layers");
  if (x.rows() != op.num_nodes() || x.cols() != p.weights.front().rows())
    throw InvalidArgument("gcn_forward: input " + shape_str(x) + " incompatible with graph/weights");
  if (drop.active() && !drop.rng) throw InvalidArgument("gcn_forward: dropout needs an rng");
  if (cache) *cache = {};
  DenseMatrix h = x;
  for (std::size_t l = 0; l < p.depth(); ++l) {
    DenseMatrix mask;
    DenseMatrix in = drop.active() ? dropout(h, drop.rate, *drop.rng, true, l > 0 ? &mask : nullptr)
                                   : std::move(h);
    // Â (in W): transform first so propagation runs on the narrower side.
    DenseMatrix z = propagate(op, matmul(in, p.weights[l]));
    if (!z.all_finite())
      throw NumericError("gcn_forward: non-finite activation in layer " + std::to_string(l + 1));
    if (cache) {
      cache->inputs.push_back(std::move(in));
      cache->masks.push_back(std::move(mask));
    }
    if (l + 1 < p.depth()) {
      h = relu(z);
      if (cache) cache->pre.push_back(std::move(z));
    } else {
      ForwardOutput out{z, softmax_rows(z)};
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->probs = out.probs;
      }
      return out;
    }
  }
  return {};
}

inline void gcn_backward(const GcnParams& p, const PropagationOperator& op, const GcnCache& cache,
                         DenseMatrix d_logits, GcnParams& grads) {
  if (grads.weights.size() != p.weights.size()) grads = p.zeros_like();
  for (std::size_t l = p.depth(); l-- > 0;) {
    const DenseMatrix d_t = propagate_transpose(op, d_logits);
    grads.weights[l] = matmul_at_b(cache.inputs[l], d_t);
    if (l == 0) break;
    DenseMatrix d_in = matmul_a_bt(d_t, p.weights[l]);
    if (!cache.masks[l].empty()) d_in = hadamard(d_in, cache.masks[l]);
    d_logits = relu_backward(d_in, cache.pre[l - 1]);
  }
}

// ---------------------------------------------------------------------------
// Decoupled transform-then-propagate

struct DecoupledCache {
  MlpCache mlp;
  std::size_t k = 0;
};

inline ForwardOutput decoupled_forward(const MlpParams& p, const PropagationOperator& op,
                                       const DenseMatrix& x, int k, const DropoutConfig& drop,
                                       DecoupledCache* cache = nullptr) {
  if (k < 0) throw InvalidArgument("decoupled_forward: k must be non-negative");
  if (x.rows() != op.num_nodes()) throw InvalidArgument("decoupled_forward: row count mismatch");
  DenseMatrix h = mlp_forward(p, x, drop, cache ? &cache->mlp : nullptr);
  for (int step = 0; step < k; ++step) h = propagate(op, h);
  if (cache) cache->k = static_cast<std::size_t>(k);
  ForwardOutput out{std::move(h), {}};
  out.probs = softmax_rows(out.logits);
  return out;
}

inline void decoupled_backward(const MlpParams& p, const PropagationOperator& op,
                               const DecoupledCache& cache, DenseMatrix d_logits, MlpParams& grads) {
  for (std::size_t step = 0; step < cache.k; ++step) d_logits = propagate_transpose(op, d_logits);
  mlp_backward(p, cache.mlp, std::move(d_logits), grads);
}

// ---------------------------------------------------------------------------
// DAGNN

struct DagnnParams {
  MlpParams mlp;
  DenseMatrix s;  // c × 1 projection vector

  DagnnParams zeros_like() const { return {mlp.zeros_like(), DenseMatrix(s.rows(), s.cols())}; }
};

inline DagnnParams init_dagnn(std::size_t d, std::size_t hidden, std::size_t c, std::uint64_t seed) {
  const std::size_t dims[] = {d, hidden, c};
  return {init_mlp(dims, seed), glorot_init(c, 1, derive_seed(seed, 300))};
}

struct DagnnOptions {
  /// Test hook: replaces the sigmoid scores with fixed per-hop values
  /// (length k+1, shared by all nodes). Gradients w.r.t. s are then zero.
  std::optional<std::vector<double>> gate_override;
};

struct DagnnCache {
  MlpCache mlp;
  std::vector<DenseMatrix> hops;  // H₀ = Z, H₁ … H_k, each n × c
  DenseMatrix scores;             // S, n × (k+1)
  bool gates_overridden = false;
};

inline ForwardOutput dagnn_forward(const DagnnParams& p, const PropagationOperator& op,
                                   const DenseMatrix& x, int k, const DropoutConfig& drop,
                                   DagnnCache* cache = nullptr, const DagnnOptions& opts = {}) {
  if (k < 1) throw InvalidArgument("dagnn_forward: k must be at least 1");
  if (x.rows() != op.num_nodes()) throw InvalidArgument("dagnn_forward: row count mismatch");
  const std::size_t c = p.mlp.out_dim();
  if (p.s.rows() != c || p.s.cols() != 1)
    throw InvalidArgument("dagnn_forward: projection vector " + shape_str(p.s) + " for c=" +
                          std::to_string(c));
  const auto hops_n = static_cast<std::size_t>(k) + 1;
  if (opts.gate_override && opts.gate_override->size() != hops_n)
    throw InvalidArgument("dagnn_forward: gate override needs k+1 values");

  std::vector<DenseMatrix> hops;
  hops.reserve(hops_n);
  hops.push_back(mlp_forward(p.mlp, x, drop, cache ? &cache->mlp : nullptr));
  for (std::size_t l = 1; l < hops_n; ++l) hops.push_back(propagate(op, hops.back()));

  const std::size_t n = x.rows();
  DenseMatrix scores(n, hops_n);
  DenseMatrix out(n, c);
  for (std::size_t l = 0; l < hops_n; ++l) {
    const DenseMatrix& h = hops[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto hr = h.row(i);
      const double sc = opts.gate_override ? (*opts.gate_override)[l]
                                           : sigmoid(dot(hr, p.s.values()));
      if (!std::isfinite(sc))
        throw NumericError("dagnn_forward: non-finite score at node " + std::to_string(i) +
                           ", hop " + std::to_string(l));
      scores(i, l) = sc;
      auto o = out.row(i);
      for (std::size_t j = 0; j < c; ++j) o[j] += sc * hr[j];
    }
  }
  ForwardOutput result{out, softmax_rows(out)};
  if (cache) {
    cache->hops = std::move(hops);
    cache->scores = std::move(scores);
    cache->gates_overridden = opts.gate_override.has_value();
  }
  return result;
}

inline void dagnn_backward(const DagnnParams& p, const PropagationOperator& op,
                           const DagnnCache& cache, const DenseMatrix& d_logits, DagnnParams& grads) {
  if (grads.s.rows() != p.s.rows() || grads.s.cols() != p.s.cols())
    grads = p.zeros_like();
  else
    grads.s.fill(0.0);
  const std::size_t hops_n = cache.hops.size();
  const std::size_t n = d_logits.rows();
  const std::size_t c = d_logits.cols();
  const auto s = p.s.values();
  auto ds = grads.s.values();

  // Direct contribution of each hop to ∂L/∂Hₗ: through the weighted sum and
  // through its own score.
  std::vector<DenseMatrix> d_hops(hops_n, DenseMatrix(n, c));
  for (std::size_t l = 0; l < hops_n; ++l) {
    const DenseMatrix& h = cache.hops[l];
    DenseMatrix& dh = d_hops[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = d_logits.row(i);
      const auto hr = h.row(i);
      auto dr = dh.row(i);
      const double sc = cache.scores(i, l);
      for (std::size_t j = 0; j < c; ++j) dr[j] = sc * g[j];
      if (cache.gates_overridden) continue;
      const double d_pre = dot(hr, g) * sc * (1.0 - sc);
      for (std::size_t j = 0; j < c; ++j) {
        ds[j] += d_pre * hr[j];
        dr[j] += d_pre * s[j];
      }
    }
  }
  // Hₗ = Â Hₗ₋₁, so walk back from the deepest hop.
  DenseMatrix carry = std::move(d_hops[hops_n - 1]);
  for (std::size_t l = hops_n - 1; l > 0; --l) {
    carry = propagate_transpose(op, carry);
    axpy(1.0, d_hops[l - 1], carry);
  }
  mlp_backward(p.mlp, cache.mlp, std::move(carry), grads.mlp);
}

// ---------------------------------------------------------------------------
// Parameter views and counts

inline std::vector<ParamRef> param_refs(MlpParams& p, const MlpParams& g, const std::string& prefix = "mlp") {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    refs.push_back({prefix + ".W" + std::to_string(l), &p.weights[l], &g.weights[l]});
    refs.push_back({prefix + ".b" + std::to_string(l), &p.biases[l], &g.biases[l]});
  }
  return refs;
}

inline std::vector<ParamRef> param_refs(GcnParams& p, const GcnParams& g) {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < p.depth(); ++l)
    refs.push_back({"gcn.W" + std::to_string(l), &p.weights[l], &g.weights[l]});
  return refs;
}

inline std::vector<ParamRef> param_refs(DagnnParams& p, const DagnnParams& g) {
  auto refs = param_refs(p.mlp, g.mlp);
  refs.push_back({"dagnn.s", &p.s, &g.s});
  return refs;
}

inline std::size_t count_parameters(const MlpParams& p) {
  std::size_t total = 0;
  for (const auto& w : p.weights) total += w.size();
  for (const auto& b : p.biases) total += b.size();
  return total;
}

inline std::size_t count_parameters(const GcnParams& p) {
  std::size_t total = 0;
  for (const auto& w : p.weights) total += w.size();
  return total;
}

inline std::size_t count_parameters(const DagnnParams& p) {
  return count_parameters(p.mlp) + p.s.size();
}

}  // namespace deepgnn
