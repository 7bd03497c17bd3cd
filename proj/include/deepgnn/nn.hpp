#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

// ---------------------------------------------------------------------------
// Activations

inline DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

/// grad ⊙ 1[pre > 0]
inline DenseMatrix relu_backward(const DenseMatrix& grad, const DenseMatrix& pre) {
  require_same_shape(grad, pre, "relu_backward");
  DenseMatrix out = grad;
  auto o = out.values();
  auto p = pre.values();
  for (std::size_t i = 0; i < o.size(); ++i)
    if (!(p[i] > 0.0)) o[i] = 0.0;
  return out;
}

inline double sigmoid(double v) {
  // split by sign so exp never overflows
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline DenseMatrix sigmoid(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

inline DenseMatrix softmax_rows(const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto in = x.row(i);
    auto o = out.row(i);
    const double mx = in.empty() ? 0.0 : *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) sum += (o[j] = std::exp(in[j] - mx));
    for (double& v : o) v /= sum;
  }
  return out;
}

inline void add_row_vector(DenseMatrix& x, const DenseMatrix& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols())
    throw InvalidArgument("add_row_vector: bias " + shape_str(bias) + " for " + shape_str(x));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
}

inline DenseMatrix column_sums(const DenseMatrix& x) {
  DenseMatrix out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out(0, j) += r[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout (inverted): survivors are scaled by 1/(1−rate).

/// If `mask` is given it receives the per-entry multiplier (0 or 1/(1−rate)).
/// Entries that are exactly zero draw no random number and get a zero mask.
inline DenseMatrix dropout(const DenseMatrix& x, double rate, Rng& rng, bool training,
                           DenseMatrix* mask = nullptr) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw InvalidArgument("dropout: rate " + std::to_string(rate) + " not in [0,1)");
  if (!training || rate == 0.0) {
    if (mask) *mask = DenseMatrix(x.rows(), x.cols(), 1.0);
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  DenseMatrix out(x.rows(), x.cols());
  if (mask) *mask = DenseMatrix(x.rows(), x.cols());
  auto in = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == 0.0) continue;
    if (rng.uniform() >= rate) {
      o[i] = in[i] * keep_scale;
      if (mask) mask->values()[i] = keep_scale;
    }
  }
  return out;
}

inline DenseMatrix dropout(const DenseMatrix& x, double rate, std::uint64_t seed, bool training) {
  Rng rng(seed);
  return dropout(x, rate, rng, training);
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kProbFloor = 1e-12;

struct CrossEntropy {
  double loss = 0.0;        // summed over the labeled set
  std::size_t clamped = 0;  // labeled entries that hit the probability floor
};

/// L = −Σ_{i ∈ labeled} ln probs[i, yᵢ]
inline CrossEntropy cross_entropy(const DenseMatrix& probs, std::span<const int> labels,
                                  std::span<const std::size_t> labeled) {
  if (labeled.empty()) throw InvalidArgument("cross_entropy: empty labeled set");
  if (labels.size() != probs.rows())
    throw InvalidArgument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                          shape_str(probs));
  CrossEntropy ce;
  for (std::size_t i : labeled) {
    const auto y = labels[i];
    if (i >= probs.rows() || y < 0 || static_cast<std::size_t>(y) >= probs.cols())
      throw InvalidArgument("cross_entropy: bad label or node id");
    double p = probs(i, static_cast<std::size_t>(y));
    if (!(p > kProbFloor)) {
      p = kProbFloor;
      ++ce.clamped;
    }
    ce.loss -= std::log(p);
  }
  return ce;
}

/// ∂L/∂logits for softmax followed by summed cross-entropy: probs − onehot on
/// labeled rows, zero elsewhere.
inline DenseMatrix softmax_cross_entropy_grad(const DenseMatrix& probs, std::span<const int> labels,
                                              std::span<const std::size_t> labeled) {
  DenseMatrix g(probs.rows(), probs.cols());
  for (std::size_t i : labeled) {
    auto gr = g.row(i);
    const auto pr = probs.row(i);
    std::copy(pr.begin(), pr.end(), gr.begin());
    gr[static_cast<std::size_t>(labels[i])] -= 1.0;
  }
  return g;
}

inline double accuracy(const DenseMatrix& probs, std::span<const int> labels,
                       std::span<const std::size_t> ids) {
  if (ids.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i : ids) {
    const auto r = probs.row(i);
    const auto arg = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    hit += arg == labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(ids.size());
}

// ---------------------------------------------------------------------------
// Initialization

/// Uniform on ±√(6/(rows+cols)).
inline DenseMatrix glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw InvalidArgument("glorot_init: zero extent");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  DenseMatrix w(rows, cols);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

// ---------------------------------------------------------------------------
// Parameters, optimizer, gradient checking

/// A trainable tensor paired with its gradient storage.
struct ParamRef {
  std::string name;
  DenseMatrix* value = nullptr;
  const DenseMatrix* grad = nullptr;
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 coefficient added to the gradient
};

/// Bias-corrected Adam with classic L2 weight decay (wd·θ added to the
/// gradient before the moment updates).
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  std::size_t step_count() const noexcept { return step_; }
  const std::vector<DenseMatrix>& first_moment() const noexcept { return m_; }
  const std::vector<DenseMatrix>& second_moment() const noexcept { return v_; }

  void step(std::span<const ParamRef> params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value->rows(), p.value->cols());
        v_.emplace_back(p.value->rows(), p.value->cols());
      }
    }
    if (m_.size() != params.size()) throw InvalidArgument("adam_step: parameter list changed");
    for (std::size_t t = 0; t < params.size(); ++t) {
      require_same_shape(*params[t].value, *params[t].grad, "adam_step");
      require_same_shape(*params[t].value, m_[t], "adam_step");
      if (!params[t].grad->all_finite())
        throw NumericError("adam_step: non-finite gradient in tensor '" + params[t].name + "'");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto w = params[t].value->values();
      auto g = params[t].grad->values();
      auto m = m_[t].values();
      auto v = v_[t].values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i] + cfg_.weight_decay * w[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        w[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<DenseMatrix> m_, v_;
};

inline void adam_step(std::span<const ParamRef> params, AdamState& state) { state.step(params); }

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Central differences on up to `samples` seeded coordinates per tensor.
/// `loss` is re-evaluated with the tensor entries perturbed in place; the
/// analytic gradients in `params` must correspond to the unperturbed point.
inline FiniteDiffResult finite_diff_check(const std::function<double()>& loss,
                                          std::span<const ParamRef> params, double epsilon = 1e-5,
                                          std::size_t samples = 20, std::uint64_t seed = 0) {
  FiniteDiffResult res;
  Rng rng(seed);
  for (const auto& p : params) {
    auto w = p.value->values();
    std::vector<std::size_t> coords(w.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > samples) {
      rng.shuffle(coords);
      coords.resize(samples);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double saved = w[idx];
      w[idx] = saved + epsilon;
      const double up = loss();
      w[idx] = saved - epsilon;
      const double down = loss();
      w[idx] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p.grad->values()[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++res.coordinates_checked;
      if (res.worst_tensor.empty() || rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_tensor = p.name;
        res.worst_index = idx;
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace deepgnn
