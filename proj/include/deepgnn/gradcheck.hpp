#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "deepgnn/classifier.hpp"
#include "deepgnn/graph.hpp"
#include "deepgnn/nn.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

/// Summed cross-entropy over all nodes, dropout off.
inline FiniteDiffResult gradient_check(const ModelConfig& cfg, const Graph& g, const DenseMatrix& x,
                                       const std::vector<int>& labels, std::size_t num_classes,
                                       std::uint64_t seed, std::size_t samples = 30) {
  PropagationOperator op(g, NormKind::Symmetric);
  Classifier model(cfg, x.cols(), num_classes, seed);
  std::vector<std::size_t> all(g.num_nodes());
  std::iota(all.begin(), all.end(), 0);

  const auto out = model.forward(op, x, DropoutConfig{});
  model.backward(op, softmax_cross_entropy_grad(out.probs, labels, all));
  auto refs = model.param_refs();
  auto loss = [&] { return cross_entropy(model.predict(op, x).probs, labels, all).loss; };
  return finite_diff_check(loss, refs, 1e-5, samples, derive_seed(seed, 11));
}

/// SBM graph, uniform features in [-1,1], block labels.
struct GradcheckFixture {
  Graph graph;
  DenseMatrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
};

inline GradcheckFixture make_gradcheck_fixture(const GraphSpec& spec, std::size_t feature_dim, std::uint64_t seed) {
  GradcheckFixture f;
  f.graph = synth_graph(spec);
  const std::size_t n = f.graph.num_nodes();
  f.features = DenseMatrix(n, feature_dim);
  Rng rng(derive_seed(seed, 12));
  for (double& v : f.features.values()) v = rng.uniform(-1.0, 1.0);
  if (spec.kind == SynthKind::Sbm) {
    for (std::size_t b : block_assignment(spec)) f.labels.push_back(static_cast<int>(b));
    f.num_classes = spec.sizes.size();
  } else {
    f.num_classes = 3;
    for (std::size_t i = 0; i < n; ++i) f.labels.push_back(static_cast<int>(i % 3));
  }
  return f;
}

}  // namespace deepgnn
