#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "deepgnn/error.hpp"
#include "deepgnn/models.hpp"

namespace deepgnn {

enum class ModelKind { Mlp, Gcn, Decoupled, Dagnn };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Gcn: return "gcn";
    case ModelKind::Decoupled: return "decoupled";
    case ModelKind::Dagnn: return "dagnn";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "gcn") return ModelKind::Gcn;
  if (s == "decoupled") return ModelKind::Decoupled;
  if (s == "dagnn") return ModelKind::Dagnn;
  throw InvalidArgument("unknown model '" + std::string(s) + "' (mlp|gcn|decoupled|dagnn)");
}

struct ModelConfig {
  ModelKind kind = ModelKind::Dagnn;
  /// GCN: number of layers. Decoupled/DAGNN: propagation steps k. MLP: unused.
  int depth = 10;
  std::size_t hidden = 64;
  double dropout = 0.5;
};

inline void validate(const ModelConfig& cfg) {
  if (cfg.hidden == 0) throw InvalidArgument("hidden width must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw InvalidArgument("dropout must lie in [0,1)");
  switch (cfg.kind) {
    case ModelKind::Gcn:
      if (cfg.depth < 1) throw InvalidArgument("GCN depth must be at least 1");
      break;
    case ModelKind::Decoupled:
      if (cfg.depth < 0) throw InvalidArgument("decoupled model needs k >= 0");
      break;
    case ModelKind::Dagnn:
      if (cfg.depth < 1) throw InvalidArgument("DAGNN needs k >= 1");
      break;
    case ModelKind::Mlp:
      break;
  }
}

/// Uniform training-facing wrapper around the four models. The MLP baseline
/// is the decoupled model with zero propagation steps.
class Classifier {
 public:
  using Params = std::variant<MlpParams, GcnParams, DagnnParams>;

  Classifier(const ModelConfig& cfg, std::size_t in_dim, std::size_t num_classes, std::uint64_t seed)
      : cfg_(cfg) {
    validate(cfg_);
    switch (cfg_.kind) {
      case ModelKind::Mlp:
      case ModelKind::Decoupled: {
        const std::size_t dims[] = {in_dim, cfg_.hidden, num_classes};
        params_ = init_mlp(dims, seed);
        break;
      }
      case ModelKind::Gcn:
        params_ = init_gcn(in_dim, cfg_.hidden, num_classes, static_cast<std::size_t>(cfg_.depth), seed);
        break;
      case ModelKind::Dagnn:
        params_ = init_dagnn(in_dim, cfg_.hidden, num_classes, seed);
        break;
    }
    grads_ = std::visit([](const auto& p) -> Params { return p.zeros_like(); }, params_);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const Params& params() const noexcept { return params_; }
  Params& params() noexcept { return params_; }
  const Params& grads() const noexcept { return grads_; }

  int propagation_steps() const noexcept { return cfg_.kind == ModelKind::Mlp ? 0 : cfg_.depth; }

  /// Keeps the activation cache of the latest call for backward().
  ForwardOutput forward(const PropagationOperator& op, const DenseMatrix& x, const DropoutConfig& drop) {
    switch (cfg_.kind) {
      case ModelKind::Mlp:
      case ModelKind::Decoupled:
        return decoupled_forward(std::get<MlpParams>(params_), op, x, propagation_steps(), drop, &decoupled_cache_);
      case ModelKind::Gcn:
        return gcn_forward(std::get<GcnParams>(params_), op, x, drop, &gcn_cache_);
      case ModelKind::Dagnn:
        return dagnn_forward(std::get<DagnnParams>(params_), op, x, cfg_.depth, drop, &dagnn_cache_);
    }
    return {};
  }

  /// Inference without touching the cache.
  ForwardOutput predict(const PropagationOperator& op, const DenseMatrix& x) const {
    const DropoutConfig off{};
    switch (cfg_.kind) {
      case ModelKind::Mlp:
      case ModelKind::Decoupled:
        return decoupled_forward(std::get<MlpParams>(params_), op, x, propagation_steps(), off);
      case ModelKind::Gcn:
        return gcn_forward(std::get<GcnParams>(params_), op, x, off);
      case ModelKind::Dagnn:
        return dagnn_forward(std::get<DagnnParams>(params_), op, x, cfg_.depth, off);
    }
    return {};
  }

  void backward(const PropagationOperator& op, const DenseMatrix& d_logits) {
    switch (cfg_.kind) {
      case ModelKind::Mlp:
      case ModelKind::Decoupled:
        decoupled_backward(std::get<MlpParams>(params_), op, decoupled_cache_, d_logits,
                           std::get<MlpParams>(grads_));
        break;
      case ModelKind::Gcn:
        gcn_backward(std::get<GcnParams>(params_), op, gcn_cache_, d_logits, std::get<GcnParams>(grads_));
        break;
      case ModelKind::Dagnn:
        dagnn_backward(std::get<DagnnParams>(params_), op, dagnn_cache_, d_logits,
                       std::get<DagnnParams>(grads_));
        break;
    }
  }

  std::vector<ParamRef> param_refs() {
    return std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          return deepgnn::param_refs(p, std::get<P>(grads_));
        },
        params_);
  }

  std::size_t parameter_count() const {
    return std::visit([](const auto& p) { return count_parameters(p); }, params_);
  }

 private:
  ModelConfig cfg_;
  Params params_;
  Params grads_;
  DecoupledCache decoupled_cache_;
  GcnCache gcn_cache_;
  DagnnCache dagnn_cache_;
};

}  // namespace deepgnn
