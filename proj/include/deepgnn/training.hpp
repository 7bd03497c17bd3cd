#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "deepgnn/classifier.hpp"
#include "deepgnn/dataset.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/graph.hpp"
#include "deepgnn/nn.hpp"
#include "deepgnn/random.hpp"
#include "deepgnn/smoothness.hpp"

namespace deepgnn {

// ---------------------------------------------------------------------------
// Splits

enum class SplitKind { Fixed, Random };

struct SplitSpec {
  SplitKind kind = SplitKind::Random;
  std::size_t train_per_class = 20;
  std::size_t val_size = 500;
  std::size_t test_size = 1000;  // 0 means every remaining node
  std::uint64_t seed = 0;
};

/// Random split with exactly train_per_class training nodes per class, then
/// val_size and test_size nodes drawn from the remainder. Lists are sorted.
inline NodeSplit make_split(std::span<const int> labels, std::size_t num_classes, const SplitSpec& spec) {
  if (spec.kind != SplitKind::Random) throw InvalidArgument("make_split: fixed splits come from the dataset");
  if (spec.train_per_class == 0) throw InvalidArgument("make_split: train_per_class must be positive");
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw InvalidArgument("make_split: label " + std::to_string(labels[i]) + " of node " +
                            std::to_string(i) + " outside [0," + std::to_string(num_classes) + ")");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  NodeSplit split;
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& ids = by_class[c];
    if (ids.size() < spec.train_per_class)
      throw DataError("make_split: class " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                      " nodes, fewer than train_per_class=" + std::to_string(spec.train_per_class));
    rng.shuffle(ids);
    split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(spec.train_per_class));
    rest.insert(rest.end(), ids.begin() + static_cast<std::ptrdiff_t>(spec.train_per_class), ids.end());
  }
  std::sort(rest.begin(), rest.end());
  rng.shuffle(rest);
  const std::size_t test_n = spec.test_size == 0 ? rest.size() - std::min(rest.size(), spec.val_size) : spec.test_size;
  if (spec.val_size + test_n > rest.size())
    throw DataError("make_split: " + std::to_string(rest.size()) + " unlabeled-pool nodes cannot hold val=" +
                    std::to_string(spec.val_size) + " and test=" + std::to_string(test_n));
  split.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(spec.val_size));
  split.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(spec.val_size),
                    rest.begin() + static_cast<std::ptrdiff_t>(spec.val_size + test_n));
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

/// Fixed kind returns the dataset's own split; random kind draws one with spec.seed.
inline NodeSplit resolve_split(const DatasetBundle& b, const SplitSpec& spec) {
  if (spec.kind == SplitKind::Fixed) {
    if (!b.fixed_split) throw DataError("dataset '" + b.name + "' has no fixed split files");
    return *b.fixed_split;
  }
  return make_split(b.labels, b.num_classes, spec);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  ModelConfig model;
  double lr = 0.01;
  double weight_decay = 5e-3;
  std::size_t max_epochs = 1500;
  std::size_t patience = 100;
  std::uint64_t seed = 0;
  bool record_smoothness = false;  // SMV_G of the final representations
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"model", to_string(c.model.kind)}, {"depth", c.model.depth},      {"hidden", c.model.hidden},
          {"dropout", c.model.dropout},       {"lr", c.lr},                  {"weight_decay", c.weight_decay},
          {"max_epochs", c.max_epochs},       {"patience", c.patience}};
}

/// Graph operator and features shared by every run on one dataset.
struct TrainingData {
  std::shared_ptr<const PropagationOperator> op;
  std::shared_ptr<const DenseMatrix> features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  NodeSplit split;
};

/// Symmetric operator and row-L1-normalized features.
inline TrainingData prepare(const DatasetBundle& b, NodeSplit split) {
  validate_bundle(b);
  TrainingData d;
  d.op = std::make_shared<const PropagationOperator>(b.graph, NormKind::Symmetric);
  d.features = std::make_shared<const DenseMatrix>(row_normalize(b.features));
  d.labels = b.labels;
  d.num_classes = b.num_classes;
  d.split = std::move(split);
  return d;
}

struct RunEntry {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial parameters
  std::size_t epochs_run = 0;
  double initial_loss = 0.0;
  std::vector<double> train_loss;  // evaluation-mode, after each epoch
  std::vector<double> val_loss;
  std::optional<double> smv_g;
};

/// `trained`, if given, receives the model with the best-epoch parameters.
inline RunEntry train(const TrainConfig& cfg, const TrainingData& data, std::optional<Classifier>* trained = nullptr) {
  if (!data.op || !data.features) throw InvalidArgument("train: data not prepared");
  if (data.split.train.empty() || data.split.val.empty())
    throw InvalidArgument("train: empty train or validation split");
  const PropagationOperator& op = *data.op;
  const DenseMatrix& x = *data.features;
  const auto& sp = data.split;

  Classifier model(cfg.model, x.cols(), data.num_classes, derive_seed(cfg.seed, 1));
  Rng drop_rng(derive_seed(cfg.seed, 2));
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  // Scaled so the summed loss sees the same decay strength as a mean loss.
  adam_cfg.weight_decay = cfg.weight_decay * static_cast<double>(sp.train.size());
  AdamState adam(adam_cfg);
  const auto refs = model.param_refs();

  RunEntry run;
  run.seed = cfg.seed;
  {
    const auto out = model.predict(op, x);
    run.initial_loss = cross_entropy(out.probs, data.labels, sp.train).loss;
  }

  double best_acc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  Classifier::Params best = model.params();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const DropoutConfig drop{cfg.model.dropout, true, &drop_rng};
    const auto out = model.forward(op, x, drop);
    const double loss = cross_entropy(out.probs, data.labels, sp.train).loss;
    if (!std::isfinite(loss)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
    model.backward(op, softmax_cross_entropy_grad(out.probs, data.labels, sp.train));
    adam.step(refs);

    const auto eval = model.predict(op, x);
    run.train_loss.push_back(cross_entropy(eval.probs, data.labels, sp.train).loss);
    const double vloss = cross_entropy(eval.probs, data.labels, sp.val).loss;
    const double vacc = accuracy(eval.probs, data.labels, sp.val);
    run.val_loss.push_back(vloss);
    run.epochs_run = epoch;
    if (vacc > best_acc || (vacc == best_acc && vloss < best_loss)) {
      best_acc = vacc;
      best_loss = vloss;
      best = model.params();
      run.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  model.params() = std::move(best);
  const auto final_out = model.predict(op, x);
  run.val_accuracy = accuracy(final_out.probs, data.labels, sp.val);
  run.test_accuracy = accuracy(final_out.probs, data.labels, sp.test);
  if (cfg.record_smoothness) run.smv_g = auto_smoothness(final_out.logits, cfg.seed).graph_value;
  if (trained) trained->emplace(std::move(model));
  return run;
}

// ---------------------------------------------------------------------------
// Multi-run statistics

struct RunReport {
  TrainConfig config;
  std::string split;  // "fixed" or "random"
  std::vector<RunEntry> runs;  // sorted by seed
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation; 0 for one run
  std::optional<double> mean_smv_g;
};

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline void summarize(RunReport& r) {
  std::sort(r.runs.begin(), r.runs.end(), [](const RunEntry& a, const RunEntry& b) { return a.seed < b.seed; });
  std::vector<double> acc, smv;
  for (const auto& e : r.runs) {
    acc.push_back(e.test_accuracy);
    if (e.smv_g) smv.push_back(*e.smv_g);
  }
  r.mean_accuracy = mean(acc);
  r.std_accuracy = sample_std(acc);
  r.mean_smv_g = smv.empty() ? std::nullopt : std::optional<double>(mean(smv));
}

/// Runs fn(0..count-1) on up to `threads` workers. The exception of the
/// lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Seeds cfg.seed .. cfg.seed+n_runs−1. Random splits are redrawn per run
/// from the run seed.
inline RunReport multi_run(const TrainConfig& cfg, const DatasetBundle& b, const SplitSpec& split,
                           std::size_t n_runs, std::size_t threads = 1) {
  if (n_runs == 0) throw InvalidArgument("multi_run: n_runs must be at least 1");
  const TrainingData base = prepare(b, split.kind == SplitKind::Fixed ? resolve_split(b, split) : NodeSplit{});
  RunReport report;
  report.config = cfg;
  report.split = split.kind == SplitKind::Fixed ? "fixed" : "random";
  report.runs.resize(n_runs);
  parallel_for(n_runs, threads, [&](std::size_t r) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + r;
    TrainingData d = base;
    if (split.kind == SplitKind::Random) {
      SplitSpec s = split;
      s.seed = derive_seed(c.seed, 7);
      d.split = make_split(b.labels, b.num_classes, s);
    }
    report.runs[r] = train(c, d);
  });
  summarize(report);
  return report;
}

inline nlohmann::json to_json(const RunEntry& e) {
  nlohmann::json j = {{"seed", e.seed},
                      {"test_accuracy", e.test_accuracy},
                      {"val_accuracy", e.val_accuracy},
                      {"best_epoch", e.best_epoch},
                      {"epochs_run", e.epochs_run},
                      {"initial_loss", e.initial_loss},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss}};
  if (e.smv_g) j["smv_g"] = *e.smv_g;
  return j;
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& e : r.runs) runs.push_back(to_json(e));
  nlohmann::json j = {{"config", to_json(r.config)},
                      {"split", r.split},
                      {"n_runs", r.runs.size()},
                      {"mean_accuracy", r.mean_accuracy},
                      {"std_accuracy", r.std_accuracy},
                      {"runs", runs}};
  if (r.mean_smv_g) j["mean_smv_g"] = *r.mean_smv_g;
  return j;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::string key;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double smv_g = 0.0;
};

inline const std::vector<std::string>& sweep_header() {
  static const std::vector<std::string> h = {"key", "acc_mean", "acc_std", "smv_g"};
  return h;
}

inline std::vector<std::vector<std::string>> sweep_table(std::span<const SweepRow> rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({r.key, format_double(r.acc_mean), format_double(r.acc_std), format_double(r.smv_g)});
  return out;
}

/// Depth 0 trains the MLP baseline; otherwise depth is the GCN layer count
/// or the propagation steps k of the decoupled model and DAGNN.
inline std::vector<SweepRow> depth_sweep(const TrainConfig& cfg, std::span<const int> depths,
                                         const DatasetBundle& b, const SplitSpec& split, std::size_t n_runs,
                                         std::size_t threads = 1) {
  std::vector<SweepRow> rows;
  for (int depth : depths) {
    if (depth < 0) throw InvalidArgument("depth_sweep: negative depth " + std::to_string(depth));
    TrainConfig c = cfg;
    c.record_smoothness = true;
    if (depth == 0) {
      c.model.kind = ModelKind::Mlp;
    } else {
      c.model.depth = depth;
    }
    const RunReport r = multi_run(c, b, split, n_runs, threads);
    rows.push_back({std::to_string(depth), r.mean_accuracy, r.std_accuracy, r.mean_smv_g.value_or(0.0)});
  }
  return rows;
}

/// Random splits with each listed number of training nodes per class.
inline std::vector<SweepRow> train_size_sweep(const TrainConfig& cfg, std::span<const std::size_t> sizes,
                                              const DatasetBundle& b, SplitSpec split, std::size_t n_runs,
                                              std::size_t threads = 1) {
  std::vector<SweepRow> rows;
  split.kind = SplitKind::Random;
  TrainConfig c = cfg;
  c.record_smoothness = true;
  for (std::size_t size : sizes) {
    split.train_per_class = size;
    const RunReport r = multi_run(c, b, split, n_runs, threads);
    rows.push_back({std::to_string(size), r.mean_accuracy, r.std_accuracy, r.mean_smv_g.value_or(0.0)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Hyperparameter grid

inline const std::vector<int> kGridK = {5, 10, 20};
inline const std::vector<double> kGridWeightDecay = {0.0, 2e-2, 5e-3, 5e-4, 5e-5};
inline const std::vector<double> kGridDropout = {0.5, 0.8};

struct GridResult {
  TrainConfig best;
  double best_val_accuracy = -1.0;
  std::vector<std::pair<TrainConfig, double>> trials;  // config, mean validation accuracy
};

/// Exhaustive search by mean validation accuracy. k is searched only for the
/// propagation models; ties keep the earlier grid point.
inline GridResult grid_search(const TrainConfig& cfg, const DatasetBundle& b, const SplitSpec& split,
                              std::size_t n_runs, std::size_t threads = 1) {
  const bool uses_k = cfg.model.kind == ModelKind::Decoupled || cfg.model.kind == ModelKind::Dagnn;
  const std::vector<int> ks = uses_k ? kGridK : std::vector<int>{cfg.model.depth};
  GridResult g;
  for (int k : ks)
    for (double wd : kGridWeightDecay)
      for (double dr : kGridDropout) {
        TrainConfig c = cfg;
        c.model.depth = k;
        c.weight_decay = wd;
        c.model.dropout = dr;
        const RunReport r = multi_run(c, b, split, n_runs, threads);
        std::vector<double> val;
        for (const auto& e : r.runs) val.push_back(e.val_accuracy);
        const double v = mean(val);
        g.trials.emplace_back(c, v);
        if (v > g.best_val_accuracy) {
          g.best_val_accuracy = v;
          g.best = c;
        }
      }
  return g;
}

}  // namespace deepgnn
