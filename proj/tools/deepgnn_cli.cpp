// deepgnn command-line driver: training, sweeps and numerical checks.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "deepgnn/deepgnn.hpp"

#ifndef DEEPGNN_BUILTIN_DATA
#define DEEPGNN_BUILTIN_DATA "data"
#endif

namespace fs = std::filesystem;
using namespace deepgnn;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared option groups

struct DataOpts {
  std::string dataset;
  std::string split = "fixed";
  std::size_t train_per_class = 20;
  std::size_t val_size = 500;
  std::size_t test_size = 1000;
};

struct ModelOpts {
  std::string model = "dagnn";
  std::optional<int> k;
  std::optional<int> depth;
  std::size_t hidden = 64;
  std::optional<double> dropout;
  std::optional<double> weight_decay;
  double lr = 0.01;
  std::size_t max_epochs = 1500;
  std::size_t patience = 100;
};

struct RunOpts {
  std::size_t runs = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string output;
};

void add_data_opts(CLI::App* app, DataOpts& o) {
  app->add_option("--dataset", o.dataset,
                  "Dataset directory, name under $DEEPGNN_DATA, built-in name (toy), or synthetic[:seed]")
      ->required();
  app->add_option("--split", o.split, "fixed (dataset split files) or random")
      ->check(CLI::IsMember({"fixed", "random"}))
      ->capture_default_str();
  app->add_option("--train-per-class", o.train_per_class, "Random split: training nodes per class")
      ->capture_default_str();
  app->add_option("--val-size", o.val_size, "Random split: validation nodes")->capture_default_str();
  app->add_option("--test-size", o.test_size, "Random split: test nodes (0 = all remaining)")
      ->capture_default_str();
}

void add_model_opts(CLI::App* app, ModelOpts& o, bool with_depth = true) {
  app->add_option("--model", o.model, "mlp | gcn | decoupled | dagnn")
      ->check(CLI::IsMember({"mlp", "gcn", "decoupled", "dagnn"}))
      ->capture_default_str();
  if (with_depth) {
    app->add_option("--k", o.k, "Propagation steps for decoupled/dagnn (default 10)");
    app->add_option("--depth", o.depth, "GCN layer count (default 2)");
  }
  app->add_option("--hidden", o.hidden, "Hidden width")->capture_default_str();
  app->add_option("--dropout", o.dropout, "Dropout rate (default 0.5 for mlp/gcn, 0.8 otherwise)");
  app->add_option("--wd", o.weight_decay, "L2 weight decay (default 5e-3 for dagnn, 5e-4 otherwise)");
  app->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--max-epochs", o.max_epochs, "Epoch limit")->capture_default_str();
  app->add_option("--patience", o.patience, "Early-stopping patience in epochs")->capture_default_str();
}

void add_run_opts(CLI::App* app, RunOpts& o, bool multi = true) {
  if (multi) {
    app->add_option("--runs", o.runs, "Independent runs (seeds seed..seed+runs-1)")->capture_default_str();
    app->add_option("--threads", o.threads, "Runs trained in parallel")->capture_default_str();
  }
  app->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  app->add_option("--output,-o", o.output, "Output file (default stdout)");
}

// ---------------------------------------------------------------------------
// Resolution helpers

template <class T>
T number(std::string_view text, const char* what) {
  T v{};
  if (!detail::parse_number(text, v)) throw InvalidArgument("bad value '" + std::string(text) + "' for " + what);
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  for (auto part : detail::split(text, ',')) out.push_back(number<T>(part, what));
  if (out.empty()) throw InvalidArgument(std::string("empty list for ") + what);
  return out;
}

DatasetBundle resolve_dataset(const std::string& name) {
  if (name.rfind("synthetic", 0) == 0) {
    SyntheticCitationSpec spec;
    if (name.size() > 9) {
      if (name[9] != ':') throw InvalidArgument("bad dataset '" + name + "' (synthetic[:seed])");
      spec.seed = number<std::uint64_t>(std::string_view(name).substr(10), "synthetic seed");
    }
    return synth_citation(spec);
  }
  if (fs::is_directory(name)) return load_dataset(name);
  if (const char* root = std::getenv("DEEPGNN_DATA")) {
    const fs::path p = fs::path(root) / name;
    if (fs::is_directory(p)) return load_dataset(p);
  }
  const fs::path builtin = fs::path(DEEPGNN_BUILTIN_DATA) / name;
  if (fs::is_directory(builtin)) return load_dataset(builtin);
  throw DataError("dataset '" + name + "' not found as a directory, under $DEEPGNN_DATA, or built in");
}

SplitSpec split_spec(const DataOpts& d, std::uint64_t seed) {
  SplitSpec s;
  s.kind = d.split == "fixed" ? SplitKind::Fixed : SplitKind::Random;
  s.train_per_class = d.train_per_class;
  s.val_size = d.val_size;
  s.test_size = d.test_size;
  s.seed = seed;
  return s;
}

TrainConfig train_config(const ModelOpts& m, std::uint64_t seed) {
  if (m.k && m.depth) throw InvalidArgument("give either --k or --depth, not both");
  TrainConfig c;
  c.model.kind = parse_model_kind(m.model);
  const bool light = c.model.kind == ModelKind::Mlp || c.model.kind == ModelKind::Gcn;
  c.model.depth = m.k ? *m.k : m.depth ? *m.depth : c.model.kind == ModelKind::Gcn ? 2 : 10;
  c.model.hidden = m.hidden;
  c.model.dropout = m.dropout.value_or(light ? 0.5 : 0.8);
  c.weight_decay = m.weight_decay.value_or(c.model.kind == ModelKind::Dagnn ? 5e-3 : 5e-4);
  if (c.weight_decay < 0.0) throw InvalidArgument("--wd must be non-negative");
  if (!(c.lr = m.lr, c.lr > 0.0)) throw InvalidArgument("--lr must be positive");
  c.max_epochs = m.max_epochs;
  c.patience = m.patience;
  c.seed = seed;
  validate(c.model);
  return c;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_train(const DataOpts& d, const ModelOpts& m, const RunOpts& r, bool grid, const std::string& ckpt) {
  const DatasetBundle b = resolve_dataset(d.dataset);
  TrainConfig cfg = train_config(m, r.seed);
  const SplitSpec split = split_spec(d, r.seed);
  json extra = json::object();
  if (grid) {
    const GridResult g = grid_search(cfg, b, split, r.runs, r.threads);
    cfg = g.best;
    extra["grid_best_val_accuracy"] = g.best_val_accuracy;
    extra["grid_trials"] = g.trials.size();
  }
  RunReport report = multi_run(cfg, b, split, r.runs, r.threads);
  json j = to_json(report);
  j["dataset"] = b.name;
  if (grid) j["grid"] = extra;
  if (!ckpt.empty()) {
    std::optional<Classifier> model;
    const TrainingData data = prepare(b, resolve_split(b, split_spec(d, derive_seed(cfg.seed, 7))));
    train(cfg, data, &model);
    CheckpointInfo info{cfg.model, b.feature_dim(), b.num_classes, derive_seed(cfg.seed, 1), to_json(cfg)};
    save_checkpoint(*model, info, ckpt);
  }
  Output out(r.output);
  out.stream() << j.dump(2) << '\n';
}

void cmd_sweep_depth(const DataOpts& d, const ModelOpts& m, const RunOpts& r, const std::string& depths) {
  const DatasetBundle b = resolve_dataset(d.dataset);
  ModelOpts mm = m;
  mm.k.reset();
  mm.depth.reset();
  const TrainConfig cfg = train_config(mm, r.seed);
  const auto list = parse_list<int>(depths, "--depths");
  const auto rows = depth_sweep(cfg, list, b, split_spec(d, r.seed), r.runs, r.threads);
  Output out(r.output);
  write_csv(out.stream(), sweep_header(), sweep_table(rows));
}

void cmd_sweep_trainsize(const DataOpts& d, const ModelOpts& m, const RunOpts& r, const std::string& sizes) {
  const DatasetBundle b = resolve_dataset(d.dataset);
  const TrainConfig cfg = train_config(m, r.seed);
  const auto list = parse_list<std::size_t>(sizes, "--sizes");
  const auto rows = train_size_sweep(cfg, list, b, split_spec(d, r.seed), r.runs, r.threads);
  Output out(r.output);
  write_csv(out.stream(), sweep_header(), sweep_table(rows));
}

int cmd_converge(const std::string& graph, const std::string& kind, double tol, std::size_t max_k,
                 const std::string& output) {
  const Graph g = synth_graph(parse_graph_spec(graph));
  std::vector<NormKind> kinds;
  if (kind == "rowavg" || kind == "both") kinds.push_back(NormKind::RowAvg);
  if (kind == "symmetric" || kind == "both") kinds.push_back(NormKind::Symmetric);
  std::vector<std::vector<std::string>> rows;
  std::string failed;
  for (NormKind nk : kinds) {
    const PropagationOperator op(g, nk);
    const auto res = power_converge(op, limit_per_component(g, nk), tol, max_k);
    for (std::size_t k = 0; k < res.residuals.size(); ++k)
      rows.push_back({to_string(nk), std::to_string(k + 1), format_double(res.residuals[k])});
    if (!res.k_converge) failed += (failed.empty() ? "" : ", ") + to_string(nk);
  }
  Output out(output);
  write_csv(out.stream(), {"kind", "k", "frobenius_residual"}, rows);
  if (!failed.empty()) {
    std::cerr << "error: no convergence within k=" << max_k << " for " << failed << '\n';
    return 3;
  }
  return 0;
}

void cmd_smoothness(const std::string& dataset, const std::string& graph, const std::string& hops,
                    const ModelOpts& m, bool train_models, const DataOpts& d, const RunOpts& r) {
  if (dataset.empty() == graph.empty()) throw InvalidArgument("give exactly one of --dataset or --graph");
  const auto list = parse_list<int>(hops, "--hops");
  for (int h : list)
    if (h < 0) throw InvalidArgument("--hops values must be non-negative");
  std::vector<std::vector<std::string>> rows;

  if (train_models) {
    if (dataset.empty()) throw InvalidArgument("--train needs --dataset");
    DataOpts dd = d;
    dd.dataset = dataset;
    const DatasetBundle b = resolve_dataset(dataset);
    ModelOpts mm = m;
    mm.k.reset();
    mm.depth.reset();
    const auto sweep = depth_sweep(train_config(mm, r.seed), list, b, split_spec(dd, r.seed), r.runs, r.threads);
    for (const auto& s : sweep) rows.push_back({s.key, format_double(s.smv_g), format_double(s.acc_mean)});
  } else {
    Graph g;
    DenseMatrix x;
    if (!graph.empty()) {
      g = synth_graph(parse_graph_spec(graph));
      x = DenseMatrix::identity(g.num_nodes());
    } else {
      const DatasetBundle b = resolve_dataset(dataset);
      g = b.graph;
      x = row_normalize(b.features);
    }
    const PropagationOperator op(g, NormKind::Symmetric);
    int at = 0;
    std::vector<int> sorted = list;
    std::sort(sorted.begin(), sorted.end());
    std::map<int, double> value;
    for (int h : sorted) {
      for (; at < h; ++at) x = propagate(op, x);
      value[h] = auto_smoothness(x, r.seed).graph_value;
    }
    for (int h : list) rows.push_back({std::to_string(h), format_double(value[h]), ""});
  }
  Output out(r.output);
  write_csv(out.stream(), {"layer_or_hop", "smv_g", "accuracy"}, rows);
}

int cmd_gradcheck(const std::string& which, int k, int depth, const std::string& graph, std::size_t features,
                  std::size_t hidden, std::uint64_t seed, const std::string& output) {
  constexpr double kThreshold = 1e-4;
  std::vector<ModelConfig> configs;
  auto add = [&](ModelKind kind, int dk) {
    if (which == "all" || which == to_string(kind)) configs.push_back({kind, dk, hidden, 0.0});
  };
  add(ModelKind::Mlp, 0);
  add(ModelKind::Gcn, depth);
  add(ModelKind::Decoupled, k);
  add(ModelKind::Dagnn, k);
  for (const auto& c : configs) validate(c);
  const auto fx = make_gradcheck_fixture(parse_graph_spec(graph), features, seed);
  json models = json::array();
  bool pass = true;
  for (const auto& c : configs) {
    const auto res = gradient_check(c, fx.graph, fx.features, fx.labels, fx.num_classes, seed);
    const bool ok = res.max_rel_error < kThreshold;
    pass = pass && ok;
    models.push_back({{"model", to_string(c.kind)},
                      {"depth_or_k", c.depth},
                      {"max_rel_error", res.max_rel_error},
                      {"worst_tensor", res.worst_tensor},
                      {"worst_index", res.worst_index},
                      {"analytic", res.analytic},
                      {"numeric", res.numeric},
                      {"coordinates_checked", res.coordinates_checked},
                      {"pass", ok}});
  }
  Output out(output);
  out.stream() << json{{"threshold", kThreshold}, {"graph", graph}, {"models", models}, {"pass", pass}}.dump(2)
               << '\n';
  if (!pass) std::cerr << "error: gradient check above " << kThreshold << '\n';
  return pass ? 0 : 3;
}

int cmd_eigen(const std::string& graph, const std::string& output) {
  const Graph g = synth_graph(parse_graph_spec(graph));
  const Lemma2Report l2 = verify_lemma2(g, 1e-10);
  json j = {{"graph", graph},
            {"n", g.num_nodes()},
            {"m", g.num_edges()},
            {"dominant_pair_residuals", l2.residuals()},
            {"lambda2_rowavg", l2.lambda2_row_avg},
            {"lambda2_symmetric", l2.lambda2_symmetric}};
  if (g.num_nodes() <= 200) {
    const Lemma1Report l1 = verify_lemma1(g, 1e-8);
    j["eigenpair_mapping"] = {{"max_right_residual", l1.max_right_residual},
                              {"max_left_residual", l1.max_left_residual},
                              {"eigenvalues", l1.eigenvalues}};
  }
  Output out(output);
  out.stream() << j.dump(2) << '\n';
  return 0;
}

void cmd_stats(const std::string& dataset, const std::string& output) {
  const DatasetBundle b = resolve_dataset(dataset);
  json j = {{"name", b.name},
            {"n", b.num_nodes()},
            {"m", b.graph.num_edges()},
            {"c", b.num_classes},
            {"d", b.feature_dim()},
            {"edge_density", edge_density(b.graph)},
            {"components", component_count(b.graph)},
            {"largest_component", largest_connected_component(b).num_nodes()}};
  if (b.fixed_split)
    j["fixed_split"] = {{"train", b.fixed_split->train.size()},
                        {"val", b.fixed_split->val.size()},
                        {"test", b.fixed_split->test.size()}};
  Output out(output);
  out.stream() << j.dump(2) << '\n';
}

constexpr const char* kFooter = R"(CSV schemas:
  sweep-depth, sweep-trainsize   key,acc_mean,acc_std,smv_g
      key is the depth (0 = MLP) or the training nodes per class; acc_* over runs
      on the test split; smv_g is the mean SMV_G of the final representations.
  converge                       kind,k,frobenius_residual
      kind is rowavg or symmetric; residual is ||A^k - limit||_F.
  smoothness                     layer_or_hop,smv_g,accuracy
      accuracy is empty unless --train is given.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or verification failure.
Environment: DEEPGNN_DATA is searched for dataset names.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep graph neural network experiments: training, sweeps and numerical checks"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.set_version_flag("--version", "deepgnn 1.0.0");

  DataOpts data;
  ModelOpts model;
  RunOpts run;

  auto* train = app.add_subcommand("train", "Train a model over several seeds; prints a JSON run report");
  add_data_opts(train, data);
  add_model_opts(train, model);
  add_run_opts(train, run);
  bool grid = false;
  std::string ckpt;
  train->add_flag("--grid", grid, "Grid-search k, weight decay and dropout by mean validation accuracy first");
  train->add_option("--save-checkpoint", ckpt, "Write the seed's trained model to this file");

  auto* sweep_depth = app.add_subcommand("sweep-depth", "Accuracy and smoothness against depth (CSV)");
  add_data_opts(sweep_depth, data);
  add_model_opts(sweep_depth, model, false);
  add_run_opts(sweep_depth, run);
  std::string depths = "1,2,3,4,5,6,7,8";
  sweep_depth->add_option("--depths", depths, "Comma-separated depths or k values; 0 = MLP")
      ->capture_default_str();

  auto* sweep_size = app.add_subcommand("sweep-trainsize", "Accuracy against training nodes per class (CSV)");
  add_data_opts(sweep_size, data);
  add_model_opts(sweep_size, model);
  add_run_opts(sweep_size, run);
  std::string sizes = "1,2,3,4,5,10,20";
  sweep_size->add_option("--sizes", sizes, "Comma-separated training nodes per class")->capture_default_str();

  auto* converge = app.add_subcommand("converge", "Residual of operator powers against the closed-form limit (CSV)");
  std::string graph;
  std::string kind = "both";
  double tol = 1e-6;
  std::size_t max_k = 5000;
  std::string output;
  converge->add_option("--graph", graph, "path:n | cycle:n | complete:n | sbm:s1,..,sB,p_in,p_out,seed")->required();
  converge->add_option("--kind", kind, "rowavg | symmetric | both")
      ->check(CLI::IsMember({"rowavg", "symmetric", "both"}))
      ->capture_default_str();
  converge->add_option("--tol", tol, "Stop once the residual is below this")->capture_default_str();
  converge->add_option("--max-k", max_k, "Largest power tried")->capture_default_str();
  converge->add_option("--output,-o", output, "Output file (default stdout)");

  auto* smooth = app.add_subcommand("smoothness", "SMV_G of propagated features or trained models (CSV)");
  std::string smooth_dataset;
  std::string hops = "0,1,2,4,8,16,32,64";
  bool smooth_train = false;
  smooth->add_option("--dataset", smooth_dataset, "Dataset (see train)");
  smooth->add_option("--graph", graph, "Synthetic graph spec; features are one-hot node ids");
  smooth->add_option("--hops", hops, "Comma-separated hop counts or depths")->capture_default_str();
  smooth->add_flag("--train", smooth_train, "Train --model at each depth instead of propagating raw features");
  smooth->add_option("--split", data.split, "fixed or random")->check(CLI::IsMember({"fixed", "random"}));
  add_model_opts(smooth, model, false);
  add_run_opts(smooth, run);

  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic gradients against central differences (JSON)");
  std::string which = "all";
  int gk = 5, gdepth = 3;
  std::string ggraph = "sbm:14,13,13,0.3,0.05,7";
  std::size_t gfeatures = 8, ghidden = 16;
  gradcheck->add_option("--model", which, "all | mlp | gcn | decoupled | dagnn")
      ->check(CLI::IsMember({"all", "mlp", "gcn", "decoupled", "dagnn"}))
      ->capture_default_str();
  gradcheck->add_option("--k", gk, "Propagation steps")->capture_default_str();
  gradcheck->add_option("--depth", gdepth, "GCN layers")->capture_default_str();
  gradcheck->add_option("--graph", ggraph, "Synthetic graph spec")->capture_default_str();
  gradcheck->add_option("--features", gfeatures, "Feature dimension")->capture_default_str();
  gradcheck->add_option("--hidden", ghidden, "Hidden width")->capture_default_str();
  add_run_opts(gradcheck, run, false);

  auto* eigen = app.add_subcommand("eigen", "Dominant eigenpair and eigenpair-mapping residuals (JSON)");
  eigen->add_option("--graph", graph, "Synthetic graph spec")->required();
  eigen->add_option("--output,-o", output, "Output file (default stdout)");

  auto* stats = app.add_subcommand("stats", "Dataset statistics (JSON)");
  std::string stats_dataset;
  stats->add_option("--dataset", stats_dataset, "Dataset (see train)")->required();
  stats->add_option("--output,-o", output, "Output file (default stdout)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic citation-like dataset directory");
  SyntheticCitationSpec sspec;
  std::string synth_dir;
  synth->add_option("--output,-o", synth_dir, "Target directory")->required();
  synth->add_option("--classes", sspec.classes, "Classes")->capture_default_str();
  synth->add_option("--nodes-per-class", sspec.nodes_per_class, "Nodes per class")->capture_default_str();
  synth->add_option("--p-in", sspec.p_in, "Within-class edge probability")->capture_default_str();
  synth->add_option("--p-out", sspec.p_out, "Between-class edge probability")->capture_default_str();
  synth->add_option("--feature-dim", sspec.feature_dim, "Vocabulary size")->capture_default_str();
  synth->add_option("--words", sspec.words_per_node, "Words per node")->capture_default_str();
  synth->add_option("--signal", sspec.signal, "Share of words from the class topic")->capture_default_str();
  synth->add_option("--seed", sspec.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      cmd_train(data, model, run, grid, ckpt);
    } else if (*sweep_depth) {
      cmd_sweep_depth(data, model, run, depths);
    } else if (*sweep_size) {
      cmd_sweep_trainsize(data, model, run, sizes);
    } else if (*converge) {
      return cmd_converge(graph, kind, tol, max_k, output);
    } else if (*smooth) {
      cmd_smoothness(smooth_dataset, graph, hops, model, smooth_train, data, run);
    } else if (*gradcheck) {
      return cmd_gradcheck(which, gk, gdepth, ggraph, gfeatures, ghidden, run.seed, run.output);
    } else if (*eigen) {
      return cmd_eigen(graph, output);
    } else if (*stats) {
      cmd_stats(stats_dataset, output);
    } else if (*synth) {
      save_dataset(synth_citation(sspec), synth_dir);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
