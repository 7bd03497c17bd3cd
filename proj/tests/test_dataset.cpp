#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "deepgnn/dataset.hpp"
#include "test_util.hpp"

using namespace deepgnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "deepgnn_tests" / (std::string(info->test_suite_name()) + "_" +
                                                               info->name() + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path toy_dir() { return fs::path(DEEPGNN_SOURCE_DIR) / "data" / "toy"; }

DatasetBundle two_components() {
  DatasetBundle b;
  b.name = "two";
  b.graph = build_graph({{0, 1}, {1, 2}, {3, 4}}, 5);
  b.features = DenseMatrix{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}};
  b.labels = {0, 1, 0, 1, 1};
  b.num_classes = 2;
  b.fixed_split = NodeSplit{{0, 3}, {1, 4}, {2}};
  return b;
}

}  // namespace

TEST(LoadDataset, Toy) {
  const auto b = load_dataset(toy_dir());
  EXPECT_EQ(b.name, "toy");
  EXPECT_EQ(b.num_nodes(), 3u);
  EXPECT_EQ(b.graph.num_edges(), 2u);
  EXPECT_EQ(b.num_classes, 2u);
  EXPECT_EQ(b.feature_dim(), 2u);
  EXPECT_NEAR(edge_density(b.graph), 4.0 / 9.0, 1e-15);
  EXPECT_FALSE(b.fixed_split.has_value());
}

TEST(LoadDataset, MissingDirectory) { EXPECT_THROW(load_dataset("/nonexistent/deepgnn"), DataError); }

TEST(LoadDataset, MetaPerturbationNamesField) {
  const auto b = two_components();
  for (const char* key : {"n", "m", "c", "d"}) {
    const auto dir = scratch(key);
    save_dataset(b, dir);
    auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
    meta[key] = meta[key].get<std::size_t>() + 1;
    write_file(dir / "meta.json", meta.dump());
    try {
      load_dataset(dir);
      FAIL() << key;
    } catch (const DataError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find(std::string(" ") + key + " (meta"), std::string::npos) << msg;
    }
  }
}

TEST(LoadDataset, BadFeatureLineReportsLocation) {
  const auto dir = scratch("bad");
  save_dataset(two_components(), dir);
  write_file(dir / "features.csv", "1,0\n2,0\n3,x\n4,0\n5,0\n");
  try {
    load_dataset(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("features.csv:3"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, RaggedFeatures) {
  const auto dir = scratch("ragged");
  save_dataset(two_components(), dir);
  write_file(dir / "features.csv", "1,0\n2,0\n3\n4,0\n5,0\n");
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(LoadDataset, EdgeOutOfRangeIsDataError) {
  const auto dir = scratch("edge");
  save_dataset(two_components(), dir);
  write_file(dir / "edges.txt", "0 1\n1 9\n");
  fs::remove(dir / "meta.json");
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(RoundTrip, SaveLoadExact) {
  auto b = two_components();
  b.features(2, 1) = 0.1 + 0.2;
  b.features(4, 0) = -1.0 / 3.0;
  const auto dir = scratch("rt");
  save_dataset(b, dir);
  const auto r = load_dataset(dir);
  EXPECT_EQ(r.graph, b.graph);
  EXPECT_EQ(r.features, b.features);
  EXPECT_EQ(r.labels, b.labels);
  EXPECT_EQ(r.num_classes, b.num_classes);
  EXPECT_EQ(r.fixed_split, b.fixed_split);
}

TEST(RoundTrip, SyntheticCitation) {
  SyntheticCitationSpec spec;
  spec.nodes_per_class = 40;
  spec.classes = 3;
  spec.feature_dim = 60;
  spec.val_size = 20;
  spec.test_size = 30;
  const auto b = synth_citation(spec);
  const auto dir = scratch("synth");
  save_dataset(b, dir);
  const auto r = load_dataset(dir);
  EXPECT_EQ(r.graph, b.graph);
  EXPECT_EQ(r.features, b.features);
  EXPECT_EQ(r.fixed_split, b.fixed_split);
}

TEST(Validate, Errors) {
  auto b = two_components();
  b.labels[0] = 2;
  EXPECT_THROW(validate_bundle(b), DataError);
  b = two_components();
  b.num_classes = 3;
  EXPECT_THROW(validate_bundle(b), DataError);
  b = two_components();
  b.features = DenseMatrix(4, 2);
  EXPECT_THROW(validate_bundle(b), DataError);
  b = two_components();
  b.fixed_split->test.push_back(5);
  EXPECT_THROW(validate_bundle(b), DataError);
}

TEST(LargestComponent, KeepsBiggest) {
  const auto l = largest_connected_component(two_components());
  EXPECT_EQ(l.num_nodes(), 3u);
  EXPECT_EQ(l.graph.num_edges(), 2u);
  EXPECT_EQ(test_util::vec(l.graph.degrees()), (std::vector<double>{2, 3, 2}));
  EXPECT_EQ(l.features, (DenseMatrix{{1, 0}, {2, 0}, {3, 0}}));
  EXPECT_EQ(l.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(l.fixed_split, (NodeSplit{{0}, {1}, {2}}));
  EXPECT_NO_THROW(validate_bundle(l));
}

TEST(LargestComponent, SecondComponentRelabeled) {
  auto b = two_components();
  b.graph = build_graph({{0, 1}, {2, 3}, {3, 4}}, 5);
  const auto l = largest_connected_component(b);
  EXPECT_EQ(l.features, (DenseMatrix{{3, 0}, {4, 0}, {5, 0}}));
  EXPECT_EQ(l.fixed_split, (NodeSplit{{1}, {2}, {0}}));
}

TEST(LargestComponent, IdempotentAndIdentityWhenConnected) {
  const auto once = largest_connected_component(two_components());
  const auto twice = largest_connected_component(once);
  EXPECT_EQ(twice.graph, once.graph);
  EXPECT_EQ(twice.features, once.features);
  EXPECT_EQ(twice.labels, once.labels);
  EXPECT_EQ(twice.fixed_split, once.fixed_split);
}

TEST(RowNormalize, L1) {
  const auto r = row_normalize(DenseMatrix{{1, 3}, {0, 0}, {-2, 2}});
  EXPECT_EQ(r, (DenseMatrix{{0.25, 0.75}, {0, 0}, {-0.5, 0.5}}));
}

TEST(Export, EmbeddingsShape) {
  const auto path = scratch("emb.csv");
  const std::vector<std::size_t> ids{0, 1};
  export_embeddings(DenseMatrix{{1.5, -2}, {0, 3}}, ids, path);
  EXPECT_EQ(read_file(path), "node_id,x0,x1\n0,1.5,-2\n1,0,3\n");
}

TEST(Export, EmptyIdsHeaderOnly) {
  const auto path = scratch("empty.csv");
  export_embeddings(DenseMatrix(3, 2), {}, path);
  EXPECT_EQ(read_file(path), "node_id,x0,x1\n");
  const auto t = read_embeddings(path);
  EXPECT_TRUE(t.ids.empty());
}

TEST(Export, FullPrecisionRoundTrip) {
  const auto x = test_util::random_matrix(20, 4, 17);
  std::vector<std::size_t> ids{3, 0, 19, 7};
  const auto path = scratch("rt.csv");
  export_embeddings(x, ids, path);
  const auto t = read_embeddings(path);
  EXPECT_EQ(t.ids, ids);
  EXPECT_EQ(t.values, gather_rows(x, ids));
}

TEST(Export, Csv) {
  const auto path = scratch("rows.csv");
  export_csv({"a", "b"}, {{"1", "2"}, {"3", "4"}}, path);
  EXPECT_EQ(read_file(path), "a,b\n1,2\n3,4\n");
  EXPECT_THROW(export_csv({"a"}, {}, "/nonexistent/dir/x.csv"), DataError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(SyntheticCitation, DeterministicWithSplit) {
  const auto a = synth_citation({});
  const auto b = synth_citation({});
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.features, b.features);
  ASSERT_TRUE(a.fixed_split.has_value());
  EXPECT_EQ(a.fixed_split->train.size(), 7u * 20);
  EXPECT_EQ(a.fixed_split->val.size(), 300u);
  EXPECT_EQ(a.fixed_split->test.size(), 500u);
  EXPECT_NO_THROW(validate_bundle(a));
  SyntheticCitationSpec other;
  other.seed = 1;
  EXPECT_NE(synth_citation(other).graph, a.graph);
}
