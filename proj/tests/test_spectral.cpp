#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "deepgnn/spectral.hpp"
#include "test_util.hpp"

using namespace deepgnn;

namespace {

Graph p3() { return build_graph({{0, 1}, {1, 2}}, 3); }
Graph k2() { return build_graph({{0, 1}}, 2); }

// Dense power iteration Â^(k+1) = Â^k Â until the Frobenius change is below 1e-12.
DenseMatrix dense_power_limit(const DenseMatrix& a) {
  DenseMatrix p = a;
  for (int it = 0; it < 100000; ++it) {
    DenseMatrix next = matmul(p, a);
    const double change = frobenius_distance(next, p);
    p = std::move(next);
    if (change < 1e-12) return p;
  }
  ADD_FAILURE() << "dense power iteration did not settle";
  return p;
}

// Roots of det(λI − A) for a 3×3 matrix: λ³ − tr λ² + c₂ λ − det, by
// bisection on sign changes over a fine grid of [-1.5, 1.5].
std::vector<double> cubic_eigenvalues(const DenseMatrix& a) {
  const double tr = a(0, 0) + a(1, 1) + a(2, 2);
  const double c2 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0) +
                    a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  const double det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
                     a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
                     a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
  auto f = [&](double l) { return ((l - tr) * l + c2) * l - det; };
  std::vector<double> roots;
  const int steps = 30000;
  for (int s = 0; s < steps; ++s) {
    double lo = -1.5 + 3.0 * s / steps, hi = -1.5 + 3.0 * (s + 1) / steps;
    if (f(lo) == 0.0) {
      roots.push_back(lo);
      continue;
    }
    if ((f(lo) < 0) == (f(hi) < 0)) continue;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((f(lo) < 0) == (f(mid) < 0) ? lo : hi) = mid;
    }
    roots.push_back(0.5 * (lo + hi));
  }
  return roots;
}

double second_abs(std::vector<double> eig) {
  std::sort(eig.begin(), eig.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });
  return std::abs(eig.at(1));
}

}  // namespace

TEST(Limits, SingleEdge) {
  for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric}) {
    const auto lim = limit_matrix(k2(), kind);
    for (double v : lim.dense.values()) EXPECT_NEAR(v, 0.5, 1e-15);
  }
}

TEST(Limits, PathRowAverageMatchesPowerIteration) {
  const auto lim = limit_row_avg(p3()).dense;
  const auto oracle = dense_power_limit(PropagationOperator(p3(), NormKind::RowAvg).to_dense());
  EXPECT_LT(max_abs_diff(lim, oracle), 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(lim(i, 0), 2.0 / 7.0, 1e-15);
    EXPECT_NEAR(lim(i, 1), 3.0 / 7.0, 1e-15);
    EXPECT_NEAR(lim(i, 2), 2.0 / 7.0, 1e-15);
  }
}

TEST(Limits, PathSymmetricMatchesPowerIteration) {
  const auto lim = limit_symmetric(p3()).dense;
  const auto oracle = dense_power_limit(PropagationOperator(p3(), NormKind::Symmetric).to_dense());
  EXPECT_LT(max_abs_diff(lim, oracle), 1e-10);
  EXPECT_NEAR(lim(0, 1), 0.349927106111883, 1e-14);  // √6/7
  EXPECT_NEAR(lim(1, 1), 3.0 / 7.0, 1e-15);
}

TEST(Limits, CompleteGraphRowsUniform) {
  const auto lim = limit_row_avg(synth_graph(parse_graph_spec("complete:3"))).dense;
  for (double v : lim.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Limits, DisconnectedRejected) {
  const Graph g = build_graph({{0, 1}, {2, 3}}, 4);
  EXPECT_THROW(limit_row_avg(g), InvalidArgument);
  EXPECT_THROW(limit_symmetric(g), InvalidArgument);
}

TEST(Limits, RowAverageRowsIdenticalSymmetricRankOne) {
  for (const auto& spec : test_util::small_graph_suite()) {
    const Graph g = synth_graph(spec);
    const auto r = limit_row_avg(g).dense;
    for (std::size_t i = 1; i < r.rows(); ++i)
      for (std::size_t j = 0; j < r.cols(); ++j) EXPECT_EQ(r(i, j), r(0, j));
    auto eig = jacobi_eigen(limit_symmetric(g).dense).values;
    std::sort(eig.begin(), eig.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
    if (eig.size() > 1) {
      EXPECT_LT(std::abs(eig[1]), 1e-10 * std::abs(eig[0]));
    }
  }
}

TEST(Limits, EdgeOrderInvariant) {
  const Graph g = synth_graph(parse_graph_spec("sbm:10,10,0.4,0.1,2"));
  auto edges = g.edges();
  Rng(4).shuffle(edges);
  for (auto& e : edges)
    if (e.first % 2) std::swap(e.first, e.second);
  const Graph h = build_graph(edges, g.num_nodes());
  for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric})
    EXPECT_EQ(limit_matrix(g, kind).dense, limit_matrix(h, kind).dense);
}

TEST(Limits, PerComponentMatchesPowerIteration) {
  const Graph g = build_graph({{0, 1}, {1, 2}, {3, 4}, {4, 5}, {5, 3}, {5, 6}}, 8);  // includes an isolated node
  for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric}) {
    const auto oracle = dense_power_limit(PropagationOperator(g, kind).to_dense());
    EXPECT_LT(max_abs_diff(limit_per_component(g, kind).dense, oracle), 1e-10);
    const auto res = power_converge(PropagationOperator(g, kind), limit_per_component(g, kind), 1e-9);
    EXPECT_TRUE(res.k_converge.has_value());
  }
}

TEST(PowerConverge, AlreadyAtLimit) {
  for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric}) {
    const auto res = power_converge(PropagationOperator(k2(), kind), limit_matrix(k2(), kind), 1e-12);
    EXPECT_EQ(res.k_converge, 1u);
  }
  const Graph k5 = synth_graph(parse_graph_spec("complete:5"));
  EXPECT_EQ(power_converge(PropagationOperator(k5, NormKind::RowAvg), limit_row_avg(k5), 1e-12).k_converge, 1u);
}

TEST(PowerConverge, PathMonotone) {
  const auto res = power_converge(PropagationOperator(p3(), NormKind::RowAvg), limit_row_avg(p3()), 1e-8);
  ASSERT_TRUE(res.k_converge.has_value());
  EXPECT_LT(*res.k_converge, 200u);
  EXPECT_EQ(res.residuals.size(), *res.k_converge);
  for (std::size_t k = 1; k < res.residuals.size(); ++k) EXPECT_LE(res.residuals[k], res.residuals[k - 1]);
}

TEST(PowerConverge, MismatchedLimitRejected) {
  EXPECT_THROW(power_converge(PropagationOperator(p3(), NormKind::RowAvg), limit_symmetric(p3())), InvalidArgument);
}

TEST(PowerConverge, RateBoundedBySecondEigenvalue) {
  for (const auto& spec : test_util::small_graph_suite()) {
    const Graph g = synth_graph(spec);
    for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric}) {
      const PropagationOperator op(g, kind);
      const auto res = power_converge(op, limit_matrix(g, kind), 1e-6);
      ASSERT_TRUE(res.k_converge.has_value()) << spec.num_nodes();
      const double lambda2 = second_eigenvalue(op).lambda2_abs;
      if (lambda2 < 1e-8 || res.residuals.size() < 4) continue;
      // least-squares slope of log residual against k over the recorded tail
      const std::size_t start = res.residuals.size() / 2;
      double sk = 0, sy = 0, skk = 0, sky = 0, cnt = 0;
      for (std::size_t k = start; k < res.residuals.size(); ++k) {
        const double y = std::log(res.residuals[k]);
        const double x = static_cast<double>(k + 1);
        sk += x, sy += y, skk += x * x, sky += x * y, cnt += 1;
      }
      if (cnt < 2) continue;
      const double slope = (cnt * sky - sk * sy) / (cnt * skk - sk * sk);
      EXPECT_LE(slope, std::log(lambda2) + 0.05) << to_string(kind) << " n=" << g.num_nodes();
    }
  }
}

TEST(SecondEigenvalue, RankOneOperators) {
  const Graph k4 = synth_graph(parse_graph_spec("complete:4"));
  for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric}) {
    EXPECT_NEAR(second_eigenvalue(PropagationOperator(k4, kind)).lambda2_abs, 0.0, 1e-7);
    EXPECT_NEAR(second_eigenvalue(PropagationOperator(k2(), kind)).lambda2_abs, 0.0, 1e-7);
  }
}

TEST(SecondEigenvalue, PathMatchesCharacteristicPolynomial) {
  const PropagationOperator op(p3(), NormKind::RowAvg);
  const auto roots = cubic_eigenvalues(op.to_dense());
  ASSERT_EQ(roots.size(), 3u);
  const double oracle = second_abs(roots);
  const auto got = second_eigenvalue(op);
  EXPECT_GT(got.lambda2_abs, 0.0);
  EXPECT_LT(got.lambda2_abs, 1.0);
  EXPECT_NEAR(got.lambda2_abs, oracle, 1e-6);
  EXPECT_LT(got.residual, 1e-6);
  // same spectrum for the symmetric operator
  EXPECT_NEAR(second_eigenvalue(PropagationOperator(p3(), NormKind::Symmetric)).lambda2_abs, oracle, 1e-6);
}

TEST(SecondEigenvalue, MatchesJacobiOnSuite) {
  for (const auto& spec : test_util::small_graph_suite()) {
    const Graph g = synth_graph(spec);
    const auto oracle = second_abs(jacobi_eigen(PropagationOperator(g, NormKind::Symmetric).to_dense()).values);
    for (NormKind kind : {NormKind::RowAvg, NormKind::Symmetric})
      EXPECT_NEAR(second_eigenvalue(PropagationOperator(g, kind)).lambda2_abs, oracle, 1e-5);
  }
}

TEST(JacobiEigen, ReconstructsMatrix) {
  auto a = test_util::random_matrix(12, 12, 9);
  a = matmul(a, transpose(a));
  const auto eig = jacobi_eigen(a);
  EXPECT_TRUE(std::is_sorted(eig.values.begin(), eig.values.end()));
  DenseMatrix lam(12, 12);
  for (std::size_t i = 0; i < 12; ++i) lam(i, i) = eig.values[i];
  const auto rebuilt = matmul(matmul(eig.vectors, lam), transpose(eig.vectors));
  EXPECT_LT(max_abs_diff(rebuilt, a), 1e-12 * frobenius_norm(a));
  EXPECT_LT(max_abs_diff(matmul_at_b(eig.vectors, eig.vectors), DenseMatrix::identity(12)), 1e-13);
}

TEST(Lemma2, SmallGraphs) {
  EXPECT_LT(verify_lemma2(p3()).max_residual(), 1e-12);
  EXPECT_LT(verify_lemma2(k2()).max_residual(), 1e-12);
}

TEST(Lemma2, SeededSbm) {
  const Graph g = synth_graph(parse_graph_spec("sbm:20,20,0.3,0.05,3"));
  ASSERT_TRUE(is_connected(g));
  const auto rep = verify_lemma2(g, 1e-10);
  EXPECT_LT(rep.max_residual(), 1e-10);
  EXPECT_LT(rep.lambda2_row_avg, 1.0);
  EXPECT_LT(rep.lambda2_symmetric, 1.0);
}

TEST(Lemma2, DisconnectedRejected) {
  EXPECT_THROW(verify_lemma2(build_graph({{0, 1}}, 3)), InvalidArgument);
}

TEST(Lemma1, Residuals) {
  const auto k = verify_lemma1(k2());
  EXPECT_LT(std::max(k.max_right_residual, k.max_left_residual), 1e-12);
  const auto p = verify_lemma1(p3());
  EXPECT_LT(std::max(p.max_right_residual, p.max_left_residual), 1e-10);
  const Graph g = synth_graph(parse_graph_spec("sbm:15,15,0.3,0.05,1"));
  ASSERT_TRUE(is_connected(g));
  const auto s = verify_lemma1(g, 1e-8);
  EXPECT_LT(std::max(s.max_right_residual, s.max_left_residual), 1e-8);
  EXPECT_NEAR(s.eigenvalues.back(), 1.0, 1e-12);
}

TEST(Lemma1, SizeCap) {
  EXPECT_THROW(verify_lemma1(synth_graph(parse_graph_spec("path:201"))), InvalidArgument);
}
