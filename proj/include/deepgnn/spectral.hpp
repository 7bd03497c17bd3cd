#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/graph.hpp"
#include "deepgnn/random.hpp"

namespace deepgnn {

/// Dense cap for every routine in this header that materializes Â^k or Π.
inline constexpr std::size_t kDenseSpectralCap = 2000;

/// Infinite-power limit of a normalized operator on a connected graph.
struct LimitMatrix {
  NormKind kind;
  DenseMatrix dense;
};

namespace detail {

inline void require_connected(const Graph& g, const char* what) {
  if (g.num_nodes() == 0) throw InvalidArgument(std::string(what) + ": empty graph");
  if (!is_connected(g))
    throw InvalidArgument(std::string(what) +
                          ": graph is disconnected; apply per connected component "
                          "(see limit_per_component)");
}

inline void require_dense_cap(std::size_t n, const char* what) {
  if (n > kDenseSpectralCap)
    throw InvalidArgument(std::string(what) + ": n=" + std::to_string(n) + " exceeds dense cap " +
                          std::to_string(kDenseSpectralCap));
}

// Closed-form limit restricted to the node subset `nodes`, written into `out`.
inline void write_limit_block(const Graph& g, NormKind kind, const std::vector<std::size_t>& nodes,
                              DenseMatrix& out) {
  double total = 0.0;
  for (std::size_t v : nodes) total += g.degree(v);
  for (std::size_t i : nodes)
    for (std::size_t j : nodes)
      out(i, j) = kind == NormKind::RowAvg ? g.degree(j) / total
                                           : std::sqrt(g.degree(i) * g.degree(j)) / total;
}

}  // namespace detail

/// Π⊕: every row equals the degree vector normalized to sum one.
inline LimitMatrix limit_row_avg(const Graph& g) {
  detail::require_connected(g, "limit_row_avg");
  detail::require_dense_cap(g.num_nodes(), "limit_row_avg");
  std::vector<std::size_t> all(g.num_nodes());
  std::iota(all.begin(), all.end(), 0);
  LimitMatrix lim{NormKind::RowAvg, DenseMatrix(g.num_nodes(), g.num_nodes())};
  detail::write_limit_block(g, NormKind::RowAvg, all, lim.dense);
  return lim;
}

/// Π⊙ = u uᵀ with u the unit vector along D̃^(1/2) eᵀ, i.e.
/// entry (i,j) = √(d̃ᵢ d̃ⱼ) / Σ d̃.
inline LimitMatrix limit_symmetric(const Graph& g) {
  detail::require_connected(g, "limit_symmetric");
  detail::require_dense_cap(g.num_nodes(), "limit_symmetric");
  std::vector<std::size_t> all(g.num_nodes());
  std::iota(all.begin(), all.end(), 0);
  LimitMatrix lim{NormKind::Symmetric, DenseMatrix(g.num_nodes(), g.num_nodes())};
  detail::write_limit_block(g, NormKind::Symmetric, all, lim.dense);
  return lim;
}

inline LimitMatrix limit_matrix(const Graph& g, NormKind kind) {
  return kind == NormKind::RowAvg ? limit_row_avg(g) : limit_symmetric(g);
}

/// Block-diagonal limit for a possibly disconnected graph: the closed form is
/// applied to each connected component separately.
inline LimitMatrix limit_per_component(const Graph& g, NormKind kind) {
  detail::require_dense_cap(g.num_nodes(), "limit_per_component");
  const auto labels = connected_components(g);
  const std::size_t k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t v = 0; v < labels.size(); ++v) members[labels[v]].push_back(v);
  LimitMatrix lim{kind, DenseMatrix(g.num_nodes(), g.num_nodes())};
  for (const auto& comp : members) detail::write_limit_block(g, kind, comp, lim.dense);
  return lim;
}

struct ConvergenceResult {
  std::optional<std::size_t> k_converge;  // empty if max_k was exhausted
  std::vector<double> residuals;          // residuals[k-1] = ‖Â^k − Π‖_F
};

/// Smallest k ≤ max_k with ‖Â^k − Π‖_F < tol, by repeated sparse
/// multiplication Â^(k+1) = Â · Â^k. Works for disconnected graphs when the
/// limit comes from limit_per_component.
inline ConvergenceResult power_converge(const PropagationOperator& op, const LimitMatrix& limit,
                                        double tol = 1e-6, std::size_t max_k = 5000) {
  const std::size_t n = op.num_nodes();
  detail::require_dense_cap(n, "power_converge");
  if (!(tol > 0.0)) throw InvalidArgument("power_converge: tol must be positive");
  if (limit.kind != op.kind() || limit.dense.rows() != n || limit.dense.cols() != n)
    throw InvalidArgument("power_converge: limit does not match operator");
  ConvergenceResult result;
  DenseMatrix power = op.to_dense();
  for (std::size_t k = 1; k <= max_k; ++k) {
    const double r = frobenius_distance(power, limit.dense);
    result.residuals.push_back(r);
    if (r < tol) {
      result.k_converge = k;
      break;
    }
    if (k < max_k) power = propagate(op, power);
  }
  return result;
}

namespace detail {

// Weighted inner product under which the operator is self-adjoint:
// D̃ for the row-averaging operator (a reversible chain), identity otherwise.
inline double weighted_dot(const PropagationOperator& op, std::span<const double> a,
                           std::span<const double> b) {
  const auto deg = op.graph().degrees();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (op.kind() == NormKind::RowAvg ? deg[i] : 1.0) * a[i] * b[i];
  return s;
}

// x ↦ (Â − dominant rank-one part) x, using the analytic eigenpair for eigenvalue 1.
inline DenseMatrix apply_deflated(const PropagationOperator& op, const DenseMatrix& x) {
  DenseMatrix y = propagate(op, x);
  const auto deg = op.graph().degrees();
  const double total = op.graph().total_degree();
  if (op.kind() == NormKind::RowAvg) {
    // Π⊕ x = eᵀ (π · x)
    double pix = 0.0;
    for (std::size_t i = 0; i < deg.size(); ++i) pix += deg[i] / total * x(i, 0);
    for (std::size_t i = 0; i < deg.size(); ++i) y(i, 0) -= pix;
  } else {
    // Π⊙ x = u (u · x), u = D̃^(1/2) e / √Σd̃
    double ux = 0.0;
    for (std::size_t i = 0; i < deg.size(); ++i) ux += std::sqrt(deg[i] / total) * x(i, 0);
    for (std::size_t i = 0; i < deg.size(); ++i) y(i, 0) -= std::sqrt(deg[i] / total) * ux;
  }
  return y;
}

}  // namespace detail

struct SecondEigenvalue {
  double lambda2_abs = 0.0;
  double residual = 0.0;  // ‖B²x − νx‖ / ν at the final iterate (absolute when ν ≈ 0)
  std::size_t iterations = 0;
};

/// |λ₂| by power iteration on B² where B is the operator with its known
/// dominant eigenpair removed. Squaring removes sign oscillation between ±λ;
/// iterating in the inner product that makes B self-adjoint makes the
/// Rayleigh quotient exact at convergence.
inline SecondEigenvalue second_eigenvalue(const PropagationOperator& op, double rel_tol = 1e-6,
                                          std::size_t max_iter = 2'000'000,
                                          std::uint64_t seed = 0x5eed) {
  const Graph& g = op.graph();
  detail::require_connected(g, "second_eigenvalue");
  detail::require_dense_cap(g.num_nodes(), "second_eigenvalue");
  const std::size_t n = g.num_nodes();
  if (n == 1) return {0.0, 0.0, 0};

  Rng rng(seed);
  DenseMatrix x(n, 1);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  x = detail::apply_deflated(op, x);  // strip the dominant component up front

  auto wnorm = [&](const DenseMatrix& v) {
    return std::sqrt(detail::weighted_dot(op, v.values(), v.values()));
  };
  SecondEigenvalue out;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const double xn = wnorm(x);
    if (xn == 0.0) return {0.0, 0.0, it};
    for (double& v : x.values()) v /= xn;
    DenseMatrix y = detail::apply_deflated(op, detail::apply_deflated(op, x));
    const double nu = std::max(detail::weighted_dot(op, x.values(), y.values()), 0.0);
    DenseMatrix r = y;
    axpy(-nu, x, r);
    const double res = wnorm(r);
    out = {std::sqrt(nu), nu > 1e-12 ? res / nu : res, it};
    // The absolute floor covers B ≈ 0 (complete graphs), where ν is rounding noise.
    if (res <= rel_tol * nu || res < 1e-14) return out;
    x = std::move(y);
  }
  throw NumericError("second_eigenvalue: no convergence after " + std::to_string(max_iter) +
                     " iterations, residual " + std::to_string(out.residual));
}

/// Residuals of the four eigenvalue-one identities plus |λ₂| of both operators.
struct Lemma2Report {
  double right_row_avg = 0.0;      // Â⊕ eᵀ = eᵀ
  double left_row_avg = 0.0;       // (e D̃) Â⊕ = e D̃
  double right_symmetric = 0.0;    // Â⊙ (D̃^½ eᵀ) = D̃^½ eᵀ
  double left_symmetric = 0.0;     // (e D̃^½) Â⊙ = e D̃^½
  double lambda2_row_avg = 0.0;
  double lambda2_symmetric = 0.0;

  std::array<double, 4> residuals() const {
    return {right_row_avg, left_row_avg, right_symmetric, left_symmetric};
  }
  double max_residual() const {
    const auto r = residuals();
    return *std::max_element(r.begin(), r.end());
  }
};

inline Lemma2Report verify_lemma2(const Graph& g, double tol = 1e-8) {
  detail::require_connected(g, "verify_lemma2");
  const std::size_t n = g.num_nodes();
  const auto row_avg = normalize(g, NormKind::RowAvg);
  const auto sym = normalize(g, NormKind::Symmetric);

  DenseMatrix ones(n, 1, 1.0), deg(n, 1), sqrt_deg(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    deg(i, 0) = g.degree(i);
    sqrt_deg(i, 0) = std::sqrt(g.degree(i));
  }
  auto rel = [](const DenseMatrix& image, const DenseMatrix& v) {
    return frobenius_distance(image, v) / frobenius_norm(v);
  };
  Lemma2Report rep;
  rep.right_row_avg = rel(propagate(row_avg, ones), ones);
  rep.left_row_avg = rel(propagate_transpose(row_avg, deg), deg);
  rep.right_symmetric = rel(propagate(sym, sqrt_deg), sqrt_deg);
  rep.left_symmetric = rel(propagate_transpose(sym, sqrt_deg), sqrt_deg);
  rep.lambda2_row_avg = second_eigenvalue(row_avg).lambda2_abs;
  rep.lambda2_symmetric = second_eigenvalue(sym).lambda2_abs;

  std::ostringstream broken;
  const char* names[] = {"A_rowavg e^T = e^T", "(e D) A_rowavg = e D",
                         "A_sym D^1/2 e^T = D^1/2 e^T", "(e D^1/2) A_sym = e D^1/2"};
  const auto r = rep.residuals();
  for (std::size_t i = 0; i < r.size(); ++i)
    if (!(r[i] <= tol)) broken << " [" << names[i] << ": residual " << r[i] << "]";
  if (!(rep.lambda2_row_avg < 1.0)) broken << " [|lambda2| rowavg = " << rep.lambda2_row_avg << "]";
  if (!(rep.lambda2_symmetric < 1.0))
    broken << " [|lambda2| symmetric = " << rep.lambda2_symmetric << "]";
  if (!broken.str().empty()) throw NumericError("verify_lemma2 failed:" + broken.str());
  return rep;
}

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column j is the unit eigenvector of values[j]
};

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
inline SymmetricEigen jacobi_eigen(DenseMatrix a, double tol = 1e-15, std::size_t max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InvalidArgument("jacobi_eigen: matrix not square");
  DenseMatrix v = DenseMatrix::identity(n);
  double scale = 0.0;
  for (double x : a.values()) scale = std::max(scale, std::abs(x));
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * std::max(scale, 1e-300) * static_cast<double>(n)) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

struct Lemma1Report {
  double max_right_residual = 0.0;  // ‖Â⊕ w − λ w‖ / ‖w‖, w = D̃^(-1/2) v
  double max_left_residual = 0.0;   // ‖vᵀD̃^(1/2) Â⊕ − λ vᵀD̃^(1/2)‖ / ‖·‖
  std::vector<double> eigenvalues;
};

/// Eigenpairs of Â⊙ mapped through D̃^(∓1/2) must be eigenpairs of Â⊕.
inline Lemma1Report verify_lemma1(const Graph& g, double tol = 1e-6) {
  detail::require_connected(g, "verify_lemma1");
  const std::size_t n = g.num_nodes();
  if (n > 200) throw InvalidArgument("verify_lemma1: n=" + std::to_string(n) + " exceeds 200");
  const auto row_avg = normalize(g, NormKind::RowAvg);
  const auto eig = jacobi_eigen(normalize(g, NormKind::Symmetric).to_dense());
  Lemma1Report rep;
  rep.eigenvalues = eig.values;
  for (std::size_t j = 0; j < n; ++j) {
    const double lambda = eig.values[j];
    DenseMatrix right(n, 1), left(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      right(i, 0) = eig.vectors(i, j) / std::sqrt(g.degree(i));
      left(i, 0) = eig.vectors(i, j) * std::sqrt(g.degree(i));
    }
    DenseMatrix rr = propagate(row_avg, right);
    axpy(-lambda, right, rr);
    DenseMatrix lr = propagate_transpose(row_avg, left);
    axpy(-lambda, left, lr);
    const double r1 = frobenius_norm(rr) / frobenius_norm(right);
    const double r2 = frobenius_norm(lr) / frobenius_norm(left);
    rep.max_right_residual = std::max(rep.max_right_residual, r1);
    rep.max_left_residual = std::max(rep.max_left_residual, r2);
    if (!(std::max(r1, r2) <= tol))
      throw NumericError("verify_lemma1 failed at eigenvalue " + std::to_string(lambda) +
                         ": residual " + std::to_string(std::max(r1, r2)));
  }
  return rep;
}

}  // namespace deepgnn
