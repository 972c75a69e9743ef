#include "thermograph/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace thermograph {

namespace {

double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_sizes(const SparseLaplacian& L, std::span<const double> T, std::span<const double> Q) {
  if (T.size() != L.n || Q.size() != L.n) throw Error("diffusion step: dimension mismatch");
}

}  // namespace

void SparseLaplacian::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

std::vector<double> SparseLaplacian::multiply(std::span<const double> x) const {
  std::vector<double> y(n);
  multiply(x, y);
  return y;
}

double SparseLaplacian::max_abs_diagonal() const {
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(val[diag_pos[i]]));
  return m;
}

Eigen::MatrixXd SparseLaplacian::to_dense() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      M(static_cast<Eigen::Index>(i), col[k]) = val[k];
    }
  }
  return M;
}

SparseLaplacian assemble_laplacian(std::size_t n, std::span<const EdgePair> edges,
                                   std::span<const double> weights) {
  if (weights.size() != edges.size()) throw Error("assemble_laplacian: one weight per edge required");
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    const double w = weights[e];
    if (!std::isfinite(w) || w < 0) {
      throw Error("assemble_laplacian: edge weight must be finite and >= 0 (edge " +
                  std::to_string(e) + ")");
    }
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(j) >= n ||
        i == j) {
      throw Error("assemble_laplacian: invalid edge " + std::to_string(e));
    }
    rows[i].emplace_back(j, w);
    rows[j].emplace_back(i, w);
  }
  SparseLaplacian L;
  L.n = n;
  L.row_ptr.assign(n + 1, 0);
  L.diag_pos.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double off = 0;
    bool placed = false;
    for (const auto& [j, w] : r) {
      if (!placed && static_cast<std::size_t>(j) > i) {
        L.diag_pos[i] = L.val.size();
        L.col.push_back(static_cast<int>(i));
        L.val.push_back(0);
        placed = true;
      }
      L.col.push_back(j);
      L.val.push_back(w);
    }
    if (!placed) {
      L.diag_pos[i] = L.val.size();
      L.col.push_back(static_cast<int>(i));
      L.val.push_back(0);
    }
    L.row_ptr[i + 1] = L.val.size();
    // Diagonal from the stored values in storage order: the row then sums
    // to exactly zero in that same order.
    for (std::size_t k = L.row_ptr[i]; k < L.row_ptr[i + 1]; ++k) {
      if (k != L.diag_pos[i]) off += L.val[k];
    }
    L.val[L.diag_pos[i]] = -off;
  }
  return L;
}

std::vector<EdgePair> edge_pairs(const LayeredGraph& graph) {
  std::vector<EdgePair> out;
  out.reserve(graph.edges.size());
  for (const auto& e : graph.edges) out.push_back({e.i, e.j});
  return out;
}

SparseLaplacian assemble_laplacian(const LayeredGraph& graph, std::span<const double> weights) {
  const auto pairs = edge_pairs(graph);
  return assemble_laplacian(graph.num_vertices(), pairs, weights);
}

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::explicit_euler: return "euler";
    case Scheme::backward_euler: return "backward";
    case Scheme::crank_nicolson: return "cn";
  }
  return "cn";
}

Scheme scheme_from_string(std::string_view s) {
  if (s == "euler" || s == "explicit") return Scheme::explicit_euler;
  if (s == "backward") return Scheme::backward_euler;
  if (s == "cn" || s == "crank_nicolson") return Scheme::crank_nicolson;
  throw Error("unknown scheme '" + std::string(s) + "'");
}

CgStats solve_shifted(const SparseLaplacian& L, double a, std::span<const double> b,
                      std::span<double> x, double tol, std::size_t max_iter, bool jacobi) {
  const std::size_t n = L.n;
  if (b.size() != n || x.size() != n) throw Error("solve_shifted: dimension mismatch");
  if (max_iter == 0) max_iter = 10 * std::max<std::size_t>(n, 1);
  std::copy(b.begin(), b.end(), x.begin());

  const double bnorm = std::sqrt(dot_span(b, b));
  CgStats stats;
  if (bnorm == 0 || a == 0) return stats;

  // A v = v - a L v
  std::vector<double> Lv(n);
  auto apply = [&](std::span<const double> v, std::span<double> out) {
    L.multiply(v, Lv);
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i] - a * Lv[i];
  };
  std::vector<double> inv_diag;
  if (jacobi) {
    inv_diag.resize(n);
    for (std::size_t i = 0; i < n; ++i) inv_diag[i] = 1.0 / (1.0 - a * L.val[L.diag_pos[i]]);
  }

  std::vector<double> r(n), z(n), p(n), Ap(n);
  apply(x, Ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  auto precondition = [&] {
    if (jacobi) {
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    } else {
      z = r;
    }
  };
  precondition();
  p = z;
  double rz = dot_span(r, z);
  double rnorm = std::sqrt(dot_span(r, r));
  stats.relative_residual = rnorm / bnorm;
  while (stats.relative_residual > tol) {
    if (stats.iterations >= max_iter) {
      throw SolverError("conjugate gradients did not converge: relative residual " +
                            std::to_string(stats.relative_residual) + " after " +
                            std::to_string(stats.iterations) + " iterations",
                        stats.relative_residual);
    }
    apply(p, Ap);
    const double alpha = rz / dot_span(p, Ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    precondition();
    const double rz_new = dot_span(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = std::sqrt(dot_span(r, r));
    stats.relative_residual = rnorm / bnorm;
    ++stats.iterations;
  }
  return stats;
}

std::vector<double> explicit_step(const SparseLaplacian& L, std::span<const double> T,
                                  std::span<const double> Q, double dt) {
  check_sizes(L, T, Q);
  std::vector<double> out = L.multiply(T);
  for (std::size_t i = 0; i < L.n; ++i) out[i] = T[i] + dt * out[i] - dt * Q[i];
  return out;
}

std::vector<double> backward_step(const SparseLaplacian& L, std::span<const double> T,
                                  std::span<const double> Q, double dt, const StepConfig& cfg,
                                  CgStats* stats) {
  check_sizes(L, T, Q);
  std::vector<double> x(L.n);
  const CgStats s = solve_shifted(L, dt, T, x, cfg.cg_tol, cfg.cg_max_iter, cfg.jacobi);
  if (stats) *stats = s;
  for (std::size_t i = 0; i < L.n; ++i) x[i] -= dt * Q[i];
  return x;
}

std::vector<double> crank_nicolson_step(const SparseLaplacian& L, std::span<const double> T,
                                        std::span<const double> Q, double dt,
                                        const StepConfig& cfg, CgStats* stats) {
  check_sizes(L, T, Q);
  const double a = 0.5 * dt;
  std::vector<double> b = L.multiply(T);
  for (std::size_t i = 0; i < L.n; ++i) b[i] = T[i] + a * b[i];
  std::vector<double> x(L.n);
  const CgStats s = solve_shifted(L, a, b, x, cfg.cg_tol, cfg.cg_max_iter, cfg.jacobi);
  if (stats) *stats = s;
  for (std::size_t i = 0; i < L.n; ++i) x[i] -= dt * Q[i];
  return x;
}

std::vector<double> step(Scheme scheme, const SparseLaplacian& L, std::span<const double> T,
                         std::span<const double> Q, double dt, const StepConfig& cfg,
                         CgStats* stats) {
  switch (scheme) {
    case Scheme::explicit_euler: return explicit_step(L, T, Q, dt);
    case Scheme::backward_euler: return backward_step(L, T, Q, dt, cfg, stats);
    case Scheme::crank_nicolson: return crank_nicolson_step(L, T, Q, dt, cfg, stats);
  }
  throw Error("unknown scheme");
}

HeatState explicit_step(const HeatState& T, const SparseLaplacian& L, std::span<const double> Q,
                        const StepConfig& cfg) {
  return {explicit_step(L, T.values, Q, cfg.micro_dt()), T.time_s + cfg.micro_dt(), T.observed_mask};
}

HeatState backward_step(const HeatState& T, const SparseLaplacian& L, std::span<const double> Q,
                        const StepConfig& cfg) {
  return {backward_step(L, T.values, Q, cfg.micro_dt(), cfg), T.time_s + cfg.micro_dt(),
          T.observed_mask};
}

HeatState crank_nicolson_step(const HeatState& T, const SparseLaplacian& L,
                              std::span<const double> Q, const StepConfig& cfg) {
  return {crank_nicolson_step(L, T.values, Q, cfg.micro_dt(), cfg), T.time_s + cfg.micro_dt(),
          T.observed_mask};
}

double amplification(Scheme scheme, double lambda, double dt) {
  switch (scheme) {
    case Scheme::explicit_euler: return 1.0 + dt * lambda;
    case Scheme::backward_euler: return 1.0 / (1.0 - dt * lambda);
    case Scheme::crank_nicolson: return (1.0 + 0.5 * dt * lambda) / (1.0 - 0.5 * dt * lambda);
  }
  throw Error("unknown scheme");
}

std::vector<double> dense_oracle_step(std::span<const double> T, const Eigen::MatrixXd& L,
                                      Scheme scheme, double dt) {
  const auto n = L.rows();
  if (static_cast<std::size_t>(n) != T.size()) throw Error("dense_oracle_step: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  const Eigen::Map<const Eigen::VectorXd> t(T.data(), n);
  Eigen::VectorXd modal = es.eigenvectors().transpose() * t;
  for (Eigen::Index k = 0; k < n; ++k) modal(k) *= amplification(scheme, es.eigenvalues()(k), dt);
  const Eigen::VectorXd out = es.eigenvectors() * modal;
  return {out.data(), out.data() + n};
}

double explicit_stability_limit(const SparseLaplacian& L) {
  double lambda_max = 0;  // largest eigenvalue of -L
  if (L.n <= 512) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.to_dense(), Eigen::EigenvaluesOnly);
    lambda_max = -es.eigenvalues()(0);
  } else {
    // Power iteration on -L from a deterministic alternating start vector.
    std::vector<double> v(L.n), w(L.n);
    for (std::size_t i = 0; i < L.n; ++i) v[i] = (i % 2 ? -1.0 : 1.0) + 1e-3 * static_cast<double>(i % 7);
    for (int it = 0; it < 2000; ++it) {
      L.multiply(v, w);
      const double nw = std::sqrt(dot_span(w, w));
      if (nw == 0) break;
      const double prev = lambda_max;
      lambda_max = nw / std::sqrt(dot_span(v, v));
      for (std::size_t i = 0; i < L.n; ++i) v[i] = -w[i] / nw;
      if (std::abs(lambda_max - prev) <= 1e-12 * lambda_max) break;
    }
  }
  if (lambda_max <= 0) return std::numeric_limits<double>::infinity();
  return 2.0 / lambda_max;
}

std::vector<double> advance(const SparseLaplacian& L, std::span<const double> T,
                            std::span<const double> Q, const StepConfig& cfg) {
  if (cfg.substeps < 1) throw Error("advance: substeps must be >= 1");
  std::vector<double> cur(T.begin(), T.end());
  for (int s = 0; s < cfg.substeps; ++s) cur = step(cfg.scheme, L, cur, Q, cfg.micro_dt(), cfg);
  return cur;
}

}  // namespace thermograph
