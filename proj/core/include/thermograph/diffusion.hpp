#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "thermograph/graph.hpp"

namespace thermograph {

/// L = A - D in compressed row form (non-positive spectrum).
/// Row i holds the off-diagonals in ascending column order and the diagonal
/// at `diag_pos[i]`; the diagonal is minus the sum of that row's off-diagonal
/// values, so every row sums to exactly zero.
struct SparseLaplacian {
  std::size_t n{0};
  std::vector<std::size_t> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
  std::vector<std::size_t> diag_pos;

  /// y = L x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  double max_abs_diagonal() const;
  Eigen::MatrixXd to_dense() const;
};

/// Minimal edge view used for assembly: pairs (i, j), i != j, each once.
struct EdgePair {
  int i{0};
  int j{0};
};

/// Throws Error on a negative or non-finite weight or an out-of-range edge.
SparseLaplacian assemble_laplacian(std::size_t n, std::span<const EdgePair> edges,
                                   std::span<const double> weights);
SparseLaplacian assemble_laplacian(const LayeredGraph& graph, std::span<const double> weights);
std::vector<EdgePair> edge_pairs(const LayeredGraph& graph);

enum class Scheme : std::uint8_t { explicit_euler, backward_euler, crank_nicolson };

std::string_view to_string(Scheme s);
/// Accepts explicit|euler, backward, cn|crank_nicolson.
Scheme scheme_from_string(std::string_view s);

struct StepConfig {
  double delta_t{1.0 / 3.0};  // seconds per data interval
  int substeps{4};
  Scheme scheme{Scheme::crank_nicolson};
  double cg_tol{1e-10};
  std::size_t cg_max_iter{0};  // 0: 10 * N
  bool jacobi{false};

  double micro_dt() const { return delta_t / substeps; }
};

struct HeatState {
  std::vector<double> values;  // K
  double time_s{0};
  std::vector<std::uint8_t> observed_mask;
};

struct CgStats {
  std::size_t iterations{0};
  double relative_residual{0};
};

/// Solves (I - a L) x = b with conjugate gradients started from x = b.
/// Throws SolverError when the relative residual stays above `tol`.
CgStats solve_shifted(const SparseLaplacian& L, double a, std::span<const double> b,
                      std::span<double> x, double tol, std::size_t max_iter, bool jacobi = false);

/// Single micro-steps of size dt; Q is the dissipation rate (K/s).
std::vector<double> explicit_step(const SparseLaplacian& L, std::span<const double> T,
                                  std::span<const double> Q, double dt);
std::vector<double> backward_step(const SparseLaplacian& L, std::span<const double> T,
                                  std::span<const double> Q, double dt, const StepConfig& cfg,
                                  CgStats* stats = nullptr);
std::vector<double> crank_nicolson_step(const SparseLaplacian& L, std::span<const double> T,
                                        std::span<const double> Q, double dt,
                                        const StepConfig& cfg, CgStats* stats = nullptr);
std::vector<double> step(Scheme scheme, const SparseLaplacian& L, std::span<const double> T,
                         std::span<const double> Q, double dt, const StepConfig& cfg,
                         CgStats* stats = nullptr);

/// HeatState forms: one step of cfg.micro_dt(), advancing time.
HeatState explicit_step(const HeatState& T, const SparseLaplacian& L, std::span<const double> Q,
                        const StepConfig& cfg);
HeatState backward_step(const HeatState& T, const SparseLaplacian& L, std::span<const double> Q,
                        const StepConfig& cfg);
HeatState crank_nicolson_step(const HeatState& T, const SparseLaplacian& L,
                              std::span<const double> Q, const StepConfig& cfg);

/// Same update through a full eigendecomposition of the dense Laplacian.
std::vector<double> dense_oracle_step(std::span<const double> T, const Eigen::MatrixXd& L,
                                      Scheme scheme, double dt);

/// Per-mode amplification factor of a scheme for eigenvalue lambda <= 0.
double amplification(Scheme scheme, double lambda, double dt);

/// Largest explicit micro-step keeping every mode bounded: 2/|lambda_min|.
double explicit_stability_limit(const SparseLaplacian& L);

/// Macro-step of cfg.delta_t as cfg.substeps micro-steps with fixed L and Q.
std::vector<double> advance(const SparseLaplacian& L, std::span<const double> T,
                            std::span<const double> Q, const StepConfig& cfg);

}  // namespace thermograph
