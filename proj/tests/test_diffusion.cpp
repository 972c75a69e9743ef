#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "thermograph/diffusion.hpp"

using namespace thermograph;

namespace {

SparseLaplacian two_node(double w) {
  const std::vector<EdgePair> e{{0, 1}};
  const std::vector<double> c{w};
  return assemble_laplacian(2, e, c);
}

std::vector<double> random_weights(std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::vector<double> w(m);
  for (auto& x : w) x = u(rng);
  return w;
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void expect_rel_close(std::span<const double> a, std::span<const double> b, double rtol) {
  ASSERT_EQ(a.size(), b.size());
  double scale = 0;
  for (double x : b) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], rtol * scale) << "i=" << i;
}

}  // namespace

TEST(Assemble, TwoNode) {
  const auto L = two_node(2.5).to_dense();
  EXPECT_EQ(L(0, 0), -2.5);
  EXPECT_EQ(L(0, 1), 2.5);
  EXPECT_EQ(L(1, 0), 2.5);
  EXPECT_EQ(L(1, 1), -2.5);
}

TEST(Assemble, ThreeNodePath) {
  const std::vector<EdgePair> e{{0, 1}, {1, 2}};
  const std::vector<double> w{1, 1};
  Eigen::MatrixXd expect(3, 3);
  expect << -1, 1, 0, 1, -2, 1, 0, 1, -1;
  EXPECT_EQ(assemble_laplacian(3, e, w).to_dense(), expect);
}

TEST(Assemble, RowSumsExactlyZeroAndSymmetric) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = tg_test::random_graph(40, 60, rng);
    const auto w = random_weights(g.edges.size(), rng);
    const auto L = assemble_laplacian(g, w);
    const auto D = L.to_dense();
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
      // Off-diagonals in storage order, then the diagonal: cancels exactly.
      double s = 0;
      for (std::size_t k = L.row_ptr[i]; k < L.row_ptr[i + 1]; ++k) {
        if (k != L.diag_pos[i]) s += L.val[k];
      }
      EXPECT_EQ(s + L.val[L.diag_pos[i]], 0.0);
      EXPECT_LE(D(i, i), 0.0);
      for (Eigen::Index j = 0; j < D.cols(); ++j) {
        EXPECT_EQ(D(i, j), D(j, i));
        if (i != j) EXPECT_GE(D(i, j), 0.0);
      }
    }
  }
}

TEST(Assemble, RejectsNegativeWeight) {
  const std::vector<EdgePair> e{{0, 1}};
  const std::vector<double> w{-0.1};
  EXPECT_THROW(assemble_laplacian(2, e, w), Error);
  const std::vector<double> nan{std::nan("")};
  EXPECT_THROW(assemble_laplacian(2, e, nan), Error);
}

TEST(Steps, ExplicitExamples) {
  const auto L = two_node(1);
  const std::vector<double> T{1, 0}, Q0{0, 0}, Q{0.1, 0};
  const auto a = explicit_step(L, T, Q0, 0.25);
  EXPECT_NEAR(a[0], 0.75, 1e-15);
  EXPECT_NEAR(a[1], 0.25, 1e-15);
  const auto b = explicit_step(L, T, Q, 0.25);
  EXPECT_NEAR(b[0], 0.725, 1e-15);
  EXPECT_NEAR(b[1], 0.25, 1e-15);
}

TEST(Steps, BackwardExample) {
  const auto L = two_node(1);
  const std::vector<double> T{1, 0}, Q{0, 0};
  StepConfig cfg;
  const auto x = backward_step(L, T, Q, 0.25, cfg);
  EXPECT_NEAR(x[0], 5.0 / 6.0, 1e-10);
  EXPECT_NEAR(x[1], 1.0 / 6.0, 1e-10);
  EXPECT_EQ(backward_step(L, T, Q, 0.0, cfg), T);
}

TEST(Steps, CrankNicolsonExample) {
  const auto L = two_node(1);
  const std::vector<double> T{1, 0}, Q{0, 0};
  StepConfig cfg;
  const auto x = crank_nicolson_step(L, T, Q, 0.25, cfg);
  EXPECT_NEAR(x[0], 0.8, 1e-10);
  EXPECT_NEAR(x[1], 0.2, 1e-10);
  EXPECT_EQ(crank_nicolson_step(L, T, Q, 0.0, cfg), T);
}

TEST(Steps, HeatStateFormsAdvanceTime) {
  const auto L = two_node(1);
  HeatState s{{1, 0}, 2.0, {1, 1}};
  StepConfig cfg;
  cfg.delta_t = 1.0;
  cfg.substeps = 4;
  const std::vector<double> Q{0, 0};
  const auto e = explicit_step(s, L, Q, cfg);
  EXPECT_DOUBLE_EQ(e.time_s, 2.25);
  EXPECT_NEAR(e.values[0], 0.75, 1e-15);
  EXPECT_EQ(e.observed_mask, s.observed_mask);
  EXPECT_NEAR(crank_nicolson_step(s, L, Q, cfg).values[0], 0.8, 1e-10);
  EXPECT_NEAR(backward_step(s, L, Q, cfg).values[0], 5.0 / 6.0, 1e-10);
}

TEST(Oracle, AmplificationFactors) {
  EXPECT_NEAR(amplification(Scheme::crank_nicolson, -2, 0.25), 0.6, 1e-15);
  EXPECT_NEAR(amplification(Scheme::backward_euler, -2, 0.25), 1 / 1.5, 1e-15);
  EXPECT_NEAR(amplification(Scheme::explicit_euler, -2, 0.25), 0.5, 1e-15);
  for (auto s : {Scheme::explicit_euler, Scheme::backward_euler, Scheme::crank_nicolson}) {
    EXPECT_EQ(amplification(s, -3.7, 0.0), 1.0);
  }
  EXPECT_GT(std::abs(amplification(Scheme::explicit_euler, -2, 1.01)), 1.0);
  EXPECT_LE(std::abs(amplification(Scheme::explicit_euler, -2, 0.99)), 1.0);
}

TEST(Oracle, DenseIdentityAtZeroStep) {
  std::mt19937_64 rng(1);
  const auto g = tg_test::random_graph(10, 10, rng);
  const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng)).to_dense();
  const std::vector<double> T{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  for (auto s : {Scheme::explicit_euler, Scheme::backward_euler, Scheme::crank_nicolson}) {
    expect_rel_close(dense_oracle_step(T, L, s, 0.0), T, 1e-14);
  }
}

TEST(Oracle, SparseMatchesDenseOnRandomGraphs) {
  std::mt19937_64 rng(2024);
  StepConfig cfg;
  cfg.cg_tol = 1e-13;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 63;
    const auto g = tg_test::random_graph(n, n, rng);
    const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
    std::uniform_real_distribution<double> u(200, 800);
    std::vector<double> T(n), Q(n, 0.0);
    for (auto& t : T) t = u(rng);
    const double dt = 0.05 + 0.2 * (trial % 5);
    const auto D = L.to_dense();
    expect_rel_close(explicit_step(L, T, Q, dt), dense_oracle_step(T, D, Scheme::explicit_euler, dt),
                     1e-10);
    expect_rel_close(backward_step(L, T, Q, dt, cfg),
                     dense_oracle_step(T, D, Scheme::backward_euler, dt), 1e-10);
    expect_rel_close(crank_nicolson_step(L, T, Q, dt, cfg),
                     dense_oracle_step(T, D, Scheme::crank_nicolson, dt), 1e-10);
  }
}

TEST(Oracle, SubstepsComposeAsPowers) {
  std::mt19937_64 rng(5);
  const auto g = tg_test::random_graph(12, 12, rng);
  const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
  std::vector<double> T(12), Q(12, 0.0);
  for (std::size_t i = 0; i < 12; ++i) T[i] = double(i * i % 7);
  StepConfig cfg;
  cfg.delta_t = 0.2;
  cfg.substeps = 4;
  cfg.scheme = Scheme::explicit_euler;
  const auto got = advance(L, T, Q, cfg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.to_dense());
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(T.data(), 12);
  Eigen::VectorXd modes = es.eigenvectors().transpose() * t;
  for (int k = 0; k < 12; ++k) modes(k) *= std::pow(1 + 0.05 * es.eigenvalues()(k), 4);
  const Eigen::VectorXd expect = es.eigenvectors() * modes;
  for (int i = 0; i < 12; ++i) EXPECT_NEAR(got[i], expect(i), 1e-10 * (1 + std::abs(expect(i))));
}

TEST(Conservation, AllSchemesPreserveSum) {
  std::mt19937_64 rng(8);
  StepConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = tg_test::random_graph(30, 40, rng);
    const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
    std::vector<double> T(30), Q(30, 0.0);
    std::uniform_real_distribution<double> u(300, 600);
    for (auto& t : T) t = u(rng);
    const double s0 = sum(T);
    EXPECT_NEAR(sum(explicit_step(L, T, Q, 0.05)), s0, 1e-12 * s0);
    EXPECT_NEAR(sum(backward_step(L, T, Q, 0.5, cfg)), s0, 1e-8 * s0);
    EXPECT_NEAR(sum(crank_nicolson_step(L, T, Q, 0.5, cfg)), s0, 1e-8 * s0);
  }
}

TEST(Stability, ImplicitSchemesContractDeviation) {
  std::mt19937_64 rng(9);
  StepConfig cfg;
  const auto g = tg_test::random_graph(25, 40, rng);
  const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
  std::vector<double> T(25), Q(25, 0.0);
  std::uniform_real_distribution<double> u(-5, 5);
  for (auto& t : T) t = u(rng);
  auto dev = [](std::span<const double> v) {
    const double m = sum(v) / double(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s);
  };
  for (double dt : {0.01, 1.0, 100.0}) {
    EXPECT_LE(dev(backward_step(L, T, Q, dt, cfg)), dev(T) + 1e-12);
    EXPECT_LE(dev(crank_nicolson_step(L, T, Q, dt, cfg)), dev(T) + 1e-12);
  }
}

TEST(Stability, ExplicitLimitMatchesDenseSpectrum) {
  std::mt19937_64 rng(10);
  const auto g = tg_test::random_graph(30, 50, rng);
  const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.to_dense());
  const double lmin = es.eigenvalues().minCoeff();
  EXPECT_NEAR(explicit_stability_limit(L), 2.0 / std::abs(lmin), 1e-9 * 2.0 / std::abs(lmin));
  const auto big = tg_test::grid_graph(30, 20);
  const auto Lb = assemble_laplacian(big, std::vector<double>(big.edges.size(), 1.0));
  // 2D grid spectrum: lambda_min = -(4 sin^2(pi (nx-1) / 2nx) + 4 sin^2(pi (ny-1) / 2ny)).
  const double pi = 3.14159265358979323846;
  const double lm = 4 * std::pow(std::sin(pi * 29 / 60), 2) + 4 * std::pow(std::sin(pi * 19 / 40), 2);
  EXPECT_NEAR(explicit_stability_limit(Lb), 2.0 / lm, 1e-6 * 2.0 / lm);
}

TEST(Stability, ExplicitMaximumPrinciple) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = tg_test::random_graph(30, 50, rng);
    const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
    const double dt = 1.0 / L.max_abs_diagonal();
    std::vector<double> T(30), Q(30, 0.0);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& t : T) t = u(rng);
    const auto next = explicit_step(L, T, Q, dt);
    const double lo = *std::min_element(T.begin(), T.end());
    const double hi = *std::max_element(T.begin(), T.end());
    for (double x : next) {
      EXPECT_GE(x, lo - 1e-15);
      EXPECT_LE(x, hi + 1e-15);
    }
  }
}

TEST(Solver, ShiftedSystemConvergesAndReportsFailure) {
  std::mt19937_64 rng(12);
  const auto g = tg_test::random_graph(50, 80, rng);
  const auto L = assemble_laplacian(g, random_weights(g.edges.size(), rng));
  std::vector<double> b(50), x(50);
  for (std::size_t i = 0; i < 50; ++i) b[i] = std::sin(double(i));
  for (bool jacobi : {false, true}) {
    const CgStats st = solve_shifted(L, 3.0, b, x, 1e-12, 500, jacobi);
    EXPECT_LE(st.relative_residual, 1e-12);
    const auto Lx = L.multiply(x);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(x[i] - 3.0 * Lx[i], b[i], 1e-10);
  }
  try {
    solve_shifted(L, 100.0, b, x, 1e-14, 1, false);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(Scheme, StringRoundTrip) {
  for (auto s : {Scheme::explicit_euler, Scheme::backward_euler, Scheme::crank_nicolson}) {
    EXPECT_EQ(scheme_from_string(to_string(s)), s);
  }
  EXPECT_EQ(scheme_from_string("euler"), Scheme::explicit_euler);
  EXPECT_EQ(scheme_from_string("cn"), Scheme::crank_nicolson);
  EXPECT_THROW(scheme_from_string("rk4"), Error);
}
