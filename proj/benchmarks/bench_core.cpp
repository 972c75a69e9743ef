#include <benchmark/benchmark.h>

#include <random>

#include "thermograph/delaunay.hpp"
#include "thermograph/diffusion.hpp"
#include "thermograph/mlp.hpp"
#include "thermograph/rollout.hpp"
#include "thermograph/runtime.hpp"

using namespace thermograph;

namespace {

LayeredGraph grid(int nx, int ny, int nz) {
  LayeredGraph g;
  g.num_layers = nz;
  auto id = [&](int x, int y, int z) { return (z * ny + y) * nx + x; };
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        GraphVertex v;
        v.position = {2.0 * x, 2.0 * y, 2.0 * z};
        v.layer = z;
        v.cls = z == nz - 1 ? VertexClass::top : (z == 0 ? VertexClass::bottom : VertexClass::interior);
        v.sid = 1.0;
        g.vertices.push_back(v);
      }
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (x + 1 < nx) g.edges.push_back({id(x, y, z), id(x + 1, y, z), 2.0});
        if (y + 1 < ny) g.edges.push_back({id(x, y, z), id(x, y + 1, z), 2.0});
        if (z + 1 < nz) g.edges.push_back({id(x, y, z), id(x, y, z + 1), 2.0});
      }
  return g;
}

std::vector<double> ramp(std::size_t n) {
  std::vector<double> T(n);
  for (std::size_t i = 0; i < n; ++i) T[i] = 500.0 + static_cast<double>(i % 97);
  return T;
}

}  // namespace

static void BM_CrankNicolsonStep(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const LayeredGraph g = grid(side, side, side);
  const std::vector<double> w(g.edges.size(), 0.25);
  const auto L = assemble_laplacian(g, w);
  const auto T = ramp(g.num_vertices());
  const std::vector<double> Q(T.size(), 0.0);
  StepConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(crank_nicolson_step(L, T, Q, cfg.micro_dt(), cfg));
}
BENCHMARK(BM_CrankNicolsonStep)->Arg(8)->Arg(12)->Arg(16);

static void BM_Delaunay(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<Vec3> p(static_cast<std::size_t>(state.range(0)));
  for (auto& x : p) x = {u(rng), u(rng), u(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(delaunay3(p));
}
BENCHMARK(BM_Delaunay)->Arg(200)->Arg(1000);

static void BM_MlpForwardBackward(benchmark::State& state) {
  const auto p = MlpParams::xavier(kEdgeFeatureDim, kHiddenWidth, OutputTransform::softplus, 1);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(kEdgeFeatureDim, state.range(0));
  const Eigen::VectorXd dy = Eigen::VectorXd::Ones(state.range(0));
  for (auto _ : state) {
    MlpBatchCache cache;
    benchmark::DoNotOptimize(mlp_forward_batch(p, X, &cache));
    auto g = MlpGrads::zeros_like(p);
    mlp_backward_batch(p, cache, dy, g);
    benchmark::DoNotOptimize(g.b2);
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(1000)->Arg(8000);

static void BM_RolloutWithGradients(benchmark::State& state) {
  const LayeredGraph g = grid(10, 10, static_cast<int>(state.range(0)));
  Model m;
  m.norm = Normalization::from_graph(g);
  m.norm.c_scale = 1.0 / (m.norm.rho_ref * m.norm.rho_ref);
  m.nets = SubModels::xavier(3);
  const auto ctx = GraphContext::build(g, m.norm);
  const auto T0 = ramp(g.num_vertices());
  std::vector<Interval> iv(2);
  iv[0].laser = Vec2{8.0, 8.0};
  iv[1].obs = T0;
  RolloutConfig cfg;
  const TermArray coeff{1, 1, 1, 1, 1, 1, 1};
  for (auto _ : state) {
    RolloutCache cache;
    const auto r = rollout(ctx, m, T0, iv, cfg, &cache);
    benchmark::DoNotOptimize(backward_through_rollout(ctx, m, cache, iv, r, cfg, coeff));
  }
}
BENCHMARK(BM_RolloutWithGradients)->Arg(4)->Arg(12)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  retain_heap_memory();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
