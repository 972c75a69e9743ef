#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_support.hpp"
#include "thermograph/graph.hpp"
#include "thermograph/synth.hpp"

using namespace thermograph;
using tg_test::brute_prune_order;
using tg_test::random_cloud;
using tg_test::TempDir;

namespace {

constexpr double kC = 3.0 / (8.0 * std::numbers::pi);

SynthConfig pyramid_config(int layers) {
  SynthConfig cfg;
  cfg.layers = layers;
  cfg.width_px = 12;
  cfg.height_px = 12;
  cfg.base_px = 10;
  cfg.wall_angle_deg = 70;
  cfg.frames_per_layer = 2;
  return cfg;
}

}  // namespace

TEST(Threshold, StrictInequality) {
  ThermalFrame f;
  f.width = 4;
  f.height = 3;
  f.values.assign(12, 423.15);
  SequenceManifest m;
  EXPECT_TRUE(threshold_frame(f, m).empty());
  f.values.assign(12, 500);
  EXPECT_EQ(threshold_frame(f, m).size(), 12u);
}

TEST(Threshold, CoordinateArithmetic) {
  ThermalFrame f;
  f.width = 5;
  f.height = 5;
  f.layer_index = 3;
  f.values.assign(25, 300);
  f.at(2, 4) = 500;
  SequenceManifest m;
  m.pixel_pitch_mm = 1.0;
  m.layer_height_mm = 0.05;
  const auto p = threshold_frame(f, m);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_DOUBLE_EQ(p[0].x, 4.0);
  EXPECT_DOUBLE_EQ(p[0].y, 2.0);
  EXPECT_NEAR(p[0].z, 0.15, 1e-15);
}

TEST(Sid, TwoPointsAtUnitDistance) {
  const std::vector<Vec3> p{{0, 0, 0}, {1, 0, 0}};
  EXPECT_NEAR(scale_invariant_density(p, 0), 0.1193662, 1e-7);
  EXPECT_NEAR(scale_invariant_density(p, 1), kC, 1e-15);
  const auto all = scale_invariant_density(p);
  EXPECT_NEAR(all[0], kC, 1e-12);
}

TEST(Sid, IsolatedPointIsZero) {
  const std::vector<Vec3> p{{3, 4, 5}};
  EXPECT_EQ(scale_invariant_density(p, 0), 0.0);
  EXPECT_EQ(scale_invariant_density(p)[0], 0.0);
}

TEST(Sid, ThreeCollinearPoints) {
  const std::vector<Vec3> p{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_NEAR(scale_invariant_density(p, 1), 0.2387324, 1e-7);
  EXPECT_NEAR(scale_invariant_density(p, 0), 0.1492077, 1e-7);
  const auto all = scale_invariant_density(p);
  EXPECT_NEAR(all[1], 2 * kC, 1e-12);
  EXPECT_NEAR(all[2], 1.25 * kC, 1e-12);
}

TEST(Sid, CoincidentPointsThrow) {
  const std::vector<Vec3> p{{1, 1, 1}, {1, 1, 1}};
  try {
    scale_invariant_density(p, 0);
    FAIL();
  } catch (const GeometryError& e) {
    EXPECT_STREQ(e.what(), "coincident points");
  }
  EXPECT_THROW(scale_invariant_density(p), GeometryError);
}

TEST(Prune, CentreOfSquareGoesFirst) {
  PointCloud3 c;
  c.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.5, 0.5, 0}};
  c.layer_of.assign(5, 0);
  const auto order = prune_order(c, 4, 1);
  ASSERT_EQ(order.size(), 1u);
  EXPECT_EQ(order[0], 4u);
}

TEST(Prune, TargetEqualToCountIsIdentity) {
  const PointCloud3 c = random_cloud(30, 1, 1, false);
  const PointCloud3 out = prune(c, 30, 5);
  EXPECT_EQ(out.points, c.points);
  EXPECT_EQ(out.layer_of, c.layer_of);
}

TEST(Prune, ProtectedLayersSurvive) {
  const PointCloud3 c = random_cloud(120, 8, 2, false);
  const int k = 3;
  const auto mask = removable_mask(c, k);
  std::size_t removable = 0;
  for (auto m : mask) removable += m;
  const PointCloud3 out = prune(c, removable / 3, k);
  std::set<std::tuple<double, double, double>> kept;
  for (const auto& p : out.points) kept.insert({p.x, p.y, p.z});
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!mask[i]) EXPECT_TRUE(kept.count({c.points[i].x, c.points[i].y, c.points[i].z}));
  }
  std::size_t left = 0;
  for (int l : out.layer_of) left += l > c.max_layer() - k;
  EXPECT_EQ(left, removable / 3);
}

TEST(Prune, TargetAboveRemovableThrows) {
  const PointCloud3 c = random_cloud(20, 4, 3, false);
  EXPECT_THROW(prune(c, 19, 1), Error);
}

TEST(Prune, MatchesBruteForceRandom) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 40 + 32 * seed;  // up to 200
    const PointCloud3 c = random_cloud(n, 4, seed, false);
    const int k = 2 + static_cast<int>(seed % 3);
    std::size_t removable = 0;
    for (auto m : removable_mask(c, k)) removable += m;
    const std::size_t target = removable / 4;
    EXPECT_EQ(prune_order(c, target, k), brute_prune_order(c, target, k)) << "seed " << seed;
  }
}

TEST(Prune, MatchesBruteForceOnLatticeWithTies) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const PointCloud3 c = random_cloud(150, 3, 50 + seed, true);
    std::size_t removable = 0;
    for (auto m : removable_mask(c, 2)) removable += m;
    EXPECT_EQ(prune_order(c, removable / 2, 2), brute_prune_order(c, removable / 2, 2));
  }
}

TEST(Classify, TwoLayerBoxHasOnlyBottomAndTop) {
  std::vector<Vec3> p;
  std::vector<int> layer;
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        p.push_back({double(x), double(y), double(z)});
        layer.push_back(z);
      }
  const auto c = delaunay3(p);
  const auto cls = classify_vertices(c, layer);
  for (std::size_t i = 0; i < cls.size(); ++i) {
    EXPECT_EQ(cls[i], layer[i] == 0 ? VertexClass::bottom : VertexClass::top);
  }
}

TEST(Classify, ThreeLayerBoxCentreIsInterior) {
  std::vector<Vec3> p;
  std::vector<int> layer;
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        p.push_back({double(x), double(y), double(z)});
        layer.push_back(z);
      }
  const auto c = delaunay3(p);
  const auto cls = classify_vertices(c, layer);
  EXPECT_EQ(cls[13], VertexClass::interior);
  int side = 0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (layer[i] == 0) EXPECT_EQ(cls[i], VertexClass::bottom);
    if (layer[i] == 2) EXPECT_EQ(cls[i], VertexClass::top);
    side += cls[i] == VertexClass::side;
  }
  EXPECT_EQ(side, 8);
}

TEST(GraphSequence, PyramidInvariants) {
  const SynthResult r = generate_synthetic(pyramid_config(20));
  const auto graphs = build_graph_sequence(r.sequence, GraphBuildParams{});
  ASSERT_EQ(graphs.size(), 20u);
  for (std::size_t n = 1; n < graphs.size(); ++n) {
    const auto& g = graphs[n];
    EXPECT_EQ(g.num_layers, static_cast<int>(n) + 1);
    EXPECT_GE(g.num_vertices(), graphs[n - 1].num_vertices()) << "layer " << n;
    // Partition and bottom minimality.
    int min_layer = g.num_layers;
    for (const auto& v : g.vertices) min_layer = std::min(min_layer, v.layer);
    for (const auto& v : g.vertices) {
      if (v.cls == VertexClass::bottom) EXPECT_EQ(v.layer, min_layer);
      if (v.cls == VertexClass::top) EXPECT_EQ(v.layer, g.max_layer());
    }
    // Edge lengths, orientation and uniqueness.
    std::set<std::pair<int, int>> seen;
    for (const auto& e : g.edges) {
      ASSERT_LT(e.i, e.j);
      EXPECT_TRUE(seen.insert({e.i, e.j}).second);
      EXPECT_NEAR(e.rho, distance(g.vertices[e.i].position, g.vertices[e.j].position), 1e-12);
      EXPECT_GT(e.rho, 0);
    }
    // Connectivity.
    std::vector<int> comp(g.num_vertices(), -1);
    std::vector<std::vector<int>> adj(g.num_vertices());
    for (const auto& e : g.edges) {
      adj[e.i].push_back(e.j);
      adj[e.j].push_back(e.i);
    }
    std::vector<int> stack{0};
    comp[0] = 0;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (comp[w] < 0) {
          comp[w] = 0;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    EXPECT_EQ(reached, g.num_vertices());
    // Observed mask is the top layer.
    const auto mask = g.observed_mask();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      EXPECT_EQ(mask[i] != 0, g.vertices[i].layer == g.max_layer());
    }
  }
}

TEST(GraphSequence, AccretionReclassifiesAndInherits) {
  const SynthResult r = generate_synthetic(pyramid_config(9));
  GraphBuildParams params;
  params.prune_target = 30;
  const auto graphs = build_graph_sequence(r.sequence, params);
  for (std::size_t n = 2; n < graphs.size(); ++n) {
    const auto& prev = graphs[n - 1];
    const auto& cur = graphs[n];
    std::map<std::tuple<double, double, double>, const GraphVertex*> at;
    for (const auto& v : cur.vertices) at[{v.position.x, v.position.y, v.position.z}] = &v;
    for (const auto& v : prev.vertices) {
      const auto it = at.find({v.position.x, v.position.y, v.position.z});
      if (v.layer == prev.max_layer() && it != at.end()) {
        EXPECT_NE(it->second->cls, VertexClass::top);
      }
      if (v.layer <= static_cast<int>(n) - params.top_k) {
        EXPECT_NE(it, at.end()) << "inherited vertex missing at layer " << n;
      }
    }
  }
}

TEST(GraphSequence, DeterministicFiles) {
  const SynthResult r = generate_synthetic(pyramid_config(5));
  TempDir a("ga"), b("gb");
  write_graph_sequence(build_graph_sequence(r.sequence, {}), a.path());
  write_graph_sequence(build_graph_sequence(r.sequence, {}), b.path());
  for (int n = 0; n < 5; ++n) {
    char name[32];
    std::snprintf(name, sizeof name, "graph_%03d.txt", n);
    EXPECT_EQ(tg_test::read_text(a / name), tg_test::read_text(b / name));
  }
}

TEST(GraphIo, RoundTripIsExact) {
  const SynthResult r = generate_synthetic(pyramid_config(4));
  const auto graphs = build_graph_sequence(r.sequence, {});
  TempDir dir("gio");
  write_graph_sequence(graphs, dir.path());
  const auto back = read_graph_sequence(dir.path());
  ASSERT_EQ(back.size(), graphs.size());
  for (std::size_t n = 0; n < graphs.size(); ++n) {
    ASSERT_EQ(back[n].vertices.size(), graphs[n].vertices.size());
    ASSERT_EQ(back[n].edges.size(), graphs[n].edges.size());
    EXPECT_EQ(back[n].num_layers, graphs[n].num_layers);
    for (std::size_t i = 0; i < graphs[n].vertices.size(); ++i) {
      EXPECT_EQ(back[n].vertices[i].position, graphs[n].vertices[i].position);
      EXPECT_EQ(back[n].vertices[i].sid, graphs[n].vertices[i].sid);
      EXPECT_EQ(back[n].vertices[i].cls, graphs[n].vertices[i].cls);
      EXPECT_EQ(back[n].vertices[i].layer, graphs[n].vertices[i].layer);
    }
    for (std::size_t e = 0; e < graphs[n].edges.size(); ++e) {
      EXPECT_EQ(back[n].edges[e].rho, graphs[n].edges[e].rho);
    }
  }
}

TEST(GraphIo, MalformedFilesReportLine) {
  TempDir dir("gbad");
  tg_test::write_text(dir / "g.txt", "vertices 2 edges 1 layers 1\n0 0 0 0 bottom 1 0\n1 1 0 0 top 1 0\n1 0 1\n");
  try {
    read_graph(dir / "g.txt");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("g.txt:4"), std::string::npos) << e.what();
  }
  tg_test::write_text(dir / "h.txt", "vertices 1 edges 0 layers 1\n0 0 0 0 roof 1 0\n");
  EXPECT_THROW(read_graph(dir / "h.txt"), FormatError);
  tg_test::write_text(dir / "k.txt", "vertices 2 edges 0 layers 1\n0 0 0 0 top 1 0\n");
  EXPECT_THROW(read_graph(dir / "k.txt"), FormatError);
}
