#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "test_support.hpp"
#include "thermograph/eval.hpp"
#include "thermograph/export.hpp"

using namespace thermograph;

namespace {

const std::vector<std::uint8_t> kMask2{1, 1};

struct Fixture {
  SynthResult synth;
  std::vector<LayeredGraph> graphs;
  Prediction pred;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    SynthConfig c;
    c.width_px = 8;
    c.height_px = 8;
    c.base_px = 4;
    c.layers = 3;
    c.frames_per_layer = 4;
    c.gap_intervals = 1;
    x.synth = generate_synthetic(c);
    x.graphs = build_graph_sequence(x.synth.sequence, reference_graph_params());
    Model m;
    m.norm = default_normalization(x.graphs[1]);
    m.nets = SubModels::xavier(2);
    x.pred = predict_sequence(m, x.synth.sequence, x.graphs, RolloutConfig{});
    return x;
  }();
  return f;
}

TrainConfig tiny_train(std::size_t budget) {
  TrainConfig cfg;
  cfg.budget = budget;
  cfg.adam.lr = 1e-3;
  cfg.rollout.step.substeps = 2;
  cfg.stage_tolerance = 0.0;
  return cfg;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST(Metrics, RelativeErrorExamples) {
  EXPECT_EQ(relative_error(std::vector<double>{2, 0}, std::vector<double>{2, 0}, kMask2), 0.0);
  EXPECT_NEAR(relative_error(std::vector<double>{2.1, 0.1}, std::vector<double>{2, 0}, kMask2), 0.1,
              1e-14);
  // Fixed denominator: scaling the error scales the metric.
  const double a = relative_error(std::vector<double>{2.1, 0.1}, std::vector<double>{2, 0}, kMask2);
  const double b = relative_error(std::vector<double>{2.3, 0.3}, std::vector<double>{2, 0}, kMask2);
  EXPECT_NEAR(b, 3 * a, 1e-14);
  EXPECT_THROW(relative_error(std::vector<double>{1, 1}, std::vector<double>{5, 5}, kMask2), Error);
  EXPECT_THROW(relative_error(std::vector<double>{1, 1}, std::vector<double>{5, 4},
                              std::vector<std::uint8_t>{0, 0}),
               Error);
}

TEST(Metrics, NrmseIsDimensionless) {
  const std::vector<double> obs{2, 0, 4}, pred{2.5, -0.5, 4.2};
  const std::vector<std::uint8_t> mask{1, 1, 1};
  const double base = nrmse(pred, obs, mask);
  std::vector<double> obs10, pred10;
  for (double v : obs) obs10.push_back(10 * v + 300);
  for (double v : pred) pred10.push_back(10 * v + 300);
  EXPECT_NEAR(nrmse(pred10, obs10, mask), base, 1e-12);
}

TEST(Metrics, AbsoluteErrorExamples) {
  const std::vector<double> obs{1.0, 2.0, 3.0};
  const std::vector<std::uint8_t> mask{1, 0, 1};
  EXPECT_EQ(absolute_error(obs, obs, mask), (std::vector<double>{0, 0}));
  const auto e = absolute_error(std::vector<double>{1.1, 9.0, 2.8}, obs, mask);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], 0.1, 1e-15);
  EXPECT_NEAR(e[1], 0.2, 1e-15);
}

TEST(Evaluate, MeansEqualRecomputation) {
  const auto rep = evaluate(fixture().pred);
  ASSERT_FALSE(rep.eps_r.empty());
  EXPECT_EQ(rep.eps_r.size(), rep.nrmse.size());
  EXPECT_EQ(rep.eps_r.size(), rep.timepoint_layer.size());
  EXPECT_NEAR(rep.mean_eps_r_timepoints, mean(rep.eps_r), 1e-15 * rep.mean_eps_r_timepoints);
  EXPECT_NEAR(rep.mean_nrmse_timepoints, mean(rep.nrmse), 1e-15 * rep.mean_nrmse_timepoints);
  EXPECT_NEAR(rep.mean_eps_r_layers, mean(rep.layer_mean_eps_r), 1e-15 * rep.mean_eps_r_layers);
  EXPECT_NEAR(rep.mean_energy_metric, mean(rep.layer_energy_metric), 1e-15 + 1e-15 * rep.mean_energy_metric);
  for (double v : rep.eps_r) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
  const auto& last = fixture().pred.layers.back();
  std::size_t top = 0;
  for (auto m : last.observed) top += m;
  EXPECT_EQ(rep.abs_error.size(), top);
}

TEST(Evaluate, PerfectPredictionIsZero) {
  Prediction p = fixture().pred;
  for (auto& lp : p.layers) {
    for (std::size_t f = 0; f < lp.states.size(); ++f) {
      for (std::size_t i = 0; i < lp.states[f].size(); ++i) {
        if (lp.observed[i]) lp.states[f][i] = lp.obs[f][i];
      }
    }
  }
  const auto rep = evaluate(p);
  EXPECT_EQ(rep.mean_eps_r_timepoints, 0.0);
  for (double v : rep.abs_error) EXPECT_EQ(v, 0.0);
}

TEST(Evaluate, ReportJsonParses) {
  auto rep = evaluate(fixture().pred);
  rep.timings_s["inference"] = 0.5;
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(j["eps_r"].size(), rep.eps_r.size());
  EXPECT_EQ(j["timings_s"]["inference"].get<double>(), 0.5);
  EXPECT_EQ(j["mean_eps_r_timepoints"].get<double>(), rep.mean_eps_r_timepoints);
}

TEST(Ablation, OneCellGivesOneRowAndIsReproducible) {
  const auto& f = fixture();
  const std::vector<AblationCell> cells{{RegSubset::all, WeightPreset::high}};
  const auto a = run_ablation(f.synth.sequence, f.graphs, tiny_train(4), cells);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].iterations, 4u);
  const auto b = run_ablation(f.synth.sequence, f.graphs, tiny_train(4), cells);
  EXPECT_EQ(ablation_table(a), ablation_table(b));
  EXPECT_NE(ablation_table(a).find("all"), std::string::npos);
}

TEST(SchemeComparison, RowsAreFiniteAndNonNegative) {
  const auto& f = fixture();
  const auto rows = run_scheme_comparison(f.synth.sequence, f.graphs, tiny_train(4));
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_TRUE(std::isfinite(r.mean_eps_r));
    EXPECT_GE(r.mean_eps_r, 0.0);
    EXPECT_GE(r.mean_energy_metric, 0.0);
  }
  EXPECT_FALSE(scheme_table(rows).empty());
}

TEST(ExperimentConfig, ParsesAllSections) {
  const std::string text = R"({
    "synth": {"layers": 5, "alpha_true": 2.0, "seed": 9},
    "graph": {"prune_target": 50, "top_k": 3, "alpha": 4.5},
    "train": {"budget": 100, "window": 3, "scheme": "euler", "lr": 0.002, "substeps": 6,
              "reg": "phys", "weights": "low", "seed": 4},
    "cells": [["all", "high"], ["none", "none"]]
  })";
  const auto c = ExperimentConfig::from_json_text(text);
  EXPECT_EQ(c.synth.layers, 5);
  EXPECT_EQ(c.synth.alpha_true, 2.0);
  EXPECT_EQ(c.graph.prune_target, 50u);
  EXPECT_EQ(c.graph.top_k, 3);
  ASSERT_TRUE(c.graph.alpha.has_value());
  EXPECT_EQ(*c.graph.alpha, 4.5);
  EXPECT_EQ(c.train.budget, 100u);
  EXPECT_EQ(c.train.window, 3);
  EXPECT_EQ(c.train.rollout.step.scheme, Scheme::explicit_euler);
  EXPECT_EQ(c.train.adam.lr, 0.002);
  EXPECT_EQ(c.train.rollout.step.substeps, 6);
  EXPECT_EQ(c.train.weights.as_array(), LossWeights::preset(RegSubset::phys, WeightPreset::low).as_array());
  ASSERT_EQ(c.cells.size(), 2u);
  EXPECT_EQ(c.cells[1].subset, RegSubset::none);
  EXPECT_THROW(ExperimentConfig::from_json_text("{\"train\": [1, 2"), FormatError);
}

TEST(Export, StateSetRoundTrip) {
  const auto& f = fixture();
  tg_test::TempDir dir("states");
  const auto set = state_set_from_prediction(f.pred, f.synth.sequence);
  write_state_set(set, dir.path());
  const auto back = read_state_set(dir.path());
  ASSERT_EQ(back.states.size(), set.states.size());
  ASSERT_EQ(back.graphs.size(), set.graphs.size());
  for (std::size_t k = 0; k < set.states.size(); ++k) {
    EXPECT_EQ(back.states[k].values, set.states[k].values);
    EXPECT_EQ(back.states[k].time_s, set.states[k].time_s);
    EXPECT_EQ(back.states[k].obs, set.states[k].obs);
  }
}

TEST(Export, CsvRoundTrip) {
  const auto& f = fixture();
  tg_test::TempDir dir("csv");
  const auto set = state_set_from_prediction(f.pred, f.synth.sequence);
  const auto files = export_states(set, ExportFormat::csv, dir.path());
  ASSERT_EQ(files.size(), set.states.size());
  for (std::size_t k = 0; k < files.size(); ++k) {
    const auto rows = read_states_csv(files[k]);
    const auto& s = set.states[k];
    const auto& g = set.graphs[static_cast<std::size_t>(s.layer)];
    ASSERT_EQ(rows.size(), s.values.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(rows[i].id, static_cast<int>(i));
      EXPECT_EQ(rows[i].temperature, s.values[i]);
      EXPECT_EQ(rows[i].x, g.vertices[i].position.x);
      EXPECT_EQ(rows[i].z, g.vertices[i].position.z);
    }
  }
}

TEST(Export, VtkPointCountAndOrder) {
  const auto& f = fixture();
  tg_test::TempDir dir("vtk");
  const auto set = state_set_from_prediction(f.pred, f.synth.sequence);
  const auto files = export_states(set, ExportFormat::vtk, dir.path());
  const auto& s = set.states.back();
  const auto& g = set.graphs[static_cast<std::size_t>(s.layer)];
  const std::string text = tg_test::read_text(files.back());
  const auto pos = text.find("POINTS ");
  ASSERT_NE(pos, std::string::npos);
  std::istringstream in(text.substr(pos + 7));
  std::size_t n = 0;
  std::string type;
  in >> n >> type;
  EXPECT_EQ(n, g.num_vertices());
  for (std::size_t i = 0; i < n; ++i) {
    double x, y, z;
    in >> x >> y >> z;
    EXPECT_EQ(x, g.vertices[i].position.x);
    EXPECT_EQ(y, g.vertices[i].position.y);
    EXPECT_EQ(z, g.vertices[i].position.z);
  }
  EXPECT_NE(text.find("POINT_DATA " + std::to_string(n)), std::string::npos);
}

TEST(Export, JsonPlotSeriesLength) {
  const auto& f = fixture();
  tg_test::TempDir dir("plot");
  const auto set = state_set_from_prediction(f.pred, f.synth.sequence);
  const auto files = export_states(set, ExportFormat::json_plot, dir.path());
  ASSERT_EQ(files.size(), 1u);
  const auto j = nlohmann::json::parse(tg_test::read_text(files[0]));
  EXPECT_EQ(j["series"].size(), set.states.size());
  EXPECT_THROW(export_format_from_string("png"), Error);
}
