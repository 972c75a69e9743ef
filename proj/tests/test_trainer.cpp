#include <gtest/gtest.h>

#include <map>

#include "test_support.hpp"
#include "thermograph/synth.hpp"
#include "thermograph/trainer.hpp"

using namespace thermograph;

namespace {

struct Dataset {
  SynthResult synth;
  std::vector<LayeredGraph> graphs;
};

SynthConfig tiny_config(int layers) {
  SynthConfig c;
  c.width_px = 8;
  c.height_px = 8;
  c.base_px = 4;
  c.layers = layers;
  c.frames_per_layer = 4;
  c.gap_intervals = 1;
  c.seed = 5;
  return c;
}

const Dataset& dataset(int layers) {
  static std::map<int, Dataset> cache;
  auto it = cache.find(layers);
  if (it == cache.end()) {
    Dataset d;
    d.synth = generate_synthetic(tiny_config(layers));
    d.graphs = build_graph_sequence(d.synth.sequence, reference_graph_params());
    it = cache.emplace(layers, std::move(d)).first;
  }
  return it->second;
}

TrainConfig tiny_train(std::size_t budget) {
  TrainConfig cfg;
  cfg.budget = budget;
  cfg.adam.lr = 1e-3;
  cfg.rollout.step.substeps = 2;
  cfg.stage_tolerance = 0.0;
  cfg.seed = 3;
  return cfg;
}

void expect_same_prediction(const Prediction& a, const Prediction& b) {
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_EQ(a.layers[l].states, b.layers[l].states) << "layer " << l;
  }
  EXPECT_EQ(a.mean_data_loss, b.mean_data_loss);
}

}  // namespace

TEST(Curriculum, SingleStageIsPlainWindowTraining) {
  const auto& d = dataset(2);
  const auto r = train_curriculum(d.synth.sequence, d.graphs, tiny_train(6));
  ASSERT_EQ(r.stages.size(), 1u);
  EXPECT_EQ(r.stages[0].layer, 1);
  EXPECT_EQ(r.stages[0].iterations, 6u);
  EXPECT_EQ(r.total_iterations, 6u);
  EXPECT_EQ(r.history.size(), 6u);
  EXPECT_EQ(r.checkpoint.stages_completed, 1);
}

TEST(Curriculum, HiddenStateFollowsGraphGrowth) {
  const auto& d = dataset(4);
  const auto plans = plan_stages(d.synth.sequence, d.graphs, default_normalization(d.graphs[1]));
  ASSERT_EQ(plans.size(), 3u);
  Model m;
  m.norm = default_normalization(d.graphs[1]);
  m.nets = SubModels::xavier(1);
  const auto pred = predict_sequence(m, d.synth.sequence, d.graphs, RolloutConfig{});
  std::size_t prev = 0;
  for (std::size_t l = 0; l < pred.layers.size(); ++l) {
    const auto& lp = pred.layers[l];
    const std::size_t n = d.graphs[lp.layer].num_vertices();
    EXPECT_GE(n, prev);
    prev = n;
    for (const auto& s : lp.states) EXPECT_EQ(s.size(), n);
    // Observed set is the class-top set of the stage graph.
    const auto top = d.graphs[lp.layer].vertices_of_class(VertexClass::top);
    std::vector<std::uint8_t> mask(n, 0);
    for (int v : top) mask[v] = 1;
    EXPECT_EQ(lp.observed, mask);
  }
}

TEST(Curriculum, HandOffKeepsMatchedVertices) {
  const auto& d = dataset(3);
  const auto& a = d.graphs[1];
  const auto& b = d.graphs[2];
  std::vector<double> T(a.num_vertices());
  for (std::size_t i = 0; i < T.size(); ++i) T[i] = 300.0 + static_cast<double>(i);
  const auto out = hand_off(a, T, b);
  ASSERT_EQ(out.size(), b.num_vertices());
  for (std::size_t i = 0; i < a.num_vertices(); ++i) {
    for (std::size_t j = 0; j < b.num_vertices(); ++j) {
      if (a.vertices[i].position == b.vertices[j].position) EXPECT_EQ(out[j], T[i]);
    }
  }
}

TEST(Curriculum, FixedSeedIsBitReproducible) {
  const auto& d = dataset(3);
  tg_test::TempDir dir("train_det");
  auto cfg = tiny_train(8);
  cfg.checkpoint_path = dir / "a.ckpt";
  const auto ra = train_curriculum(d.synth.sequence, d.graphs, cfg);
  cfg.checkpoint_path = dir / "b.ckpt";
  const auto rb = train_curriculum(d.synth.sequence, d.graphs, cfg);
  EXPECT_EQ(tg_test::read_text(dir / "a.ckpt"), tg_test::read_text(dir / "b.ckpt"));
  EXPECT_EQ(ra.history, rb.history);
  EXPECT_EQ(ra.total_iterations, 8u);
}

TEST(Curriculum, ResumeMatchesUninterruptedRun) {
  const auto& d = dataset(3);
  tg_test::TempDir dir("train_resume");
  auto cfg = tiny_train(8);
  cfg.checkpoint_path = dir / "full.ckpt";
  train_curriculum(d.synth.sequence, d.graphs, cfg);

  cfg.checkpoint_path = dir / "part.ckpt";
  cfg.stop_after_stages = 1;
  const auto first = train_curriculum(d.synth.sequence, d.graphs, cfg);
  EXPECT_EQ(first.checkpoint.stages_completed, 1);
  cfg.stop_after_stages = 0;
  cfg.resume = true;
  const auto second = train_curriculum(d.synth.sequence, d.graphs, cfg);
  EXPECT_EQ(second.stages.size(), 1u);
  EXPECT_EQ(tg_test::read_text(dir / "full.ckpt"), tg_test::read_text(dir / "part.ckpt"));
}

TEST(Curriculum, TrainingReducesDataLoss) {
  const auto& d = dataset(3);
  auto cfg = tiny_train(40);
  const auto r = train_curriculum(d.synth.sequence, d.graphs, cfg);
  const auto& h = r.history;
  ASSERT_FALSE(h.empty());
  Model init;
  init.norm = default_normalization(d.graphs[1]);
  init.nets = SubModels::xavier(cfg.seed);
  init.laser = estimate_laser(d.synth.sequence, init.norm, cfg.rollout.step.substeps);
  const double before = predict_sequence(init, d.synth.sequence, d.graphs, cfg.rollout).mean_data_loss;
  const double after =
      predict_sequence(r.checkpoint.model, d.synth.sequence, d.graphs, cfg.rollout).mean_data_loss;
  EXPECT_LT(after, before);
}

TEST(Transfer, ZeroBudgetFinetuneEqualsInference) {
  const auto& d = dataset(3);
  const auto trained = train_curriculum(d.synth.sequence, d.graphs, tiny_train(6));
  auto cfg = tiny_train(0);
  const auto inf = transfer(trained.checkpoint, d.synth.sequence, d.graphs, TransferMode::inference, cfg);
  const auto ft = transfer(trained.checkpoint, d.synth.sequence, d.graphs, TransferMode::finetune, cfg);
  EXPECT_EQ(inf.iterations, 0u);
  EXPECT_EQ(ft.iterations, 0u);
  EXPECT_FALSE(ft.training.has_value());
  expect_same_prediction(inf.prediction, ft.prediction);
}

TEST(Transfer, InferenceReproducesTrainingPredictions) {
  const auto& d = dataset(3);
  const auto cfg = tiny_train(6);
  const auto trained = train_curriculum(d.synth.sequence, d.graphs, cfg);
  const auto direct = predict_sequence(trained.checkpoint.model, d.synth.sequence, d.graphs, cfg.rollout);
  const auto inf =
      transfer(trained.checkpoint, d.synth.sequence, d.graphs, TransferMode::inference, cfg);
  expect_same_prediction(direct, inf.prediction);
}

TEST(Transfer, FinetuneRunsRequestedBudget) {
  const auto& d = dataset(3);
  const auto trained = train_curriculum(d.synth.sequence, d.graphs, tiny_train(4));
  const auto ft =
      transfer(trained.checkpoint, d.synth.sequence, d.graphs, TransferMode::finetune, tiny_train(6));
  EXPECT_EQ(ft.iterations, 6u);
  ASSERT_TRUE(ft.training.has_value());
  EXPECT_NE(ft.training->checkpoint.model.flatten(), trained.checkpoint.model.flatten());
  EXPECT_THROW(transfer_mode_from_string("freeze"), Error);
}

TEST(Transfer, RejectsWrongFeatureWidth) {
  const auto& d = dataset(3);
  Checkpoint c;
  c.model.nets.phi = MlpParams::zeros(5, 8, OutputTransform::softplus);
  c.model.nets.psi = MlpParams::zeros(6, 8, OutputTransform::identity);
  EXPECT_THROW(transfer(c, d.synth.sequence, d.graphs, TransferMode::inference, tiny_train(0)),
               Error);
}
