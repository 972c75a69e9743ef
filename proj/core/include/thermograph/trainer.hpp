#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thermograph/adam.hpp"
#include "thermograph/checkpoint.hpp"
#include "thermograph/ingest.hpp"
#include "thermograph/rollout.hpp"

namespace thermograph {

/// Everything a curriculum stage needs from the data: stage n trains on
/// graph n (layers 0..n) against the frames of layer n.
struct StagePlan {
  int layer{0};
  GraphContext ctx;
  std::vector<std::vector<double>> obs;  // per frame of the layer, full-length
  std::vector<double> frame_times;
  std::vector<std::optional<Vec2>> laser;  // per interval, mm
  int gap_intervals{0};                    // laser-free intervals before the next layer

  std::size_t intervals() const { return obs.empty() ? 0 : obs.size() - 1; }
  std::vector<Interval> window(std::size_t first, std::size_t count) const;
  /// Copy of `T` with the observed vertices replaced by frame `f`.
  std::vector<double> overwrite(std::span<const double> T, std::size_t f) const;
};

/// Observed value per vertex of `graph` read from `frame` (0 off the top layer).
std::vector<double> observe(const LayeredGraph& graph, const ThermalFrame& frame,
                            const SequenceManifest& manifest);

std::vector<StagePlan> plan_stages(const ThermalSequence& seq, const std::vector<LayeredGraph>& graphs,
                                   const Normalization& norm);

/// State of the first stage: layer-0 vertices from the last layer-0 frame,
/// layer-1 vertices from the first layer-1 frame.
std::vector<double> initial_state(const ThermalSequence& seq, const StagePlan& first);

/// Carries a state of `from` onto the vertices of `to` by exact position;
/// unmatched vertices take the value of the nearest vertex of `from`.
std::vector<double> hand_off(const LayeredGraph& from, std::span<const double> T,
                             const LayeredGraph& to);

/// Runs the laser-free gap intervals of a stage.
std::vector<double> run_gap(const StagePlan& stage, const Model& model, std::span<const double> T,
                            const RolloutConfig& cfg);

/// Normalization and laser initialisation derived from data.
Normalization default_normalization(const LayeredGraph& reference);
LaserParams estimate_laser(const ThermalSequence& seq, const Normalization& norm, int substeps);

struct TrainConfig {
  RolloutConfig rollout;
  LossWeights weights;
  AdamConfig adam;
  std::size_t budget{4500};
  int window{2};
  double stage_tolerance{0.05};
  std::uint64_t seed{0};
  std::string material{"synthetic"};
  std::optional<std::filesystem::path> checkpoint_path;  // written after every stage
  std::optional<std::filesystem::path> history_path;     // one JSON line per iteration
  bool resume{false};
  int stop_after_stages{0};  // 0: run every stage
};

struct StageRecord {
  int layer{0};
  std::size_t iterations{0};
  bool converged{false};
  double last_cycle_data_norm{0};
  TermArray snapshot{};
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StageRecord> stages;
  std::vector<std::string> history;
  std::vector<std::string> warnings;
  std::size_t total_iterations{0};
  double max_forward_residual{0};
  double max_adjoint_residual{0};
};

/// Layer-by-layer training with hidden-state propagation. When `init` is
/// given training continues from it (fresh optimizer moments).
TrainResult train_curriculum(const ThermalSequence& seq, const std::vector<LayeredGraph>& graphs,
                             const TrainConfig& cfg, const std::optional<Model>& init = std::nullopt);

/// Free-running prediction per layer: each layer starts from its first frame
/// (observed) plus the propagated hidden state, then rolls out every interval
/// without further data.
struct LayerPrediction {
  int layer{0};
  std::vector<std::vector<double>> states;  // per frame (frame 0 = start state)
  std::vector<std::vector<double>> obs;
  std::vector<std::uint8_t> observed;
  std::vector<StepPhysics> physics;  // per micro-step
  TermArray raw{};
};

struct Prediction {
  std::vector<LayerPrediction> layers;
  std::vector<LayeredGraph> graphs;
  double mean_data_loss{0};  // mean over predicted intervals
};

Prediction predict_sequence(const Model& model, const ThermalSequence& seq,
                            const std::vector<LayeredGraph>& graphs, const RolloutConfig& cfg);

enum class TransferMode : std::uint8_t { inference, finetune };
TransferMode transfer_mode_from_string(std::string_view s);

struct TransferResult {
  std::optional<TrainResult> training;  // finetune only
  Prediction prediction;
  std::size_t iterations{0};
};

/// Inference: rollout with frozen parameters. Finetune: fresh ADAM moments,
/// continue training for cfg.budget iterations, then predict.
TransferResult transfer(const Checkpoint& base, const ThermalSequence& seq,
                        const std::vector<LayeredGraph>& graphs, TransferMode mode,
                        const TrainConfig& cfg);

}  // namespace thermograph
