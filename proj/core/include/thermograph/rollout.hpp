#pragma once

#include <optional>
#include <span>
#include <vector>

#include "thermograph/diffusion.hpp"
#include "thermograph/losses.hpp"
#include "thermograph/submodels.hpp"

namespace thermograph {

/// Laser intensity is I = kLaserIntensityScale * i_raw (K per micro-step);
/// decay is eta = softplus(e_raw) / rho_ref (per mm), positive by construction.
/// The intensity scale lets optimizer steps of order lr move I by a useful
/// fraction of a kelvin.
inline constexpr double kLaserIntensityScale = 100.0;

struct LaserParams {
  double i_raw{0};
  double e_raw{0.5413248546129181};  // softplus(e_raw) = 1

  double intensity() const { return kLaserIntensityScale * i_raw; }
  double decay(const Normalization& norm) const { return softplus(e_raw) / norm.rho_ref; }
  static LaserParams from_physical(double intensity, double decay, const Normalization& norm);
};

struct Model {
  SubModels nets;
  LaserParams laser;
  Normalization norm;

  std::size_t num_params() const;
  /// Flat order: phi, psi, i_raw, e_raw.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

struct ModelGrads {
  MlpGrads phi;
  MlpGrads psi;
  double i_raw{0};
  double e_raw{0};

  static ModelGrads zeros_like(const Model& m);
  std::vector<double> flatten() const;
};

enum class PhiLossForm : std::uint8_t { direct, log_derivative };

struct RolloutConfig {
  StepConfig step;
  PhiLossForm phi_form{PhiLossForm::direct};
};

/// Per-graph data reused by every rollout on that graph.
struct GraphContext {
  LayeredGraph graph;
  FeatureTemplate tpl;
  std::vector<EdgePair> pairs;
  std::vector<double> rho;
  std::vector<std::vector<int>> neighbours;
  std::vector<std::uint8_t> observed;
  std::vector<int> interior;
  std::vector<Vec2> xy;

  static GraphContext build(const LayeredGraph& graph, const Normalization& norm);
  std::size_t n() const { return graph.num_vertices(); }
};

/// One data interval: optional observations at its end (full-length vector,
/// read on observed vertices only) and an optional laser centre in mm.
struct Interval {
  std::vector<double> obs;
  std::optional<Vec2> laser;
};

struct StepPhysics {
  double energy{0};
  double heat{0};
  double min{0};
  double max{0};

  double composite() const { return composite_energy_metric(energy, heat, min, max); }
};

struct MicroStepCache {
  std::vector<double> T;     // state entering the step
  std::vector<double> c;     // edge weights
  std::vector<double> Q;     // dissipation rates
  std::vector<double> x;     // linear-step result before dissipation
  std::vector<double> D;     // pre-laser result x - dt Q
  std::vector<double> q;     // laser increments
  std::vector<double> decay; // exp(-d eta) per vertex, 0 off the top layer
  std::vector<double> dist;  // laser distance per vertex
  MlpBatchCache phi_cache;
  MlpBatchCache psi_cache;
  Envelope envelope;
  SparseLaplacian L;
};

struct RolloutCache {
  std::vector<MicroStepCache> steps;
};

struct RolloutResult {
  std::vector<std::vector<double>> states;  // state at the end of each interval
  /// data: mean over intervals with observations; others: mean per micro-step.
  TermArray raw{};
  std::vector<StepPhysics> physics;  // per micro-step
  std::size_t micro_steps{0};
  std::size_t data_intervals{0};
  double max_cg_residual{0};
  bool finite{true};
};

/// Runs cfg.step.substeps micro-steps per interval, re-evaluating the
/// connectivity and dissipation each micro-step; physics losses are measured
/// on the pre-laser transition.
RolloutResult rollout(const GraphContext& ctx, const Model& model, std::span<const double> T0,
                      std::span<const Interval> intervals, const RolloutConfig& cfg,
                      RolloutCache* cache = nullptr);

/// Reverse-mode gradients of sum_t coeff[t] * raw[t] with respect to every
/// model parameter; implicit steps use the adjoint solve.
ModelGrads backward_through_rollout(const GraphContext& ctx, const Model& model,
                                    const RolloutCache& cache, std::span<const Interval> intervals,
                                    const RolloutResult& result, const RolloutConfig& cfg,
                                    const TermArray& coeff, double* max_adjoint_residual = nullptr);

/// Laser centre in mm from a frame, if a hot spot is present.
std::optional<Vec2> laser_center_mm(const ThermalFrame& frame, const SequenceManifest& manifest);

/// Laser centre during the interval ending at `cur`: present when `cur` has a
/// hot spot, located at the largest temperature rise since `prev` so that
/// pixels still hot from earlier passes are not mistaken for the spot.
std::optional<Vec2> laser_center_mm(const ThermalFrame& prev, const ThermalFrame& cur,
                                    const SequenceManifest& manifest);

}  // namespace thermograph
