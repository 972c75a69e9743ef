#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "thermograph/common.hpp"
#include "thermograph/mlp.hpp"

namespace thermograph {

enum class LossTerm : std::uint8_t { data = 0, phi, psi, heat, min, max, energy };
inline constexpr int kNumLossTerms = 7;
std::string_view to_string(LossTerm t);

using TermArray = std::array<double, kNumLossTerms>;

enum class RegSubset : std::uint8_t { all, math, phys, none };
enum class WeightPreset : std::uint8_t { high, normal, low, none };
std::string_view to_string(RegSubset s);
std::string_view to_string(WeightPreset p);
RegSubset reg_subset_from_string(std::string_view s);
WeightPreset weight_preset_from_string(std::string_view s);
double preset_factor(WeightPreset p);

struct LossWeights {
  double w_data{1};
  double w_phi{1};
  double w_psi{1};
  double w_heat{1};
  double w_min{1};
  double w_max{1};
  double w_energy{1};

  /// w_data = 1; regularizers in `subset` get the preset factor, others 0.
  static LossWeights preset(RegSubset subset, WeightPreset weights);
  TermArray as_array() const;
  static LossWeights from_array(const TermArray& a);
};

inline constexpr double kSnapshotFloor = 1e-12;

struct LossReport {
  TermArray raw{};
  TermArray normalized{};
  double total{0};

  /// One JSON object on a single line.
  std::string to_json_line() const;
};

/// normalized_t = raw_t / max(snapshot_t, floor); total = sum w_t normalized_t.
LossReport make_report(const TermArray& raw, const TermArray& snapshot, const LossWeights& w);
TermArray floored(const TermArray& snapshot);

/// Sum over observed vertices of (pred - obs)^2.
/// Throws Error("no observable vertices") on an empty mask.
double loss_data(std::span<const double> T_pred, std::span<const double> T_obs,
                 std::span<const std::uint8_t> mask);

/// sum_e (c_e - rho_e^-2)^2
double loss_phi(std::span<const double> c, std::span<const double> rho);

/// sum over interior vertices of Q_i^2
double loss_psi(std::span<const double> Q, std::span<const int> interior);

/// (sum_i (T_next - T_prev + applied))^2 where `applied` is the per-step
/// dissipated amount dt * Q.
double loss_heat(std::span<const double> T_prev, std::span<const double> T_next,
                 std::span<const double> applied);

/// Neighbourhood envelope of the previous state: for each vertex the
/// min/max over itself and its neighbours, plus the argmin/argmax vertex.
struct Envelope {
  std::vector<double> lo, hi;
  std::vector<int> arg_lo, arg_hi;
};
Envelope neighbourhood_envelope(std::span<const double> T_prev,
                                const std::vector<std::vector<int>>& neighbours);

struct MinMax {
  double min{0};
  double max{0};
};
MinMax loss_minmax(std::span<const double> T_prev, std::span<const double> T_next,
                   const std::vector<std::vector<int>>& neighbours);
MinMax loss_minmax(const Envelope& env, std::span<const double> T_next);

/// Mean squared deviation from the mean.
double discrete_energy(std::span<const double> T);
double loss_energy(std::span<const double> T_prev, std::span<const double> T_next);

/// Sum of the four physics-violation terms of one transition.
double composite_energy_metric(double energy, double heat, double min, double max);

double total_loss(const TermArray& raw, const TermArray& snapshot, const LossWeights& w);

/// Adjacency lists from undirected (i, j) pairs.
std::vector<std::vector<int>> neighbour_lists(std::size_t n, std::span<const std::pair<int, int>> edges);

/// Gradient helpers: accumulate scale * d(loss)/d(input) into the outputs.
void grad_loss_data(std::span<const double> T_pred, std::span<const double> T_obs,
                    std::span<const std::uint8_t> mask, double scale, std::span<double> dT);
void grad_loss_heat(std::span<const double> T_prev, std::span<const double> T_next,
                    std::span<const double> applied, double scale, std::span<double> dPrev,
                    std::span<double> dNext, std::span<double> dApplied);
void grad_loss_minmax(const Envelope& env, std::span<const double> T_next, double scale_min,
                      double scale_max, std::span<double> dPrev, std::span<double> dNext);
void grad_loss_energy(std::span<const double> T_prev, std::span<const double> T_next, double scale,
                      std::span<double> dPrev, std::span<double> dNext);

/// Log-derivative consistency form of the connectivity loss:
/// sum_e (dc/drho / c + 2/rho)^2 with c = c_scale * phi(x_e) and rho entering
/// through feature row 0 as rho / rho_ref. Returns the loss and, when
/// `grads` is non-null, accumulates scale * gradients into `grads` and into
/// `dX` (input x E, same layout as the batch cache).
double loss_phi_logderiv(const MlpParams& phi, const MlpBatchCache& cache,
                         std::span<const double> rho, double rho_ref, double scale,
                         MlpGrads* grads, Eigen::MatrixXd* dX);

}  // namespace thermograph
