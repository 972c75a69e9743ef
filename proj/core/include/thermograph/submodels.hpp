#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "thermograph/graph.hpp"
#include "thermograph/mlp.hpp"

namespace thermograph {

inline constexpr int kEdgeFeatureDim = 13;
inline constexpr int kVertexFeatureDim = 6;

/// Edge feature rows: rho, T_i, T_j, onehot(C_i), onehot(C_j), sid_i, sid_j.
inline constexpr int kEdgeFeatureTi = 1;
inline constexpr int kEdgeFeatureTj = 2;
/// Vertex feature rows: T, onehot(C), sid.
inline constexpr int kVertexFeatureT = 0;

/// Input scales and output scales of the sub-models.
/// c_ij = c_scale * phi(x), Q_i = q_scale * psi(x).
struct Normalization {
  double T_ref{1000.0};
  double rho_ref{1.0};
  double sid_ref{1.0};
  double c_scale{1.0};
  double q_scale{1.0};

  /// rho_ref and sid_ref from the median edge length and median SID.
  static Normalization from_graph(const LayeredGraph& graph);
};

struct SubModels {
  MlpParams phi;  // connectivity, softplus output
  MlpParams psi;  // dissipation, identity output

  static SubModels zeros(int hidden = kHiddenWidth);
  static SubModels xavier(std::uint64_t seed, int hidden = kHiddenWidth);
};

/// Temperature-independent part of the features, built once per graph.
struct FeatureTemplate {
  Eigen::MatrixXd edge;    // kEdgeFeatureDim x E, temperature rows left zero
  Eigen::MatrixXd vertex;  // kVertexFeatureDim x N
  std::vector<int> ei, ej;

  static FeatureTemplate build(const LayeredGraph& graph, const Normalization& norm);
};

Eigen::MatrixXd edge_features(const FeatureTemplate& tpl, std::span<const double> T,
                              const Normalization& norm);
Eigen::MatrixXd vertex_features(const FeatureTemplate& tpl, std::span<const double> T,
                                const Normalization& norm);

/// One edge weight per graph edge, in graph edge order.
std::vector<double> connectivity(const MlpParams& phi, const LayeredGraph& graph,
                                 std::span<const double> T, const Normalization& norm = {});
std::vector<double> dissipation(const MlpParams& psi, const LayeredGraph& graph,
                                std::span<const double> T, const Normalization& norm = {});

}  // namespace thermograph
