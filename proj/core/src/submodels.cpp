#include "thermograph/submodels.hpp"

namespace thermograph {

Normalization Normalization::from_graph(const LayeredGraph& graph) {
  Normalization n;
  const double rho = graph.median_edge_length();
  const double sid = graph.median_sid();
  if (rho > 0) n.rho_ref = rho;
  if (sid > 0) n.sid_ref = sid;
  return n;
}

SubModels SubModels::zeros(int hidden) {
  return {MlpParams::zeros(kEdgeFeatureDim, hidden, OutputTransform::softplus),
          MlpParams::zeros(kVertexFeatureDim, hidden, OutputTransform::identity)};
}

SubModels SubModels::xavier(std::uint64_t seed, int hidden) {
  return {MlpParams::xavier(kEdgeFeatureDim, hidden, OutputTransform::softplus, seed),
          MlpParams::xavier(kVertexFeatureDim, hidden, OutputTransform::identity,
                            seed ^ 0x9e3779b97f4a7c15ULL)};
}

FeatureTemplate FeatureTemplate::build(const LayeredGraph& g, const Normalization& norm) {
  FeatureTemplate t;
  const auto E = static_cast<Eigen::Index>(g.edges.size());
  const auto N = static_cast<Eigen::Index>(g.vertices.size());
  t.edge = Eigen::MatrixXd::Zero(kEdgeFeatureDim, E);
  t.vertex = Eigen::MatrixXd::Zero(kVertexFeatureDim, N);
  t.ei.resize(g.edges.size());
  t.ej.resize(g.edges.size());
  for (Eigen::Index e = 0; e < E; ++e) {
    const auto& ed = g.edges[static_cast<std::size_t>(e)];
    const int i = std::min(ed.i, ed.j), j = std::max(ed.i, ed.j);
    t.ei[e] = i;
    t.ej[e] = j;
    t.edge(0, e) = ed.rho / norm.rho_ref;
    t.edge(3 + static_cast<int>(g.vertices[i].cls), e) = 1.0;
    t.edge(7 + static_cast<int>(g.vertices[j].cls), e) = 1.0;
    t.edge(11, e) = g.vertices[i].sid / norm.sid_ref;
    t.edge(12, e) = g.vertices[j].sid / norm.sid_ref;
  }
  for (Eigen::Index v = 0; v < N; ++v) {
    const auto& vx = g.vertices[static_cast<std::size_t>(v)];
    t.vertex(1 + static_cast<int>(vx.cls), v) = 1.0;
    t.vertex(5, v) = vx.sid / norm.sid_ref;
  }
  return t;
}

Eigen::MatrixXd edge_features(const FeatureTemplate& tpl, std::span<const double> T,
                              const Normalization& norm) {
  Eigen::MatrixXd X = tpl.edge;
  for (Eigen::Index e = 0; e < X.cols(); ++e) {
    X(kEdgeFeatureTi, e) = T[tpl.ei[e]] / norm.T_ref;
    X(kEdgeFeatureTj, e) = T[tpl.ej[e]] / norm.T_ref;
  }
  return X;
}

Eigen::MatrixXd vertex_features(const FeatureTemplate& tpl, std::span<const double> T,
                                const Normalization& norm) {
  Eigen::MatrixXd X = tpl.vertex;
  for (Eigen::Index v = 0; v < X.cols(); ++v) X(kVertexFeatureT, v) = T[v] / norm.T_ref;
  return X;
}

std::vector<double> connectivity(const MlpParams& phi, const LayeredGraph& graph,
                                 std::span<const double> T, const Normalization& norm) {
  if (phi.transform != OutputTransform::softplus) {
    throw Error("connectivity: phi must use a softplus output");
  }
  if (T.size() != graph.num_vertices()) throw Error("connectivity: state dimension mismatch");
  const auto tpl = FeatureTemplate::build(graph, norm);
  const Eigen::VectorXd y = mlp_forward_batch(phi, edge_features(tpl, T, norm));
  std::vector<double> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index e = 0; e < y.size(); ++e) out[e] = norm.c_scale * y(e);
  return out;
}

std::vector<double> dissipation(const MlpParams& psi, const LayeredGraph& graph,
                                std::span<const double> T, const Normalization& norm) {
  if (T.size() != graph.num_vertices()) throw Error("dissipation: state dimension mismatch");
  const auto tpl = FeatureTemplate::build(graph, norm);
  const Eigen::VectorXd y = mlp_forward_batch(psi, vertex_features(tpl, T, norm));
  std::vector<double> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index v = 0; v < y.size(); ++v) out[v] = norm.q_scale * y(v);
  return out;
}

}  // namespace thermograph
