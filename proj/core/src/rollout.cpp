#include "thermograph/rollout.hpp"

#include <algorithm>
#include <cmath>

namespace thermograph {

LaserParams LaserParams::from_physical(double intensity, double decay, const Normalization& norm) {
  LaserParams p;
  p.i_raw = intensity / kLaserIntensityScale;
  const double s = std::max(decay * norm.rho_ref, 1e-12);
  // Inverse softplus.
  p.e_raw = s > 30 ? s : std::log(std::expm1(s));
  return p;
}

std::size_t Model::num_params() const {
  return nets.phi.num_params() + nets.psi.num_params() + 2;
}

std::vector<double> Model::flatten() const {
  std::vector<double> out = nets.phi.flatten();
  const auto psi = nets.psi.flatten();
  out.insert(out.end(), psi.begin(), psi.end());
  out.push_back(laser.i_raw);
  out.push_back(laser.e_raw);
  return out;
}

void Model::unflatten(std::span<const double> flat) {
  if (flat.size() != num_params()) throw Error("Model::unflatten: size mismatch");
  const std::size_t np = nets.phi.num_params(), nq = nets.psi.num_params();
  nets.phi.unflatten(flat.subspan(0, np));
  nets.psi.unflatten(flat.subspan(np, nq));
  laser.i_raw = flat[np + nq];
  laser.e_raw = flat[np + nq + 1];
}

ModelGrads ModelGrads::zeros_like(const Model& m) {
  return {MlpGrads::zeros_like(m.nets.phi), MlpGrads::zeros_like(m.nets.psi), 0.0, 0.0};
}

std::vector<double> ModelGrads::flatten() const {
  std::vector<double> out = phi.flatten();
  const auto q = psi.flatten();
  out.insert(out.end(), q.begin(), q.end());
  out.push_back(i_raw);
  out.push_back(e_raw);
  return out;
}

GraphContext GraphContext::build(const LayeredGraph& graph, const Normalization& norm) {
  GraphContext ctx;
  ctx.graph = graph;
  ctx.tpl = FeatureTemplate::build(graph, norm);
  ctx.pairs = edge_pairs(graph);
  std::vector<std::pair<int, int>> e;
  for (const auto& ed : graph.edges) {
    ctx.rho.push_back(ed.rho);
    e.emplace_back(ed.i, ed.j);
  }
  ctx.neighbours = neighbour_lists(graph.num_vertices(), e);
  ctx.observed = graph.observed_mask();
  ctx.interior = graph.vertices_of_class(VertexClass::interior);
  for (const auto& v : graph.vertices) ctx.xy.push_back({v.position.x, v.position.y});
  return ctx;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

RolloutResult rollout(const GraphContext& ctx, const Model& model, std::span<const double> T0,
                      std::span<const Interval> intervals, const RolloutConfig& cfg,
                      RolloutCache* cache) {
  const std::size_t n = ctx.n();
  if (T0.size() != n) throw Error("rollout: initial state dimension mismatch");
  const StepConfig& sc = cfg.step;
  if (sc.substeps < 1) throw Error("rollout: substeps must be >= 1");
  const double dt = sc.micro_dt();
  const Normalization& norm = model.norm;
  const double I = model.laser.intensity();
  const double eta = model.laser.decay(norm);

  RolloutResult res;
  if (cache) cache->steps.clear();
  std::vector<double> cur(T0.begin(), T0.end());
  TermArray sums{};

  for (const auto& iv : intervals) {
    for (int s = 0; s < sc.substeps; ++s) {
      MicroStepCache mc;
      MlpBatchCache* phi_cache = cache ? &mc.phi_cache : nullptr;
      MlpBatchCache* psi_cache = cache ? &mc.psi_cache : nullptr;
      MlpBatchCache local_phi;
      if (cfg.phi_form == PhiLossForm::log_derivative && !phi_cache) phi_cache = &local_phi;

      const Eigen::VectorXd yc =
          mlp_forward_batch(model.nets.phi, edge_features(ctx.tpl, cur, norm), phi_cache);
      const Eigen::VectorXd yq =
          mlp_forward_batch(model.nets.psi, vertex_features(ctx.tpl, cur, norm), psi_cache);
      std::vector<double> c(static_cast<std::size_t>(yc.size())), Q(n);
      for (std::size_t e = 0; e < c.size(); ++e) c[e] = norm.c_scale * yc(static_cast<Eigen::Index>(e));
      for (std::size_t i = 0; i < n; ++i) Q[i] = norm.q_scale * yq(static_cast<Eigen::Index>(i));

      const SparseLaplacian L = assemble_laplacian(n, ctx.pairs, c);
      std::vector<double> x;
      CgStats stats;
      const std::vector<double> zero(n, 0.0);
      x = step(sc.scheme, L, cur, zero, dt, sc, &stats);
      res.max_cg_residual = std::max(res.max_cg_residual, stats.relative_residual);

      std::vector<double> D(n), applied(n);
      for (std::size_t i = 0; i < n; ++i) {
        applied[i] = dt * Q[i];
        D[i] = x[i] - applied[i];
      }

      std::vector<double> next = D;
      std::vector<double> q(n, 0.0), decay(n, 0.0), dist(n, 0.0);
      if (iv.laser) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!ctx.observed[i]) continue;
          dist[i] = std::hypot(ctx.xy[i].x - iv.laser->x, ctx.xy[i].y - iv.laser->y);
          decay[i] = std::exp(-dist[i] * eta);
          q[i] = I * decay[i];
          next[i] += q[i];
        }
      }

      Envelope env = neighbourhood_envelope(cur, ctx.neighbours);
      StepPhysics ph;
      const MinMax mm = loss_minmax(env, D);
      ph.min = mm.min;
      ph.max = mm.max;
      ph.energy = loss_energy(cur, D);
      ph.heat = loss_heat(cur, D, applied);
      res.physics.push_back(ph);

      double lphi = 0;
      if (cfg.phi_form == PhiLossForm::direct) {
        lphi = loss_phi(c, ctx.rho);
      } else {
        lphi = loss_phi_logderiv(model.nets.phi, *phi_cache, ctx.rho, norm.rho_ref, 0.0, nullptr,
                                 nullptr);
      }
      sums[static_cast<int>(LossTerm::phi)] += lphi;
      sums[static_cast<int>(LossTerm::psi)] += loss_psi(Q, ctx.interior);
      sums[static_cast<int>(LossTerm::heat)] += ph.heat;
      sums[static_cast<int>(LossTerm::min)] += ph.min;
      sums[static_cast<int>(LossTerm::max)] += ph.max;
      sums[static_cast<int>(LossTerm::energy)] += ph.energy;
      ++res.micro_steps;

      if (cache) {
        mc.T = cur;
        mc.c = std::move(c);
        mc.Q = std::move(Q);
        mc.x = std::move(x);
        mc.D = std::move(D);
        mc.q = std::move(q);
        mc.decay = std::move(decay);
        mc.dist = std::move(dist);
        mc.envelope = std::move(env);
        mc.L = L;
        cache->steps.push_back(std::move(mc));
      }
      cur = std::move(next);
    }
    if (!all_finite(cur)) res.finite = false;
    res.states.push_back(cur);
    if (!iv.obs.empty()) {
      sums[static_cast<int>(LossTerm::data)] += loss_data(cur, iv.obs, ctx.observed);
      ++res.data_intervals;
    }
  }

  res.raw = sums;
  if (res.data_intervals > 0) res.raw[0] /= static_cast<double>(res.data_intervals);
  if (res.micro_steps > 0) {
    for (int t = 1; t < kNumLossTerms; ++t) res.raw[t] /= static_cast<double>(res.micro_steps);
  }
  for (double v : res.raw) {
    if (!std::isfinite(v)) res.finite = false;
  }
  return res;
}

ModelGrads backward_through_rollout(const GraphContext& ctx, const Model& model,
                                    const RolloutCache& cache, std::span<const Interval> intervals,
                                    const RolloutResult& result, const RolloutConfig& cfg,
                                    const TermArray& coeff, double* max_adjoint_residual) {
  const std::size_t n = ctx.n();
  const std::size_t E = ctx.pairs.size();
  const StepConfig& sc = cfg.step;
  const double dt = sc.micro_dt();
  const Normalization& norm = model.norm;
  const double I = model.laser.intensity();
  if (cache.steps.size() != intervals.size() * static_cast<std::size_t>(sc.substeps)) {
    throw Error("backward_through_rollout: cache does not match the intervals");
  }

  ModelGrads g = ModelGrads::zeros_like(model);
  const double k_data =
      result.data_intervals ? coeff[0] / static_cast<double>(result.data_intervals) : 0.0;
  TermArray k{};
  for (int t = 1; t < kNumLossTerms; ++t) {
    k[t] = result.micro_steps ? coeff[t] / static_cast<double>(result.micro_steps) : 0.0;
  }
  const double k_phi = k[static_cast<int>(LossTerm::phi)];
  const double k_psi = k[static_cast<int>(LossTerm::psi)];
  const double k_heat = k[static_cast<int>(LossTerm::heat)];
  const double k_min = k[static_cast<int>(LossTerm::min)];
  const double k_max = k[static_cast<int>(LossTerm::max)];
  const double k_energy = k[static_cast<int>(LossTerm::energy)];

  double dI = 0, deta = 0, adj_res = 0;
  std::vector<double> gT(n, 0.0);
  std::size_t m = cache.steps.size();
  for (std::size_t kk = intervals.size(); kk-- > 0;) {
    if (!intervals[kk].obs.empty() && k_data != 0) {
      grad_loss_data(result.states[kk], intervals[kk].obs, ctx.observed, k_data, gT);
    }
    for (int s = sc.substeps; s-- > 0;) {
      const MicroStepCache& mc = cache.steps[--m];
      std::vector<double> gD = gT;
      if (intervals[kk].laser) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!ctx.observed[i]) continue;
          dI += gD[i] * mc.decay[i];
          deta -= gD[i] * I * mc.dist[i] * mc.decay[i];
        }
      }

      std::vector<double> gPrev(n, 0.0), gQ(n, 0.0), gc(E, 0.0);
      if (k_heat != 0) {
        std::vector<double> applied(n), gApplied(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) applied[i] = dt * mc.Q[i];
        grad_loss_heat(mc.T, mc.D, applied, k_heat, gPrev, gD, gApplied);
        for (std::size_t i = 0; i < n; ++i) gQ[i] += dt * gApplied[i];
      }
      if (k_min != 0 || k_max != 0) grad_loss_minmax(mc.envelope, mc.D, k_min, k_max, gPrev, gD);
      if (k_energy != 0) grad_loss_energy(mc.T, mc.D, k_energy, gPrev, gD);
      if (k_phi != 0 && cfg.phi_form == PhiLossForm::direct) {
        for (std::size_t e = 0; e < E; ++e) {
          gc[e] += k_phi * 2.0 * (mc.c[e] - 1.0 / (ctx.rho[e] * ctx.rho[e]));
        }
      }
      if (k_psi != 0) {
        for (int i : ctx.interior) gQ[i] += k_psi * 2.0 * mc.Q[i];
      }

      // D = x - dt Q
      for (std::size_t i = 0; i < n; ++i) gQ[i] -= dt * gD[i];
      const std::vector<double>& gx = gD;
      switch (sc.scheme) {
        case Scheme::explicit_euler: {
          const auto Lg = mc.L.multiply(gx);
          for (std::size_t i = 0; i < n; ++i) gPrev[i] += gx[i] + dt * Lg[i];
          for (std::size_t e = 0; e < E; ++e) {
            const int i = ctx.pairs[e].i, j = ctx.pairs[e].j;
            gc[e] += dt * (gx[i] - gx[j]) * (mc.T[j] - mc.T[i]);
          }
          break;
        }
        case Scheme::backward_euler: {
          std::vector<double> lam(n);
          const CgStats st = solve_shifted(mc.L, dt, gx, lam, sc.cg_tol, sc.cg_max_iter, sc.jacobi);
          adj_res = std::max(adj_res, st.relative_residual);
          for (std::size_t i = 0; i < n; ++i) gPrev[i] += lam[i];
          for (std::size_t e = 0; e < E; ++e) {
            const int i = ctx.pairs[e].i, j = ctx.pairs[e].j;
            gc[e] += dt * (lam[i] - lam[j]) * (mc.x[j] - mc.x[i]);
          }
          break;
        }
        case Scheme::crank_nicolson: {
          const double a = 0.5 * dt;
          std::vector<double> lam(n);
          const CgStats st = solve_shifted(mc.L, a, gx, lam, sc.cg_tol, sc.cg_max_iter, sc.jacobi);
          adj_res = std::max(adj_res, st.relative_residual);
          const auto Ll = mc.L.multiply(lam);
          for (std::size_t i = 0; i < n; ++i) gPrev[i] += lam[i] + a * Ll[i];
          for (std::size_t e = 0; e < E; ++e) {
            const int i = ctx.pairs[e].i, j = ctx.pairs[e].j;
            const double yi = mc.x[i] + mc.T[i], yj = mc.x[j] + mc.T[j];
            gc[e] += a * (lam[i] - lam[j]) * (yj - yi);
          }
          break;
        }
      }

      Eigen::VectorXd dyc(static_cast<Eigen::Index>(E));
      for (std::size_t e = 0; e < E; ++e) dyc(static_cast<Eigen::Index>(e)) = gc[e] * norm.c_scale;
      Eigen::MatrixXd dXe;
      mlp_backward_batch(model.nets.phi, mc.phi_cache, dyc, g.phi, &dXe);
      if (k_phi != 0 && cfg.phi_form == PhiLossForm::log_derivative) {
        Eigen::MatrixXd dXl;
        loss_phi_logderiv(model.nets.phi, mc.phi_cache, ctx.rho, norm.rho_ref, k_phi, &g.phi, &dXl);
        dXe += dXl;
      }
      for (std::size_t e = 0; e < E; ++e) {
        const auto ee = static_cast<Eigen::Index>(e);
        gPrev[ctx.tpl.ei[e]] += dXe(kEdgeFeatureTi, ee) / norm.T_ref;
        gPrev[ctx.tpl.ej[e]] += dXe(kEdgeFeatureTj, ee) / norm.T_ref;
      }

      Eigen::VectorXd dyq(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) dyq(static_cast<Eigen::Index>(i)) = gQ[i] * norm.q_scale;
      Eigen::MatrixXd dXv;
      mlp_backward_batch(model.nets.psi, mc.psi_cache, dyq, g.psi, &dXv);
      for (std::size_t i = 0; i < n; ++i) {
        gPrev[i] += dXv(kVertexFeatureT, static_cast<Eigen::Index>(i)) / norm.T_ref;
      }
      gT = std::move(gPrev);
    }
  }
  g.i_raw = kLaserIntensityScale * dI;
  g.e_raw = deta * sigmoid(model.laser.e_raw) / norm.rho_ref;
  if (max_adjoint_residual) *max_adjoint_residual = adj_res;
  return g;
}

std::optional<Vec2> laser_center_mm(const ThermalFrame& frame, const SequenceManifest& manifest) {
  const auto px = detect_laser(frame, manifest.threshold_K);
  if (!px) return std::nullopt;
  return Vec2{px->x * manifest.pixel_pitch_mm, px->y * manifest.pixel_pitch_mm};
}

std::optional<Vec2> laser_center_mm(const ThermalFrame& prev, const ThermalFrame& cur,
                                    const SequenceManifest& manifest) {
  if (!detect_laser(cur, manifest.threshold_K)) return std::nullopt;
  if (prev.width != cur.width || prev.height != cur.height) return laser_center_mm(cur, manifest);
  ThermalFrame rise = cur;
  for (std::size_t k = 0; k < rise.values.size(); ++k) rise.values[k] -= prev.values[k];
  // The rise field is not in kelvin; a zero threshold only skips the hot-spot gate.
  const auto px = detect_laser(rise, 0.0);
  if (!px) return laser_center_mm(cur, manifest);
  return Vec2{px->x * manifest.pixel_pitch_mm, px->y * manifest.pixel_pitch_mm};
}

}  // namespace thermograph
