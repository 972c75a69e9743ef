#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "thermograph/rollout.hpp"

namespace tg_test {

/// Random small rollout problem: graph, model, initial state and intervals
/// carrying observations and a moving laser.
struct RolloutProblem {
  thermograph::GraphContext ctx;
  thermograph::Model model;
  std::vector<double> T0;
  std::vector<thermograph::Interval> intervals;
  thermograph::RolloutConfig cfg;
};

inline RolloutProblem make_rollout_problem(thermograph::Scheme scheme, std::uint64_t seed,
                                           std::size_t n, int intervals, int substeps,
                                           int hidden = 16) {
  using namespace thermograph;
  std::mt19937_64 rng(seed);
  const LayeredGraph g = random_graph(n, n, rng);
  RolloutProblem p;
  p.model.nets = SubModels::xavier(seed, hidden);
  p.model.norm = Normalization::from_graph(g);
  p.model.norm.c_scale = 0.5 / (p.model.norm.rho_ref * p.model.norm.rho_ref);
  p.model.norm.q_scale = 5.0;
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  p.model.nets.psi.b2 = u(rng);
  p.model.laser = LaserParams::from_physical(20.0 + 10 * u(rng), 0.3 + 0.2 * u(rng), p.model.norm);
  p.ctx = GraphContext::build(g, p.model.norm);
  std::uniform_real_distribution<double> uT(400.0, 1400.0);
  for (std::size_t i = 0; i < n; ++i) p.T0.push_back(uT(rng));
  std::uniform_real_distribution<double> uxy(0.0, 10.0);
  for (int k = 0; k < intervals; ++k) {
    Interval iv;
    if (k % 2 == 0) iv.laser = Vec2{uxy(rng), uxy(rng)};
    if (k + 1 == intervals || k % 2 == 1) {
      iv.obs.resize(n);
      for (auto& v : iv.obs) v = uT(rng);
    }
    p.intervals.push_back(iv);
  }
  p.cfg.step.scheme = scheme;
  p.cfg.step.substeps = substeps;
  p.cfg.step.delta_t = 1.0 / 3.0;
  p.cfg.step.cg_tol = 1e-13;
  return p;
}

inline double weighted_total(const thermograph::TermArray& raw, const thermograph::TermArray& coeff) {
  double s = 0;
  for (int t = 0; t < thermograph::kNumLossTerms; ++t) s += coeff[t] * raw[t];
  return s;
}

struct GradCheckOutcome {
  bool pass{true};
  double worst_ratio{0};  // max |a - fd| / (rtol |fd| + atol) over components
  std::size_t components{0};
  std::string detail;
};

/// Compares backward_through_rollout against central differences of the
/// weighted loss over every model parameter. The absolute floor is 1e-6 of
/// the largest gradient component so entries that are zero up to rounding
/// do not dominate.
inline GradCheckOutcome check_rollout_gradients(const RolloutProblem& p,
                                                const thermograph::TermArray& coeff,
                                                double rtol = 1e-4) {
  using namespace thermograph;
  RolloutCache cache;
  const auto res = rollout(p.ctx, p.model, p.T0, p.intervals, p.cfg, &cache);
  const auto g = backward_through_rollout(p.ctx, p.model, cache, p.intervals, res, p.cfg, coeff)
                     .flatten();
  std::vector<double> flat = p.model.flatten();
  std::vector<double> fd(flat.size());
  Model m = p.model;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double keep = flat[k];
    const double h = 1e-6 * std::max(1.0, std::abs(keep));
    flat[k] = keep + h;
    m.unflatten(flat);
    const double fp = weighted_total(rollout(p.ctx, m, p.T0, p.intervals, p.cfg).raw, coeff);
    flat[k] = keep - h;
    m.unflatten(flat);
    const double fm = weighted_total(rollout(p.ctx, m, p.T0, p.intervals, p.cfg).raw, coeff);
    flat[k] = keep;
    fd[k] = (fp - fm) / (2 * h);
  }
  double gmax = 0;
  for (double v : fd) gmax = std::max(gmax, std::abs(v));
  const double atol = 1e-6 * gmax;
  GradCheckOutcome out;
  out.components = fd.size();
  for (std::size_t k = 0; k < fd.size(); ++k) {
    const double ratio = std::abs(g[k] - fd[k]) / (rtol * std::abs(fd[k]) + atol);
    if (ratio > out.worst_ratio) {
      out.worst_ratio = ratio;
      out.detail = "component " + std::to_string(k) + " analytic " + std::to_string(g[k]) +
                   " fd " + std::to_string(fd[k]);
    }
  }
  out.pass = out.worst_ratio <= 1.0;
  return out;
}

}  // namespace tg_test
