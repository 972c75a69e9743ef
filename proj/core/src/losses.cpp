#include "thermograph/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thermograph/common.hpp"
#include "thermograph/numeric_text.hpp"

namespace thermograph {

std::string_view to_string(LossTerm t) {
  static constexpr std::array<std::string_view, kNumLossTerms> names{
      "data", "phi", "psi", "heat", "min", "max", "energy"};
  return names[static_cast<int>(t)];
}

std::string_view to_string(RegSubset s) {
  switch (s) {
    case RegSubset::all: return "all";
    case RegSubset::math: return "math";
    case RegSubset::phys: return "phys";
    case RegSubset::none: return "none";
  }
  return "none";
}

std::string_view to_string(WeightPreset p) {
  switch (p) {
    case WeightPreset::high: return "high";
    case WeightPreset::normal: return "normal";
    case WeightPreset::low: return "low";
    case WeightPreset::none: return "none";
  }
  return "none";
}

RegSubset reg_subset_from_string(std::string_view s) {
  if (s == "all") return RegSubset::all;
  if (s == "math") return RegSubset::math;
  if (s == "phys") return RegSubset::phys;
  if (s == "none") return RegSubset::none;
  throw Error("unknown regularization subset '" + std::string(s) + "'");
}

WeightPreset weight_preset_from_string(std::string_view s) {
  if (s == "high") return WeightPreset::high;
  if (s == "normal") return WeightPreset::normal;
  if (s == "low") return WeightPreset::low;
  if (s == "none") return WeightPreset::none;
  throw Error("unknown weight preset '" + std::string(s) + "'");
}

double preset_factor(WeightPreset p) {
  switch (p) {
    case WeightPreset::high: return 10.0;
    case WeightPreset::normal: return 1.0;
    case WeightPreset::low: return 0.1;
    case WeightPreset::none: return 0.0;
  }
  return 0.0;
}

LossWeights LossWeights::preset(RegSubset subset, WeightPreset weights) {
  const double f = preset_factor(weights);
  const bool math = subset == RegSubset::all || subset == RegSubset::math;
  const bool phys = subset == RegSubset::all || subset == RegSubset::phys;
  LossWeights w;
  w.w_data = 1;
  w.w_phi = math ? f : 0;
  w.w_psi = math ? f : 0;
  w.w_heat = math ? f : 0;
  w.w_min = phys ? f : 0;
  w.w_max = phys ? f : 0;
  w.w_energy = phys ? f : 0;
  return w;
}

TermArray LossWeights::as_array() const {
  return {w_data, w_phi, w_psi, w_heat, w_min, w_max, w_energy};
}

LossWeights LossWeights::from_array(const TermArray& a) {
  for (double v : a) {
    if (!(v >= 0) || !std::isfinite(v)) throw Error("loss weights must be finite and >= 0");
  }
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

TermArray floored(const TermArray& snapshot) {
  TermArray out;
  for (int t = 0; t < kNumLossTerms; ++t) out[t] = std::max(snapshot[t], kSnapshotFloor);
  return out;
}

LossReport make_report(const TermArray& raw, const TermArray& snapshot, const LossWeights& w) {
  LossReport r;
  r.raw = raw;
  const TermArray snap = floored(snapshot);
  const TermArray wa = w.as_array();
  for (int t = 0; t < kNumLossTerms; ++t) {
    r.normalized[t] = raw[t] / snap[t];
    r.total += wa[t] * r.normalized[t];
  }
  return r;
}

double total_loss(const TermArray& raw, const TermArray& snapshot, const LossWeights& w) {
  return make_report(raw, snapshot, w).total;
}

std::string LossReport::to_json_line() const {
  std::ostringstream out;
  out << "{";
  for (int t = 0; t < kNumLossTerms; ++t) {
    out << (t ? ", " : "") << "\"" << to_string(static_cast<LossTerm>(t))
        << "\": " << format_double(raw[t]);
  }
  for (int t = 0; t < kNumLossTerms; ++t) {
    out << ", \"" << to_string(static_cast<LossTerm>(t))
        << "_norm\": " << format_double(normalized[t]);
  }
  out << ", \"total\": " << format_double(total) << "}";
  return out.str();
}

double loss_data(std::span<const double> T_pred, std::span<const double> T_obs,
                 std::span<const std::uint8_t> mask) {
  if (T_pred.size() != T_obs.size() || T_pred.size() != mask.size()) {
    throw Error("loss_data: dimension mismatch");
  }
  double s = 0;
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    any = true;
    const double d = T_pred[i] - T_obs[i];
    s += d * d;
  }
  if (!any) throw Error("no observable vertices");
  return s;
}

double loss_phi(std::span<const double> c, std::span<const double> rho) {
  double s = 0;
  for (std::size_t e = 0; e < c.size(); ++e) {
    const double d = c[e] - 1.0 / (rho[e] * rho[e]);
    s += d * d;
  }
  return s;
}

double loss_psi(std::span<const double> Q, std::span<const int> interior) {
  double s = 0;
  for (int i : interior) s += Q[i] * Q[i];
  return s;
}

namespace {

double heat_imbalance(std::span<const double> T_prev, std::span<const double> T_next,
                      std::span<const double> applied) {
  double s = 0;
  for (std::size_t i = 0; i < T_prev.size(); ++i) s += T_next[i] - T_prev[i] + applied[i];
  return s;
}

}  // namespace

double loss_heat(std::span<const double> T_prev, std::span<const double> T_next,
                 std::span<const double> applied) {
  const double s = heat_imbalance(T_prev, T_next, applied);
  return s * s;
}

Envelope neighbourhood_envelope(std::span<const double> T_prev,
                                const std::vector<std::vector<int>>& neighbours) {
  const std::size_t n = T_prev.size();
  Envelope env;
  env.lo.resize(n);
  env.hi.resize(n);
  env.arg_lo.resize(n);
  env.arg_hi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int lo = static_cast<int>(i), hi = static_cast<int>(i);
    if (i < neighbours.size()) {
      for (int j : neighbours[i]) {
        if (T_prev[j] < T_prev[lo]) lo = j;
        if (T_prev[j] > T_prev[hi]) hi = j;
      }
    }
    env.lo[i] = T_prev[lo];
    env.hi[i] = T_prev[hi];
    env.arg_lo[i] = lo;
    env.arg_hi[i] = hi;
  }
  return env;
}

MinMax loss_minmax(const Envelope& env, std::span<const double> T_next) {
  MinMax m;
  for (std::size_t i = 0; i < T_next.size(); ++i) {
    const double over = T_next[i] - env.hi[i];
    const double under = env.lo[i] - T_next[i];
    if (over > 0) m.max += over * over;
    if (under > 0) m.min += under * under;
  }
  return m;
}

MinMax loss_minmax(std::span<const double> T_prev, std::span<const double> T_next,
                   const std::vector<std::vector<int>>& neighbours) {
  return loss_minmax(neighbourhood_envelope(T_prev, neighbours), T_next);
}

double discrete_energy(std::span<const double> T) {
  if (T.empty()) throw Error("discrete_energy: empty state");
  double mean = 0;
  for (double v : T) mean += v;
  mean /= static_cast<double>(T.size());
  double s = 0;
  for (double v : T) s += (v - mean) * (v - mean);
  return s / static_cast<double>(T.size());
}

double loss_energy(std::span<const double> T_prev, std::span<const double> T_next) {
  return std::max(0.0, discrete_energy(T_next) - discrete_energy(T_prev));
}

double composite_energy_metric(double energy, double heat, double min, double max) {
  return energy + heat + min + max;
}

std::vector<std::vector<int>> neighbour_lists(std::size_t n,
                                              std::span<const std::pair<int, int>> edges) {
  std::vector<std::vector<int>> out(n);
  for (const auto& [i, j] : edges) {
    out[i].push_back(j);
    out[j].push_back(i);
  }
  for (auto& l : out) std::sort(l.begin(), l.end());
  return out;
}

void grad_loss_data(std::span<const double> T_pred, std::span<const double> T_obs,
                    std::span<const std::uint8_t> mask, double scale, std::span<double> dT) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) dT[i] += scale * 2.0 * (T_pred[i] - T_obs[i]);
  }
}

void grad_loss_heat(std::span<const double> T_prev, std::span<const double> T_next,
                    std::span<const double> applied, double scale, std::span<double> dPrev,
                    std::span<double> dNext, std::span<double> dApplied) {
  const double g = scale * 2.0 * heat_imbalance(T_prev, T_next, applied);
  for (std::size_t i = 0; i < T_prev.size(); ++i) {
    dPrev[i] -= g;
    dNext[i] += g;
    dApplied[i] += g;
  }
}

void grad_loss_minmax(const Envelope& env, std::span<const double> T_next, double scale_min,
                      double scale_max, std::span<double> dPrev, std::span<double> dNext) {
  for (std::size_t i = 0; i < T_next.size(); ++i) {
    const double over = T_next[i] - env.hi[i];
    if (over > 0) {
      dNext[i] += scale_max * 2.0 * over;
      dPrev[env.arg_hi[i]] -= scale_max * 2.0 * over;
    }
    const double under = env.lo[i] - T_next[i];
    if (under > 0) {
      dNext[i] -= scale_min * 2.0 * under;
      dPrev[env.arg_lo[i]] += scale_min * 2.0 * under;
    }
  }
}

void grad_loss_energy(std::span<const double> T_prev, std::span<const double> T_next, double scale,
                      std::span<double> dPrev, std::span<double> dNext) {
  if (discrete_energy(T_next) - discrete_energy(T_prev) <= 0) return;
  auto add = [scale](std::span<const double> T, std::span<double> d, double sign) {
    const auto n = static_cast<double>(T.size());
    double mean = 0;
    for (double v : T) mean += v;
    mean /= n;
    for (std::size_t i = 0; i < T.size(); ++i) d[i] += sign * scale * 2.0 * (T[i] - mean) / n;
  };
  add(T_next, dNext, 1.0);
  add(T_prev, dPrev, -1.0);
}

double loss_phi_logderiv(const MlpParams& phi, const MlpBatchCache& cache,
                         std::span<const double> rho, double rho_ref, double scale,
                         MlpGrads* grads, Eigen::MatrixXd* dX) {
  if (phi.transform != OutputTransform::softplus) {
    throw Error("loss_phi_logderiv: phi must use a softplus output");
  }
  const Eigen::Index E = cache.z.size();
  const Eigen::MatrixXd S = (1.0 - cache.H.array().square()).matrix();  // tanh'
  const Eigen::VectorXd wv = phi.w2.cwiseProduct(phi.W1.col(0));
  const Eigen::VectorXd g = S.transpose() * wv;  // d z / d x_0 per edge

  Eigen::VectorXd a_z(E), a_g(E);
  double loss = 0;
  for (Eigen::Index e = 0; e < E; ++e) {
    const double z = cache.z(e);
    const double sp = softplus(z);
    const double sg = sigmoid(z);
    const double A = sg / sp;
    const double dA = sg * (1.0 - sg) / sp - (sg * sg) / (sp * sp);
    const double r = A * g(e) / rho_ref;
    const double resid = r + 2.0 / rho[e];
    loss += resid * resid;
    const double G = scale * 2.0 * resid;
    a_z(e) = G * dA * g(e) / rho_ref;
    a_g(e) = G * A / rho_ref;
  }
  if (!grads && !dX) return loss;

  // Gradient of z and of g with respect to the hidden pre-activations.
  const Eigen::MatrixXd dpre =
      (phi.w2.asDiagonal() * S) * a_z.asDiagonal() +
      ((wv.asDiagonal() * (-2.0 * cache.H.array() * S.array()).matrix()) * a_g.asDiagonal());
  if (grads) {
    const Eigen::VectorXd Sa = S * a_g;
    grads->b2 += a_z.sum();
    grads->w2.noalias() += cache.H * a_z;
    grads->w2 += Sa.cwiseProduct(phi.W1.col(0));
    grads->b1 += dpre.rowwise().sum();
    grads->W1.noalias() += dpre * cache.X.transpose();
    grads->W1.col(0) += phi.w2.cwiseProduct(Sa);
  }
  if (dX) *dX = phi.W1.transpose() * dpre;
  return loss;
}

}  // namespace thermograph
