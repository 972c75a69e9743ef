#include "thermograph/adam.hpp"

#include <cmath>

#include "thermograph/common.hpp"

namespace thermograph {

AdamState AdamState::init(std::size_t n, const AdamConfig& cfg) {
  AdamState s;
  s.cfg = cfg;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_update(AdamState& s, std::span<double> params, std::span<const double> grads) {
  if (params.size() != s.m.size() || grads.size() != s.m.size()) {
    throw Error("adam_update: shape mismatch");
  }
  ++s.t;
  const double b1 = s.cfg.beta1, b2 = s.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = b1 * s.m[i] + (1.0 - b1) * grads[i];
    s.v[i] = b2 * s.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.cfg.lr * mhat / (std::sqrt(vhat) + s.cfg.eps);
  }
}

}  // namespace thermograph
