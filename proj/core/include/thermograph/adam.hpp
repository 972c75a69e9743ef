#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace thermograph {

struct AdamConfig {
  double lr{1e-5};
  double beta1{0.5};
  double beta2{0.99};
  double eps{1e-8};
};

struct AdamState {
  AdamConfig cfg;
  std::uint64_t t{0};
  std::vector<double> m;
  std::vector<double> v;

  static AdamState init(std::size_t n, const AdamConfig& cfg = {});
};

/// Bias-corrected ADAM step, in place.
void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace thermograph
