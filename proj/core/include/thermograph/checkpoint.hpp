#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "thermograph/diffusion.hpp"
#include "thermograph/losses.hpp"
#include "thermograph/rollout.hpp"

namespace thermograph {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version{kCheckpointVersion};
  std::string material{"unknown"};
  Model model;
  Scheme scheme{Scheme::crank_nicolson};
  int substeps{4};
  LossWeights weights;
  std::uint64_t iterations{0};
  std::uint64_t seed{0};
  int stages_completed{0};
};

/// Binary layout: magic "PIGRAND1", u64 LE metadata length, metadata text
/// (key value lines), then LE float64 blocks phi W1 (row-major), b1, w2, b2,
/// psi W1, b1, w2, b2.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace thermograph
