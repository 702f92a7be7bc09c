#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "armgrad/core.hpp"
#include "armgrad/sbn.hpp"

namespace armgrad::sbn {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to resume training: model, optimizer, and the cursor
/// of the training RNG stream.
struct Checkpoint {
  std::variant<LayerStack, ConditionalStack> model;
  OptimizerState optimizer;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_stream_id = 0;
  std::uint64_t rng_cursor = 0;
};

/// JSON document with header {"format": "armgrad-checkpoint", "version": 1}.
/// Doubles are written in shortest round-trip form, so save/load is
/// bit-exact.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace armgrad::sbn
