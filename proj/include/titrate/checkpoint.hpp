#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "titrate/policy.hpp"

namespace titrate {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMetadata {
  int batches = 0;
  std::optional<double> final_mean_reward;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  PolicyWeights weights;
  CheckpointMetadata metadata;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// Throws ValidationError unless the layer dimensions are exactly 4-128-2 and
// the document carries exactly 898 finite parameters.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace titrate
