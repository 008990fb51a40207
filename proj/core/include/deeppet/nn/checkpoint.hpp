#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "deeppet/nn/ced.hpp"

namespace deeppet::nn {

nlohmann::json spec_to_json(const CedSpec& spec);
CedSpec spec_from_json(const nlohmann::json& j);

struct CheckpointInfo {
  int epoch = 0;
  double val_mse = 0.0;
  std::uint64_t seed = 0;
};

/// Writes `<path>` (float32 little-endian: all parameters, then all buffers,
/// in layer order) and `<path>.json` (spec, epoch, validation MSE, seed and
/// tensor shapes).
void save_checkpoint(const std::filesystem::path& path, CedModel<float>& model, const CheckpointInfo& info);

/// Rebuilds the model described by the header and loads its values.
CedModel<float> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace deeppet::nn
