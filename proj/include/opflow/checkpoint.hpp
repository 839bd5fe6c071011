#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opflow/neural.hpp"

namespace opflow {

inline constexpr const char* kCheckpointMagic = "OPFLOW-CKPT-1";

/// Parameter checkpoint: a `OPFLOW-CKPT-1` line followed by a JSON document
/// {"meta": {...}, "parameters": [{"name", "shape", "values"}]} with values in
/// row-major order of the logical shape.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<nn::Parameter> parameters;
};

void save_checkpoint(const std::filesystem::path& path, std::span<nn::Parameter* const> params,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values by name into `params`; every parameter must be present with
/// the same shape.
void restore_parameters(const Checkpoint& ckpt, std::span<nn::Parameter* const> params);

}  // namespace opflow
