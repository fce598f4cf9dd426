#pragma once

#include <string>

#include "convemo/model.hpp"
#include "convemo/params.hpp"
#include "convemo/train.hpp"

namespace convemo {

/// Named-tensor checkpoint container: magic + version, a JSON header with the
/// model/objective configuration and the tensor directory, then raw
/// little-endian f64 payloads in directory order.
struct Checkpoint {
  ModelConfig model;
  ObjectiveConfig objective;
  ParamStore params;
  std::vector<std::string> emotions;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// JSON round-trips for configs (also used by the CLI config files)
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace convemo
