#pragma once

#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mixseg/segnet.hpp"

namespace mixseg {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCheckpointIndex = "checkpoint.json";

/// A checkpoint directory: one MXTENSOR file per named tensor plus
/// checkpoint.json with names, shapes, iteration and config hash.
struct Checkpoint {
  ModelParams params;
  std::size_t iteration = 0;
  /// Canonical text of the run configuration and its sha256.
  std::string config_text;
  std::string config_hash;
  /// Auxiliary tensors (optimizer state), saved alongside the parameters.
  std::vector<std::pair<std::string, Tensor>> extra_tensors;
  /// Free-form trainer state.
  nlohmann::json extra = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

/// Loads and verifies a checkpoint. Throws CheckpointError when files are
/// missing, shapes disagree with the index, or the stored config text does
/// not hash to the stored config hash.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

nlohmann::json encoder_to_json(const EncoderConfig& cfg);
EncoderConfig encoder_from_json(const nlohmann::json& j);

}  // namespace mixseg
