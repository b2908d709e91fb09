#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "mixseg/losses.hpp"
#include "mixseg/segnet.hpp"

namespace mixseg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LrSchedule { Constant, Poly };

/// Hyperparameters of one training run. Text keys are the field names.
struct TrainConfig {
  double learning_rate = 0.002;
  double momentum = 0.9;
  /// Rescale the batch gradient to at most this global L2 norm; 0 = off.
  double grad_clip = 1.0;
  std::size_t batch_size = 4;
  std::size_t iterations = 3000;
  losses::FusionSpec fusion;
  losses::LossToggles toggles;
  std::uint64_t seed = 0;
  /// Evaluate and checkpoint every this many iterations; 0 = only at the end.
  std::size_t eval_interval = 500;
  LrSchedule lr_schedule = LrSchedule::Constant;
  double lr_power = 0.9;
  losses::Normalization pixel_bce_norm = losses::Normalization::Mean;
  losses::Normalization sp_bce_norm = losses::Normalization::Mean;
  bool augment = true;
  std::array<std::size_t, 4> encoder_channels = {16, 32, 64, 128};
  std::size_t decoder_width = 16;

  void validate() const;
  /// Learning rate at a 0-based iteration under the configured schedule.
  double lr_at(std::size_t iteration) const;
  EncoderConfig encoder(std::size_t height, std::size_t width) const;
};

/// Applies one `key = value` assignment. Unknown keys and bad values throw.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Parses a plain-text key-value file; '#' starts a comment.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Every key in a fixed order, one `key = value` per line. Round-trips
/// through parse_config.
std::string to_text(const TrainConfig& cfg);
std::string config_hash(const TrainConfig& cfg);
/// Hash with the loss toggles blanked; equal across ablation rows.
std::string config_hash_without_toggles(const TrainConfig& cfg);

}  // namespace mixseg
