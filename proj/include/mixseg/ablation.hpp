#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mixseg/trainer.hpp"

namespace mixseg {

struct AblationRow {
  std::string name;
  losses::LossToggles toggles;
};

/// The five loss combinations, in table order: BCE only, +SP, +BME,
/// +SP+BME, +SP+BME+LR.
std::vector<AblationRow> ablation_rows();

struct AblationResult {
  AblationRow row;
  std::string config_hash;
  std::string config_hash_without_toggles;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> reports;  ///< one per seed
  double mean_dice = 0.0;
  double mean_iou = 0.0;
};

/// Trains every row once per seed on the same corpus and evaluates on its
/// test split. `on_run` is called after each finished run.
std::vector<AblationResult> ablate(
    const std::vector<Sample>& corpus, const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
    const std::function<void(const AblationResult&, std::size_t seed_index)>& on_run = {});

std::string ablation_csv(const std::vector<AblationResult>& results);

}  // namespace mixseg
