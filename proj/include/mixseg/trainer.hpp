#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixseg/checkpoint.hpp"
#include "mixseg/config.hpp"
#include "mixseg/losses.hpp"
#include "mixseg/metrics.hpp"
#include "mixseg/optimizer.hpp"

namespace mixseg {

using losses::LossBreakdown;

/// One sample from each supervision stream.
struct Triplet {
  const Sample* pixel = nullptr;
  const Sample* box = nullptr;
  const Sample* scribble = nullptr;
};

/// Throws ConfigError unless the slots hold (pixel, box, scribble) samples
/// of one common size.
void validate_triplet(const Triplet& t);

struct TripletResult {
  LossBreakdown losses;
  std::vector<Tensor> grads;  ///< parallel to ModelParams; zeros where untouched
};

/// Forward passes, loss terms and parameter gradients for one triplet.
/// Disabled branches are never built. Hybrid pseudo-labels are detached.
TripletResult triplet_gradients(const ModelParams& params, const Triplet& t,
                                const TrainConfig& cfg, double lambda);

/// Gradient of the batch-mean total loss followed by one momentum update.
/// Returns the batch-mean breakdown.
LossBreakdown train_step(ModelParams& params, MomentumState& state, std::span<const Triplet> batch,
                         const TrainConfig& cfg, double lambda, double lr);

/// Cycles through one annotation stream, reshuffling each epoch and
/// augmenting each draw with its own generator.
class SampleStream {
 public:
  SampleStream() = default;
  SampleStream(std::vector<Sample> samples, std::uint64_t seed, bool augment);

  Sample next();
  std::size_t size() const { return samples_.size(); }

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

 private:
  void reshuffle();

  std::vector<Sample> samples_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool augment_ = true;
  Rng rng_;
};

/// Optimizer-side state of a run; checkpoint()/restore() round-trip it
/// exactly.
class Trainer {
 public:
  Trainer(TrainConfig cfg, const std::vector<Sample>& corpus);

  LossBreakdown step();

  std::size_t iteration() const { return iteration_; }
  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const MomentumState& momentum() const { return momentum_; }

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  TrainConfig cfg_;
  ModelParams params_;
  MomentumState momentum_;
  SampleStream pixel_, box_, scribble_;
  Rng lambda_rng_;
  std::size_t iteration_ = 0;
};

std::string loss_csv_header();
std::string loss_csv_row(std::size_t iteration, const LossBreakdown& b);
std::string eval_csv_header();
std::string eval_csv_rows(std::size_t iteration, const EvalReport& r);

struct TrainResult {
  ModelParams params;
  std::vector<LossBreakdown> losses;
  std::vector<std::pair<std::size_t, EvalReport>> evals;
};

/// Full run. With out_dir set, writes losses.csv, eval.csv,
/// checkpoints/iter_NNNNNN at each eval interval and checkpoint/ at the end.
/// Throws ConfigError when a training stream is missing and
/// std::runtime_error when a loss turns non-finite.
TrainResult train(const std::vector<Sample>& corpus, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const std::function<void(std::size_t, const LossBreakdown&)>& on_step = {});

}  // namespace mixseg
