#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixseg/annotations.hpp"
#include "mixseg/segnet.hpp"

namespace mixseg {

struct SegScores {
  double dice = 0.0;
  double iou = 0.0;
};

/// Dice = 2|P ∩ G| / (|P| + |G|), IoU = |P ∩ G| / |P ∪ G|. No overlap
/// scores 0; two empty masks score 1.
SegScores segmentation_scores(const PixelMask& pred, const PixelMask& truth);

/// sigmoid(logits) > 0.5.
PixelMask threshold_logits(const Tensor& logits);
PixelMask predict_mask(const ModelParams& params, const Tensor& image);

struct DatasetScore {
  std::string name;
  std::size_t count = 0;
  double dice = 0.0;
  double iou = 0.0;
};

struct EvalReport {
  std::vector<DatasetScore> datasets;
  double wavg_dice = 0.0;
  double wavg_iou = 0.0;
  std::size_t total = 0;
};

/// sum(metric_d * n_d) / sum(n_d).
double weighted_average(const std::vector<std::pair<double, std::size_t>>& metric_and_count);

/// Fills the weighted averages from per-dataset scores.
EvalReport make_report(std::vector<DatasetScore> datasets);

using NamedTestSet = std::pair<std::string, std::vector<Sample>>;

/// Per-image scores averaged per dataset, then count-weighted across
/// datasets. Sums run over sorted per-image values, so the result does not
/// depend on sample order. Throws std::invalid_argument on an empty set.
EvalReport evaluate(const ModelParams& params, const std::vector<NamedTestSet>& sets);

/// Scores for each sample, in input order.
std::vector<SegScores> per_image_scores(const ModelParams& params, const std::vector<Sample>& samples);

}  // namespace mixseg
