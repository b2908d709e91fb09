#include "mixseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mixseg {

SegScores segmentation_scores(const PixelMask& pred, const PixelMask& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw ShapeError("segmentation_scores", Shape{pred.height, pred.width},
                     Shape{truth.height, truth.width});
  }
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    p += pred.values[i];
    g += truth.values[i];
    inter += pred.values[i] & truth.values[i];
  }
  if (p + g == 0) return {1.0, 1.0};
  const double dice = 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
  const double iou = static_cast<double>(inter) / static_cast<double>(p + g - inter);
  return {dice, iou};
}

PixelMask threshold_logits(const Tensor& logits) {
  PixelMask m(logits.dim(1), logits.dim(0));
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-logits[i]));
    m.values[i] = prob > 0.5 ? 1 : 0;
  }
  return m;
}

PixelMask predict_mask(const ModelParams& params, const Tensor& image) {
  return threshold_logits(infer(params, image));
}

double weighted_average(const std::vector<std::pair<double, std::size_t>>& metric_and_count) {
  double num = 0.0;
  std::size_t den = 0;
  for (const auto& [m, n] : metric_and_count) {
    num += m * static_cast<double>(n);
    den += n;
  }
  if (den == 0) throw std::invalid_argument("weighted_average: no samples");
  return num / static_cast<double>(den);
}

EvalReport make_report(std::vector<DatasetScore> datasets) {
  EvalReport r;
  std::vector<std::pair<double, std::size_t>> dice, iou;
  for (const auto& d : datasets) {
    dice.emplace_back(d.dice, d.count);
    iou.emplace_back(d.iou, d.count);
    r.total += d.count;
  }
  r.wavg_dice = weighted_average(dice);
  r.wavg_iou = weighted_average(iou);
  r.datasets = std::move(datasets);
  return r;
}

std::vector<SegScores> per_image_scores(const ModelParams& params, const std::vector<Sample>& samples) {
  std::vector<SegScores> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(segmentation_scores(predict_mask(params, s.image), s.truth));
  return out;
}

EvalReport evaluate(const ModelParams& params, const std::vector<NamedTestSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("evaluate: no test sets");
  std::vector<DatasetScore> scores;
  for (const auto& [name, samples] : sets) {
    if (samples.empty()) throw std::invalid_argument("evaluate: test set '" + name + "' is empty");
    std::vector<double> dice, iou;
    for (const SegScores& s : per_image_scores(params, samples)) {
      dice.push_back(s.dice);
      iou.push_back(s.iou);
    }
    std::sort(dice.begin(), dice.end());
    std::sort(iou.begin(), iou.end());
    double dsum = 0.0, isum = 0.0;
    for (double v : dice) dsum += v;
    for (double v : iou) isum += v;
    const auto n = static_cast<double>(samples.size());
    scores.push_back({name, samples.size(), dsum / n, isum / n});
  }
  return make_report(std::move(scores));
}

}  // namespace mixseg
