#include "mixseg/ablation.hpp"

#include <cstdio>

#include "mixseg/corpus.hpp"

namespace mixseg {

std::vector<AblationRow> ablation_rows() {
  return {{"bce", {false, false, false}},
          {"bce+sp", {true, false, false}},
          {"bce+bme", {false, true, false}},
          {"bce+sp+bme", {true, true, false}},
          {"bce+sp+bme+lr", {true, true, true}}};
}

std::vector<AblationResult> ablate(
    const std::vector<Sample>& corpus, const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
    const std::function<void(const AblationResult&, std::size_t)>& on_run) {
  if (seeds.empty()) throw ConfigError("ablate: at least one seed is required");
  const std::vector<Sample> test = select(corpus, Split::Test);
  std::vector<AblationResult> out;
  for (const AblationRow& row : ablation_rows()) {
    AblationResult r;
    r.row = row;
    TrainConfig cfg = base;
    cfg.toggles = row.toggles;
    cfg.eval_interval = 0;
    r.config_hash = config_hash(cfg);
    r.config_hash_without_toggles = config_hash_without_toggles(cfg);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      cfg.seed = seeds[i];
      const TrainResult tr = train(corpus, cfg);
      r.seeds.push_back(seeds[i]);
      r.reports.push_back(tr.evals.empty() ? evaluate(tr.params, {{"synthetic", test}}) : tr.evals.back().second);
      r.mean_dice += r.reports.back().wavg_dice / static_cast<double>(seeds.size());
      r.mean_iou += r.reports.back().wavg_iou / static_cast<double>(seeds.size());
      if (on_run) on_run(r, i);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationResult>& results) {
  std::string s = "row,name,bce,sp,bme,lr,seeds,dice,iou,config_hash,base_hash\n";
  char buf[128];
  for (std::size_t i = 0; i < results.size(); ++i) {
    const AblationResult& r = results[i];
    std::snprintf(buf, sizeof buf, "%zu,%s,1,%d,%d,%d,%zu,%.6f,%.6f,", i, r.row.name.c_str(),
                  r.row.toggles.sp ? 1 : 0, r.row.toggles.bme ? 1 : 0, r.row.toggles.lr ? 1 : 0,
                  r.seeds.size(), r.mean_dice, r.mean_iou);
    s += buf;
    s += r.config_hash + ',' + r.config_hash_without_toggles + '\n';
  }
  return s;
}

}  // namespace mixseg
