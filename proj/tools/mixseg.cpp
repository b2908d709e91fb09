// Command-line entry point: corpus generation, training, evaluation,
// gradient checking, ablation and visualization export.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixseg/ablation.hpp"
#include "mixseg/checkpoint.hpp"
#include "mixseg/config.hpp"
#include "mixseg/corpus.hpp"
#include "mixseg/gradcheck_suite.hpp"
#include "mixseg/image_io.hpp"
#include "mixseg/metrics.hpp"
#include "mixseg/synth.hpp"
#include "mixseg/trainer.hpp"
#include "mixseg/viz.hpp"

namespace fs = std::filesystem;
using namespace mixseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

/// Input problems detected by the CLI itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

std::size_t parse_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || v < 0) throw UsageError("invalid " + what + ": '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::vector<Sample> load_corpus(const fs::path& dir) {
  if (!fs::exists(dir / kManifestName)) throw UsageError("corpus not found: " + dir.string());
  return read_corpus(dir);
}

Checkpoint load_checkpoint_arg(const fs::path& dir) {
  if (!fs::exists(dir / kCheckpointIndex)) throw UsageError("checkpoint not found: " + dir.string());
  return load_checkpoint(dir);
}

void check_input_size(const std::vector<Sample>& samples) {
  for (const Sample& s : samples) {
    if (s.height() % 32 != 0 || s.width() % 32 != 0) {
      throw UsageError("sample " + s.id + " has a size the network cannot take");
    }
  }
}

void print_report(const EvalReport& r) {
  std::printf("%-12s %6s %8s %8s\n", "dataset", "count", "dice", "iou");
  for (const auto& d : r.datasets) std::printf("%-12s %6zu %8.4f %8.4f\n", d.name.c_str(), d.count, d.dice, d.iou);
  std::printf("%-12s %6zu %8.4f %8.4f\n", "wAVG", r.total, r.wavg_dice, r.wavg_iou);
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::string size = "96x96";
  std::string counts = "60,200,200,100";
};

int run_gen_data(const GenDataArgs& a) {
  SynthConfig cfg;
  cfg.seed = a.seed;
  const auto hw = split(a.size, 'x');
  if (hw.size() != 2) throw UsageError("--size must be HxW, got '" + a.size + "'");
  cfg.height = parse_count(hw[0], "height");
  cfg.width = parse_count(hw[1], "width");
  if (cfg.height == 0 || cfg.width == 0 || cfg.height % 32 != 0 || cfg.width % 32 != 0) {
    throw UsageError("--size: height and width must be positive multiples of 32");
  }
  const auto parts = split(a.counts, ',');
  if (parts.size() != 4) throw UsageError("--counts must be P,B,S,T, got '" + a.counts + "'");
  const CorpusCounts counts{parse_count(parts[0], "pixel count"), parse_count(parts[1], "box count"),
                            parse_count(parts[2], "scribble count"), parse_count(parts[3], "test count")};
  if (counts.pixel == 0) throw UsageError("--counts: the pixel stream needs at least one sample");
  if (counts.box == 0) throw UsageError("--counts: the box stream needs at least one sample");
  if (counts.scribble == 0) throw UsageError("--counts: the scribble stream needs at least one sample");
  if (counts.test == 0) throw UsageError("--counts: the test split needs at least one sample");

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw UsageError("cannot create output directory " + a.out);
  const fs::path probe = fs::path(a.out) / ".write_probe";
  if (!std::ofstream(probe)) throw UsageError("output directory is not writable: " + a.out);
  fs::remove(probe, ec);

  const std::vector<Sample> corpus = generate_corpus(cfg, counts);
  const std::string sha = write_corpus(corpus, a.out);
  std::printf("wrote %zu samples to %s\nmanifest sha256 %s\n", corpus.size(), a.out.c_str(), sha.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out;
  std::string toggle_sp, toggle_bme, toggle_lr;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

TrainConfig build_config(const std::string& config_path, const std::string& sp, const std::string& bme,
                         const std::string& lr, const std::optional<std::uint64_t>& seed) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw UsageError("config not found: " + config_path);
    cfg = load_config(config_path);
  }
  if (!sp.empty()) set_config_value(cfg, "toggle_sp", sp);
  if (!bme.empty()) set_config_value(cfg, "toggle_bme", bme);
  if (!lr.empty()) set_config_value(cfg, "toggle_lr", lr);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = build_config(a.config, a.toggle_sp, a.toggle_bme, a.toggle_lr, a.seed);
  const std::vector<Sample> corpus = load_corpus(a.data);
  const std::size_t every = std::max<std::size_t>(1, cfg.iterations / 20);
  auto progress = [&](std::size_t it, const LossBreakdown& b) {
    if (!a.quiet && ((it + 1) % every == 0 || it + 1 == cfg.iterations)) {
      std::fprintf(stderr, "iter %zu/%zu  l_total %.4f\n", it + 1, cfg.iterations, b.l_total);
    }
  };
  const TrainResult r = train(corpus, cfg, fs::path(a.out), progress);
  if (!r.evals.empty()) print_report(r.evals.back().second);
  std::printf("outputs in %s\n", a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data;
};

int run_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint_arg(a.checkpoint);
  const std::vector<Sample> corpus = load_corpus(a.data);
  const std::vector<Sample> test = select(corpus, Split::Test);
  if (test.empty()) throw UsageError("corpus has no test samples: " + a.data);
  check_input_size(test);
  print_report(evaluate(ckpt.params, {{"synthetic", test}}));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string corrupt;
};

int run_gradcheck(const GradcheckArgs& a) {
  GradCheckSuiteOptions opts;
  opts.seed = a.seed;
  opts.corrupt_op = a.corrupt;
  if (!a.corrupt.empty()) {
    const auto names = gradcheck_op_names();
    if (std::find(names.begin(), names.end(), a.corrupt) == names.end()) {
      throw UsageError("unknown op for --corrupt: " + a.corrupt);
    }
  }
  const auto rows = run_gradcheck_suite(opts);
  std::vector<std::string> failed;
  std::printf("%-20s %12s %8s  %s\n", "op", "max_rel_err", "coords", "status");
  for (const auto& r : rows) {
    std::printf("%-20s %12.3e %8zu  %s\n", r.op.c_str(), r.max_rel_error, r.coords, r.pass ? "ok" : "FAIL");
    if (!r.pass) failed.push_back(r.op);
  }
  std::printf("%zu ops checked, tolerance %.0e\n", rows.size(), opts.tolerance);
  if (failed.empty()) return kExitOk;
  std::string list;
  for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "gradcheck failed: %s\n", list.c_str());
  return kExitCheckFailed;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string data, config, out;
  std::string seeds = "0,1,2";
};

int run_ablate(const AblateArgs& a) {
  const TrainConfig base = build_config(a.config, "", "", "", std::nullopt);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split(a.seeds, ',')) seeds.push_back(parse_count(s, "seed"));
  if (seeds.empty()) throw UsageError("--seeds must list at least one seed");
  const std::vector<Sample> corpus = load_corpus(a.data);
  fs::create_directories(a.out);
  auto on_run = [](const AblationResult& r, std::size_t i) {
    std::fprintf(stderr, "%-15s seed %llu  dice %.4f\n", r.row.name.c_str(),
                 static_cast<unsigned long long>(r.seeds[i]), r.reports[i].wavg_dice);
  };
  const auto results = ablate(corpus, base, seeds, on_run);
  const std::string csv = ablation_csv(results);
  std::ofstream(fs::path(a.out) / "ablation.csv", std::ios::binary) << csv;
  std::printf("%s", csv.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VizArgs {
  std::string checkpoint, data, out;
};

int run_export_viz(const VizArgs& a) {
  const Checkpoint ckpt = load_checkpoint_arg(a.checkpoint);
  const std::vector<Sample> test = select(load_corpus(a.data), Split::Test);
  check_input_size(test);
  const auto rows = export_viz(ckpt.params, test, a.out);
  std::printf("wrote %zu triptychs and dice.csv to %s\n", rows.size(), a.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-supervision binary segmentation toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image size HxW")->capture_default_str();
  gen_cmd->add_option("--counts", gen.counts, "Pixel,box,scribble,test counts")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  train_cmd->add_option("--data", tr.data, "Corpus directory")->required();
  train_cmd->add_option("--config", tr.config, "Config file (key = value)");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--toggle-sp", tr.toggle_sp, "on|off");
  train_cmd->add_option("--toggle-bme", tr.toggle_bme, "on|off");
  train_cmd->add_option("--toggle-lr", tr.toggle_lr, "on|off");
  train_cmd->add_option("--seed", tr.seed, "Override the config seed");
  train_cmd->add_flag("--quiet", tr.quiet, "No progress output");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus test split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "Corpus directory")->required();

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc_cmd->add_option("--seed", gc.seed, "Base seed")->capture_default_str();
  gc_cmd->add_option("--corrupt", gc.corrupt, "Test hook: bias the analytic gradient of this op");

  AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate", "Loss ablation over five rows");
  ab_cmd->add_option("--data", ab.data, "Corpus directory")->required();
  ab_cmd->add_option("--config", ab.config, "Base config file");
  ab_cmd->add_option("--out", ab.out, "Output directory")->required();
  ab_cmd->add_option("--seeds", ab.seeds, "Comma-separated seeds")->capture_default_str();

  VizArgs vz;
  auto* viz_cmd = app.add_subcommand("export-viz", "Write prediction triptychs and per-image Dice");
  viz_cmd->add_option("--checkpoint", vz.checkpoint, "Checkpoint directory")->required();
  viz_cmd->add_option("--data", vz.data, "Corpus directory")->required();
  viz_cmd->add_option("--out", vz.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*gc_cmd) return run_gradcheck(gc);
    if (*ab_cmd) return run_ablate(ab);
    if (*viz_cmd) return run_export_viz(vz);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const CorpusError& e) {
    std::fprintf(stderr, "corpus error: %s\n", e.what());
    return kExitUsage;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitUsage;
  } catch (const ImageIoError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailed;
  }
  return kExitUsage;
}
