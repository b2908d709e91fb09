// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero iff any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixseg/ablation.hpp"
#include "mixseg/checkpoint.hpp"
#include "mixseg/corpus.hpp"
#include "mixseg/gradcheck_suite.hpp"
#include "mixseg/losses.hpp"
#include "mixseg/metrics.hpp"
#include "mixseg/ops.hpp"
#include "mixseg/optimizer.hpp"
#include "mixseg/synth.hpp"
#include "mixseg/trainer.hpp"

using namespace mixseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

Tensor random_map(Rng& rng, std::size_t h, std::size_t w) {
  Tensor t({h, w});
  for (double& v : t.data()) v = uniform(rng, 0.01, 0.99);
  return t;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

fs::path scratch(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("mixseg_accept_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- 1 ---------------------------------------------------------------------------------

Outcome gradients() {
  const double t0 = cpu_seconds();
  GradCheckSuiteOptions o;
  const auto rows = run_gradcheck_suite(o);
  const double secs = cpu_seconds() - t0;
  double worst = 0.0;
  std::string worst_op, failing;
  for (const auto& r : rows) {
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_op = r.op;
    }
    if (!r.pass) failing += " " + r.op;
  }
  Outcome out;
  out.pass = failing.empty() && secs < 60.0 && o.seeds >= 5 && o.tolerance <= 1e-4 && o.h == 1e-6;
  out.detail = std::to_string(rows.size()) + " ops, worst " + worst_op + fmt(" %.2e, %.1fs CPU", worst, secs);
  if (!failing.empty()) out.detail += "; failing:" + failing;
  return out;
}

// --- 2 ---------------------------------------------------------------------------------

Outcome projection_oracle() {
  Rng rng(2);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 1 + uniform_index(rng, 16), w = 1 + uniform_index(rng, 16);
    Tensor x({h, w});
    for (double& v : x.data()) v = uniform(rng, -3.0, 3.0);
    Tape t;
    const Var a = t.constant(x);
    const Tensor cols = ops::axis_max(a, ops::Axis::Rows).value();
    const Tensor rows = ops::axis_max(a, ops::Axis::Cols).value();
    for (std::size_t c = 0; c < w; ++c) {
      double m = x.at(0, c);
      for (std::size_t r = 1; r < h; ++r) m = std::max(m, x.at(r, c));
      mismatches += cols[c] != m;
    }
    for (std::size_t r = 0; r < h; ++r) {
      double m = x.at(r, 0);
      for (std::size_t c = 1; c < w; ++c) m = std::max(m, x.at(r, c));
      mismatches += rows[r] != m;
    }
  }
  return {mismatches == 0, "200 tensors, " + std::to_string(mismatches) + " mismatches"};
}

// --- 3 ---------------------------------------------------------------------------------

// Per-axis maxima of a map: column maxima then row maxima.
std::pair<std::vector<double>, std::vector<double>> axis_maxima(const Tensor& y) {
  const std::size_t h = y.dim(0), w = y.dim(1);
  std::vector<double> cm(w, -1.0), rm(h, -1.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      cm[c] = std::max(cm[c], y.at(r, c));
      rm[r] = std::max(rm[r], y.at(r, c));
    }
  }
  return {cm, rm};
}

// Permutes entries of each line (row or column) among positions whose
// values stay strictly below the cross-axis maximum of every position they
// can land in. Maxima never move, so both sets of maxima are unchanged.
void shuffle_lines(Tensor& z, bool rows, Rng& rng) {
  const std::size_t lines = rows ? z.dim(0) : z.dim(1), len = rows ? z.dim(1) : z.dim(0);
  auto at = [&](std::size_t line, std::size_t k) -> double& { return rows ? z.at(line, k) : z.at(k, line); };
  const auto mx = axis_maxima(z);
  const std::vector<double>& line_max = rows ? mx.second : mx.first;
  const std::vector<double>& cross_max = rows ? mx.first : mx.second;
  for (std::size_t line = 0; line < lines; ++line) {
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < len; ++k) {
      if (at(line, k) != line_max[line] && at(line, k) != cross_max[k]) free.push_back(k);
    }
    for (bool shrunk = true; shrunk;) {
      double cap = 2.0;
      for (std::size_t k : free) cap = std::min(cap, cross_max[k]);
      const auto n = free.size();
      std::erase_if(free, [&](std::size_t k) { return at(line, k) >= cap; });
      shrunk = free.size() != n;
    }
    std::vector<double> vals;
    for (std::size_t k : free) vals.push_back(at(line, k));
    shuffle(vals, rng);
    for (std::size_t i = 0; i < free.size(); ++i) at(line, free[i]) = vals[i];
  }
}

Tensor shuffle_keeping_maxima(const Tensor& y, Rng& rng) {
  Tensor z = y;
  shuffle_lines(z, true, rng);
  shuffle_lines(z, false, rng);
  return z;
}

Outcome sp_shape_blindness() {
  Rng rng(3);
  std::size_t changed = 0, moved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 2 + uniform_index(rng, 11), w = 2 + uniform_index(rng, 11);
    const Tensor y = random_map(rng, h, w);
    BoxAnnotation box;
    box.x0 = static_cast<int>(uniform_index(rng, w));
    box.x1 = box.x0 + static_cast<int>(uniform_index(rng, w - box.x0));
    box.y0 = static_cast<int>(uniform_index(rng, h));
    box.y1 = box.y0 + static_cast<int>(uniform_index(rng, h - box.y0));
    const Tensor z = shuffle_keeping_maxima(y, rng);
    moved += z != y;
    if (axis_maxima(z) != axis_maxima(y)) return {false, "shuffle altered the maxima"};
    for (auto norm : {losses::Normalization::Sum, losses::Normalization::Mean}) {
      Tape t;
      const double a = losses::loss_sp(t.constant(y), box, norm).value().item();
      const double b = losses::loss_sp(t.constant(z), box, norm).value().item();
      changed += a != b;
    }
  }
  return {changed == 0 && moved > 50,
          "100 pairs, " + std::to_string(moved) + " maps rearranged, " + std::to_string(changed) + " loss changes"};
}

// --- 4 ---------------------------------------------------------------------------------

Outcome bme_anchors() {
  Tape t;
  const double half = losses::loss_bme(t.constant(Tensor({1, 1}, 0.5))).value().item();
  const double anchor_err = std::abs(half - std::log(2.0));
  const double eps = 1e-3;
  std::vector<double> grid;
  for (double v = eps; v <= 1.0 - eps + 1e-12; v += 1e-3) grid.push_back(v);
  Tensor y({1, grid.size()}, grid), flipped({1, grid.size()});
  for (std::size_t i = 0; i < grid.size(); ++i) flipped[i] = 1.0 - grid[i];
  const Tensor a = losses::loss_bme(t.constant(y)).value();
  const Tensor b = losses::loss_bme(t.constant(flipped)).value();
  const double sym_err = max_abs_diff(a, b);
  return {anchor_err <= 1e-12 && sym_err <= 1e-12,
          fmt("|bme(0.5) - ln2| = %.1e, symmetry %.1e over %.0f points", anchor_err, sym_err,
              static_cast<double>(grid.size()))};
}

// --- 5 ---------------------------------------------------------------------------------

Outcome hand_oracles() {
  Tape t;
  const double sp = losses::loss_sp(t.constant(Tensor({2, 2}, 0.5)), {1, 0, 1, 0}).value().item();
  ScribbleAnnotation s(2, 1);
  s.codes[0] = ScribbleCode::Foreground;
  const double scr = losses::loss_scribble(t.constant(Tensor({1, 2}, {0.8, 0.9})), s).value().item();
  const double dice =
      losses::loss_dice(t.constant(Tensor({2, 2}, 0.5)), t.constant(Tensor({2, 2}, {1, 0, 0, 0}))).value().item();
  std::vector<Tensor> p{Tensor({1}, {0.0})}, g{Tensor({1}, {1.0})}, v{Tensor({1})};
  sgd_momentum_step(p, g, v, 1.0, 0.9);
  const double after1 = p[0].item();
  sgd_momentum_step(p, g, v, 1.0, 0.9);
  const double dp2 = after1 - p[0].item();
  const bool ok = std::abs(sp - 1.8863) <= 1e-4 && std::abs(scr - 0.1643) <= 1e-4 &&
                  std::abs(dice - 0.6667) <= 1e-4 && std::abs(dp2 - 1.9) <= 1e-4 && std::abs(-after1 - 1.0) <= 1e-4;
  char buf[256];
  std::snprintf(buf, sizeof buf, "L_SP %.4f, scribble %.4f, Dice %.4f, dp1 %.4f, dp2 %.4f", sp, scr, dice, -after1, dp2);
  return {ok, buf};
}

// --- 6 ---------------------------------------------------------------------------------

const std::vector<Sample>& default_corpus() {
  static const std::vector<Sample> c = generate_corpus(SynthConfig{}, CorpusCounts{});
  return c;
}

Outcome bookkeeping() {
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.eval_interval = 0;
  const auto r = train(default_corpus(), cfg);
  double worst = 0.0;
  for (const auto& b : r.losses) worst = std::max(worst, std::abs(b.l_total - b.component_sum()));
  return {r.losses.size() == 200 && worst <= 1e-9,
          std::to_string(r.losses.size()) + fmt(" iterations, max |l_total - sum| = %.1e", worst)};
}

// --- 7 ---------------------------------------------------------------------------------

Outcome determinism() {
  TrainConfig cfg;
  cfg.iterations = 60;
  cfg.eval_interval = 0;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  train(default_corpus(), cfg, a);
  train(default_corpus(), cfg, b);
  const bool same_csv = slurp(a / "losses.csv") == slurp(b / "losses.csv") && !slurp(a / "losses.csv").empty();

  TrainConfig long_cfg = cfg;
  long_cfg.iterations = 100;
  Trainer straight(long_cfg, default_corpus());
  for (int i = 0; i < 50; ++i) straight.step();
  const fs::path ck = scratch("det_ckpt");
  save_checkpoint(ck, straight.checkpoint());
  Trainer resumed(long_cfg, default_corpus());
  resumed.restore(load_checkpoint(ck));
  std::size_t diverged = 0;
  for (int i = 0; i < 50; ++i) {
    const LossBreakdown x = straight.step(), y = resumed.step();
    diverged += x.l_total != y.l_total || x.l_pixel != y.l_pixel || x.l_sp != y.l_sp ||
                x.l_scribble != y.l_scribble || x.l_lr != y.l_lr;
  }
  const bool same_state = straight.params() == resumed.params() && straight.momentum() == resumed.momentum();
  return {same_csv && diverged == 0 && same_state,
          std::string("losses.csv ") + (same_csv ? "identical" : "differs") + ", resume: " +
              std::to_string(diverged) + " of 50 iterations differ, final state " +
              (same_state ? "identical" : "differs")};
}

// --- 8 ---------------------------------------------------------------------------------

Outcome ablation_trend() {
  const double t0 = cpu_seconds();
  const auto wall0 = std::chrono::steady_clock::now();
  TrainConfig base;
  base.eval_interval = 0;
  const auto results = ablate(default_corpus(), base, {0, 1, 2}, [&](const AblationResult& r, std::size_t k) {
    const double mins = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count() / 60.0;
    std::fprintf(stderr, "  %-14s seed %zu  dice %.4f  (%.1f min)\n", r.row.name.c_str(), k,
                 r.reports[k].wavg_dice, mins);
  });
  const double secs = cpu_seconds() - t0;
  std::vector<double> d;
  std::string table;
  for (const auto& r : results) {
    d.push_back(r.mean_dice);
    table += fmt(" %.4f", r.mean_dice);
  }
  // Rows: BCE, +SP, +BME, +SP+BME, full.
  const double gain = d[4] - d[0];
  const double worst_drop = std::max({d[0] - d[1], d[0] - d[2], d[1] - d[3], d[2] - d[3], d[3] - d[4]});
  Outcome o;
  o.pass = gain >= 0.03 && worst_drop <= 0.01 && secs < 45 * 60;
  o.detail = "mean Dice per row" + table + fmt("; full - baseline %+.4f, worst drop %.4f, %.1f min CPU", gain,
                                                std::max(0.0, worst_drop), secs / 60.0);
  return o;
}

// --- 9 ---------------------------------------------------------------------------------

Outcome wavg_formula() {
  const double two = weighted_average({{0.828, 380}, {0.923, 100}});
  const double all = weighted_average({{0.828, 380}, {0.923, 100}, {0.925, 62}, {0.905, 60}, {0.850, 196}});
  const double pct = all * 100.0;
  return {std::abs(pct - 85.9) <= 0.1 && std::abs(two - 0.8478) <= 1e-4,
          fmt("two-set %.4f, five-set %.2f%% (target 85.9%%)", two, pct)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--criteria", only, "Run only these criteria (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> all = {
      {1, gradients},   {2, projection_oracle}, {3, sp_shape_blindness}, {4, bme_anchors},   {5, hand_oracles},
      {6, bookkeeping}, {7, determinism},       {8, ablation_trend},     {9, wavg_formula}};
  bool ok = true;
  for (const auto& [id, fn] : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
