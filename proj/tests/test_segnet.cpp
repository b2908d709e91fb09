#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mixseg/checkpoint.hpp"
#include "mixseg/gradcheck.hpp"
#include "mixseg/image_io.hpp"
#include "mixseg/ops.hpp"
#include "mixseg/segnet.hpp"
#include "test_util.hpp"

using namespace mixseg;
using mixseg::test::random_tensor;

namespace {

EncoderConfig small_config(std::size_t size = 32) {
  EncoderConfig cfg;
  cfg.height = cfg.width = size;
  return cfg;
}

std::string sha256_of_text(const std::string& s) { return sha256_hex({s.begin(), s.end()}); }

}  // namespace

TEST(InitParams, DeterministicPerSeed) {
  const EncoderConfig cfg;
  EXPECT_EQ(init_params(cfg, 0), init_params(cfg, 0));
  EXPECT_NE(init_params(cfg, 0), init_params(cfg, 1));
}

TEST(InitParams, FiniteBoundedAndZeroBias) {
  const ModelParams p = init_params(EncoderConfig{}, 3);
  EXPECT_TRUE(p.all_finite());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool bias = p.name(i).ends_with(".bias");
    const Tensor& t = p.tensor(i);
    const double fan_in = bias ? 1.0 : static_cast<double>(t.numel() / t.dim(0));
    for (double v : t.data()) {
      if (bias) {
        EXPECT_EQ(v, 0.0);
      } else {
        EXPECT_LT(std::abs(v), 1.0);
        EXPECT_LE(std::abs(v), std::sqrt(6.0 / fan_in));
      }
    }
  }
}

TEST(InitParams, NamesAndShapes) {
  const ModelParams p = init_params(EncoderConfig{}, 0);
  const std::vector<std::string> expected = {
      "stem.weight",   "stem.bias",   "enc1.weight",   "enc1.bias",   "enc2.weight",   "enc2.bias",
      "enc3.weight",   "enc3.bias",   "enc4.weight",   "enc4.bias",   "unify2.weight", "unify2.bias",
      "unify3.weight", "unify3.bias", "unify4.weight", "unify4.bias", "head.weight",   "head.bias"};
  ASSERT_EQ(p.size(), expected.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p.name(i), expected[i]);
  EXPECT_EQ(p.at("stem.weight").shape(), (Shape{16, 3, 3, 3}));
  EXPECT_EQ(p.at("enc4.weight").shape(), (Shape{128, 64, 3, 3}));
  EXPECT_EQ(p.at("unify3.weight").shape(), (Shape{16, 64, 1, 1}));
  EXPECT_EQ(p.at("head.weight").shape(), (Shape{1, 16, 1, 1}));
  EXPECT_THROW(p.at("nope"), std::out_of_range);
}

TEST(EncoderConfig, Validation) {
  EncoderConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.height = 48;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.decoder_width = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Forward, ShapesFollowStageFormula) {
  for (auto [h, w] : {std::pair{32u, 32u}, {64u, 96u}, {96u, 96u}}) {
    EncoderConfig cfg;
    cfg.height = h;
    cfg.width = w;
    const ModelParams p = init_params(cfg, 0);
    Tape t;
    const Features f = forward_features(bind(t, p), t.constant(Tensor({3, h, w}, 0.5)));
    EXPECT_EQ(f.f1.shape(), (Shape{16, h / 4, w / 4}));
    EXPECT_EQ(f.f2.shape(), (Shape{32, h / 8, w / 8}));
    EXPECT_EQ(f.f3.shape(), (Shape{64, h / 16, w / 16}));
    EXPECT_EQ(f.f4.shape(), (Shape{128, h / 32, w / 32}));
    EXPECT_EQ(f.logits.shape(), (Shape{h, w}));
  }
}

TEST(Forward, RejectsWrongImageSize) {
  const ModelParams p = init_params(small_config(), 0);
  Tape t;
  EXPECT_THROW(forward(bind(t, p), t.constant(Tensor({3, 64, 64}))), ShapeError);
  EXPECT_THROW(forward(bind(t, p), t.constant(Tensor({1, 32, 32}))), ShapeError);
}

TEST(Forward, DeterministicAndMatchesInfer) {
  Rng rng(1);
  const ModelParams p = init_params(EncoderConfig{}, 4);
  const Tensor img = random_tensor(rng, {3, 96, 96}, 0.0, 1.0);
  Tape a, b;
  const Tensor la = forward(bind(a, p), a.constant(img)).value();
  const Tensor lb = forward(bind(b, p), b.constant(img)).value();
  EXPECT_EQ(la, lb);
  EXPECT_EQ(infer(p, img), la);
}

TEST(Forward, DecoderNeverReadsF1) {
  // f1 feeds the next encoder block only; nothing recorded after f2 may read it.
  const ModelParams p = init_params(small_config(), 0);
  Tape t;
  const Features f = forward_features(bind(t, p), t.constant(Tensor({3, 32, 32}, 0.3)));
  std::size_t f1_uses = 0, f2_uses = 0;
  for (std::size_t id = 0; id < t.size(); ++id) {
    for (std::size_t in : t.inputs_of(id)) {
      if (in == f.f1.id()) {
        ++f1_uses;
        EXPECT_LT(id, f.f2.id()) << "node " << id << " reads f1";
      }
      f2_uses += in == f.f2.id();
    }
  }
  EXPECT_EQ(f1_uses, 1u);
  EXPECT_GT(f2_uses, 1u);
}

TEST(Forward, EveryParameterGetsGradient) {
  const EncoderConfig cfg = small_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const ModelParams p = init_params(cfg, seed);
    Tape t;
    const BoundParams bp = bind(t, p);
    const Var logits = forward(bp, t.constant(random_tensor(rng, {3, 32, 32}, 0.0, 1.0)));
    t.backward(ops::sum(ops::sigmoid(logits)));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Tensor* g = bp.vars[i].grad();
      ASSERT_NE(g, nullptr) << p.name(i);
      double mag = 0.0;
      for (double v : g->data()) mag += std::abs(v);
      EXPECT_GT(mag, 0.0) << p.name(i) << " seed " << seed;
    }
  }
}

TEST(Forward, GradCheckEveryParameterDefaultWidths) {
  // Default widths on a 32x32 input; a fixed random subset of coordinates
  // per tensor keeps the run short.
  const ModelParams p = init_params(small_config(), 11);
  Rng rng(5);
  const Tensor img = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    GradCheckOptions o;
    const std::size_t n = p.tensor(i).numel();
    for (int k = 0; k < 12; ++k) o.coords.push_back(uniform_index(rng, n));
    auto f = [&](Tape& t, Var v) {
      BoundParams bp = bind(t, p, false);
      bp.vars[i] = v;
      return ops::sum(ops::sigmoid(forward(bp, t.constant(img))));
    };
    const auto r = grad_check(f, p.tensor(i), o);
    EXPECT_LE(r.max_rel_error, 1e-3) << p.name(i);
  }
}

TEST(Forward, GradCheckAllCoordinatesNarrowWidths) {
  EncoderConfig cfg = small_config();
  cfg.channels = {2, 3, 3, 4};
  cfg.decoder_width = 3;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ModelParams p = init_params(cfg, seed);
    Rng rng(seed + 6);
    // Nonzero biases keep dead channels from parking ReLU inputs on the kink.
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.name(i).ends_with(".bias")) p.tensor(i) = random_tensor(rng, p.tensor(i).shape(), -0.2, 0.2);
    }
    const Tensor img = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
    const Tensor r = random_tensor(rng, {32, 32}, -1.0, 1.0);
    GradCheckOptions o;
    o.floor = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto f = [&](Tape& t, Var v) {
        BoundParams bp = bind(t, p, false);
        bp.vars[i] = v;
        return ops::sum(ops::sigmoid(forward(bp, t.constant(img))) * t.constant(r));
      };
      EXPECT_LE(grad_check(f, p.tensor(i), o).max_rel_error, 1e-3) << p.name(i) << " seed " << seed;
    }
  }
}

// --- checkpoints -------------------------------------------------------------------------

TEST(Checkpoint, RoundTrip) {
  const auto dir = test::temp_dir("ckpt_rt");
  Checkpoint c;
  c.params = init_params(small_config(), 7);
  c.iteration = 42;
  c.config_text = "seed = 7\n";
  c.config_hash = sha256_of_text(c.config_text);
  c.extra_tensors.emplace_back("velocity/stem.weight", Tensor({2}, {1.0, 2.0}));
  c.extra["note"] = "x";
  save_checkpoint(dir, c);
  const Checkpoint r = load_checkpoint(dir);
  EXPECT_EQ(r.params, c.params);
  EXPECT_EQ(r.iteration, 42u);
  EXPECT_EQ(r.config_text, c.config_text);
  EXPECT_EQ(r.extra_tensors, c.extra_tensors);
  EXPECT_EQ(r.extra, c.extra);
}

TEST(Checkpoint, ConfigHashMismatchIsRejected) {
  const auto dir = test::temp_dir("ckpt_hash");
  Checkpoint c;
  c.params = init_params(small_config(), 7);
  c.config_text = "seed = 7\n";
  c.config_hash = "0000";
  save_checkpoint(dir, c);
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
}

TEST(Checkpoint, MissingTensorFile) {
  const auto dir = test::temp_dir("ckpt_missing");
  Checkpoint c;
  c.params = init_params(small_config(), 1);
  c.config_text = "";
  c.config_hash = sha256_of_text("");
  save_checkpoint(dir, c);
  std::filesystem::remove(dir / "head.weight.mxt");
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
}
