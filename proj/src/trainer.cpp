#include "mixseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mixseg/augment.hpp"
#include "mixseg/corpus.hpp"
#include "mixseg/ops.hpp"

namespace mixseg {
namespace fs = std::filesystem;
using nlohmann::json;

void validate_triplet(const Triplet& t) {
  auto check = [](const Sample* s, AnnotationKind want, const char* slot) {
    if (!s) throw ConfigError(std::string("triplet slot '") + slot + "' is empty");
    if (s->kind() != want) {
      throw ConfigError(std::string("triplet slot '") + slot + "' holds a " + to_string(s->kind()) +
                        " sample (" + s->id + "), expected " + to_string(want));
    }
  };
  check(t.pixel, AnnotationKind::Pixel, "pixel");
  check(t.box, AnnotationKind::Box, "box");
  check(t.scribble, AnnotationKind::Scribble, "scribble");
  if (t.box->image.shape() != t.pixel->image.shape() ||
      t.scribble->image.shape() != t.pixel->image.shape()) {
    throw ConfigError("triplet images differ in size");
  }
}

TripletResult triplet_gradients(const ModelParams& params, const Triplet& t, const TrainConfig& cfg,
                                double lambda) {
  validate_triplet(t);
  const losses::LossToggles& on = cfg.toggles;
  Tape tape;
  const BoundParams bound = bind(tape, params);
  auto predict = [&](const Tensor& image) { return ops::sigmoid(forward(bound, tape.constant(image))); };
  auto predict_detached = [&](const Tensor& image) {
    Tensor logits = infer(params, image);
    Tape scratch;
    return ops::sigmoid(scratch.constant(std::move(logits))).value();
  };

  losses::LossParts parts;
  const Var y_p = predict(t.pixel->image);
  const Var m_p = tape.constant(std::get<PixelMask>(t.pixel->annotation).to_tensor());
  parts.pixel = losses::loss_bce(y_p, m_p, cfg.pixel_bce_norm) + losses::loss_dice(y_p, m_p);

  std::optional<Var> y_b, y_s;
  if (on.sp) {
    y_b = predict(t.box->image);
    parts.sp = losses::loss_sp(*y_b, std::get<BoxAnnotation>(t.box->annotation), cfg.sp_bce_norm);
  }
  if (on.bme) {
    y_s = predict(t.scribble->image);
    parts.scribble = losses::loss_scribble(*y_s, std::get<ScribbleAnnotation>(t.scribble->annotation));
  }
  if (on.lr) {
    // Hybrid branches: fused images against fused, detached predictions.
    auto hybrid = [&](const Sample& weak, const std::optional<Var>& y_weak) {
      const Tensor fused_image = losses::linear_fuse(t.pixel->image, weak.image, lambda);
      const Tensor weak_pred = y_weak ? y_weak->value() : predict_detached(weak.image);
      const Tensor pseudo = losses::linear_fuse(y_p.value(), weak_pred, lambda);
      return losses::loss_lr(predict(fused_image), pseudo);
    };
    parts.lr = 0.5 * (hybrid(*t.box, y_b) + hybrid(*t.scribble, y_s));
  }

  const losses::TotalLoss total = losses::loss_total(parts, on);
  TripletResult out;
  out.losses = total.breakdown;
  tape.backward(*total.total);
  out.grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor* g = bound.vars[i].grad();
    out.grads.push_back(g ? *g : Tensor(params.tensor(i).shape(), 0.0));
  }
  return out;
}

LossBreakdown train_step(ModelParams& params, MomentumState& state, std::span<const Triplet> batch,
                         const TrainConfig& cfg, double lambda, double lr) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  for (const Triplet& t : batch) validate_triplet(t);
  const double w = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  std::vector<Tensor> grads;
  for (const Triplet& t : batch) {
    TripletResult r = triplet_gradients(params, t, cfg, lambda);
    if (!std::isfinite(r.losses.l_total)) {
      throw std::runtime_error("non-finite loss on triplet (" + t.pixel->id + ", " + t.box->id +
                               ", " + t.scribble->id + ")");
    }
    mean.l_pixel += w * r.losses.l_pixel;
    mean.l_sp += w * r.losses.l_sp;
    mean.l_scribble += w * r.losses.l_scribble;
    mean.l_lr += w * r.losses.l_lr;
    mean.l_total += w * r.losses.l_total;
    if (grads.empty()) {
      grads = std::move(r.grads);
      for (Tensor& g : grads) {
        for (double& v : g.data()) v *= w;
      }
    } else {
      for (std::size_t i = 0; i < grads.size(); ++i) {
        auto dst = grads[i].data();
        auto src = r.grads[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
      }
    }
  }
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    for (const Tensor& g : grads) {
      for (double v : g.data()) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    // A non-finite norm is left alone so the optimizer can name the bad tensor.
    if (std::isfinite(norm) && norm > cfg.grad_clip) {
      const double scale = cfg.grad_clip / norm;
      for (Tensor& g : grads) {
        for (double& v : g.data()) v *= scale;
      }
    }
  }
  sgd_momentum_step(params, grads, state, lr, cfg.momentum);
  return mean;
}

// ---------------------------------------------------------------------------

SampleStream::SampleStream(std::vector<Sample> samples, std::uint64_t seed, bool augment)
    : samples_(std::move(samples)), augment_(augment), rng_(seed) {
  order_.resize(samples_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  reshuffle();
}

void SampleStream::reshuffle() {
  shuffle(order_, rng_);
  cursor_ = 0;
}

Sample SampleStream::next() {
  if (samples_.empty()) throw ConfigError("draw from an empty sample stream");
  if (cursor_ == order_.size()) reshuffle();
  const Sample& s = samples_[order_[cursor_++]];
  return augment_ ? augment(s, rng_) : s;
}

json SampleStream::state() const {
  std::ostringstream rng;
  rng << rng_;
  return {{"order", order_}, {"cursor", cursor_}, {"rng", rng.str()}};
}

void SampleStream::restore(const json& state) {
  auto order = state.at("order").get<std::vector<std::size_t>>();
  if (order.size() != samples_.size()) throw CheckpointError("stream size changed since checkpoint");
  order_ = std::move(order);
  cursor_ = state.at("cursor").get<std::size_t>();
  std::istringstream rng(state.at("rng").get<std::string>());
  rng >> rng_;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig cfg, const std::vector<Sample>& corpus) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto stream = [&](AnnotationKind kind, const char* tag) {
    std::vector<Sample> s = select(corpus, Split::Train, kind);
    if (s.empty()) throw ConfigError("corpus has no " + to_string(kind) + "-annotated training samples");
    return SampleStream(std::move(s), derive_seed(cfg_.seed, tag), cfg_.augment);
  };
  pixel_ = stream(AnnotationKind::Pixel, "stream/pixel");
  box_ = stream(AnnotationKind::Box, "stream/box");
  scribble_ = stream(AnnotationKind::Scribble, "stream/scribble");
  const std::vector<Sample> pixels = select(corpus, Split::Train, AnnotationKind::Pixel);
  params_ = init_params(cfg_.encoder(pixels.front().height(), pixels.front().width()), cfg_.seed);
  momentum_ = MomentumState::zeros_like(params_);
  lambda_rng_.seed(derive_seed(cfg_.seed, "lambda"));
}

LossBreakdown Trainer::step() {
  const double lambda = cfg_.fusion.draw(lambda_rng_);
  std::vector<Sample> drawn;
  drawn.reserve(3 * cfg_.batch_size);
  for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
    drawn.push_back(pixel_.next());
    drawn.push_back(box_.next());
    drawn.push_back(scribble_.next());
  }
  std::vector<Triplet> batch;
  for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
    batch.push_back({&drawn[3 * b], &drawn[3 * b + 1], &drawn[3 * b + 2]});
  }
  const LossBreakdown out = train_step(params_, momentum_, batch, cfg_, lambda, cfg_.lr_at(iteration_));
  ++iteration_;
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.params = params_;
  c.iteration = iteration_;
  c.config_text = to_text(cfg_);
  c.config_hash = config_hash(cfg_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    c.extra_tensors.emplace_back("velocity/" + params_.name(i), momentum_.velocity[i]);
  }
  std::ostringstream lam;
  lam << lambda_rng_;
  c.extra = {{"streams", {{"pixel", pixel_.state()}, {"box", box_.state()}, {"scribble", scribble_.state()}}},
             {"lambda_rng", lam.str()}};
  return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (ckpt.config_hash != config_hash(cfg_)) {
    throw CheckpointError("checkpoint was written by a different configuration");
  }
  if (ckpt.params.size() != params_.size() || ckpt.extra_tensors.size() != params_.size()) {
    throw CheckpointError("checkpoint does not match the model layout");
  }
  params_ = ckpt.params;
  for (std::size_t i = 0; i < params_.size(); ++i) momentum_.velocity[i] = ckpt.extra_tensors[i].second;
  const json& streams = ckpt.extra.at("streams");
  pixel_.restore(streams.at("pixel"));
  box_.restore(streams.at("box"));
  scribble_.restore(streams.at("scribble"));
  std::istringstream lam(ckpt.extra.at("lambda_rng").get<std::string>());
  lam >> lambda_rng_;
  iteration_ = ckpt.iteration;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string loss_csv_header() { return "iteration,l_pixel,l_sp,l_scribble,l_lr,l_total"; }

std::string loss_csv_row(std::size_t iteration, const LossBreakdown& b) {
  return std::to_string(iteration) + ',' + num(b.l_pixel) + ',' + num(b.l_sp) + ',' +
         num(b.l_scribble) + ',' + num(b.l_lr) + ',' + num(b.l_total);
}

std::string eval_csv_header() { return "iteration,dataset,count,dice,iou"; }

std::string eval_csv_rows(std::size_t iteration, const EvalReport& r) {
  std::string out;
  for (const auto& d : r.datasets) {
    out += std::to_string(iteration) + ',' + d.name + ',' + std::to_string(d.count) + ',' +
           num(d.dice) + ',' + num(d.iou) + '\n';
  }
  out += std::to_string(iteration) + ",wAVG," + std::to_string(r.total) + ',' + num(r.wavg_dice) +
         ',' + num(r.wavg_iou) + '\n';
  return out;
}

TrainResult train(const std::vector<Sample>& corpus, const TrainConfig& cfg,
                  const std::optional<fs::path>& out_dir,
                  const std::function<void(std::size_t, const LossBreakdown&)>& on_step) {
  Trainer trainer(cfg, corpus);
  const std::vector<Sample> test = select(corpus, Split::Test);
  std::ofstream loss_csv, eval_csv;
  if (out_dir) {
    std::error_code ec;
    fs::create_directories(*out_dir, ec);
    loss_csv.open(*out_dir / "losses.csv", std::ios::binary);
    eval_csv.open(*out_dir / "eval.csv", std::ios::binary);
    if (!loss_csv || !eval_csv) throw std::runtime_error("cannot write outputs in " + out_dir->string());
    loss_csv << loss_csv_header() << '\n';
    eval_csv << eval_csv_header() << '\n';
  }

  TrainResult result;
  result.losses.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const LossBreakdown b = trainer.step();
    result.losses.push_back(b);
    if (loss_csv.is_open()) loss_csv << loss_csv_row(it, b) << '\n';
    if (on_step) on_step(it, b);

    const bool last = it + 1 == cfg.iterations;
    const bool at_interval = cfg.eval_interval > 0 && (it + 1) % cfg.eval_interval == 0;
    if (!(last || at_interval)) continue;
    if (!test.empty()) {
      EvalReport r = evaluate(trainer.params(), {{"synthetic", test}});
      if (eval_csv.is_open()) eval_csv << eval_csv_rows(it + 1, r);
      result.evals.emplace_back(it + 1, std::move(r));
    }
    if (out_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%06zu", it + 1);
      save_checkpoint(*out_dir / "checkpoints" / name, trainer.checkpoint());
      if (last) save_checkpoint(*out_dir / "checkpoint", trainer.checkpoint());
    }
  }
  result.params = trainer.params();
  return result;
}

}  // namespace mixseg
