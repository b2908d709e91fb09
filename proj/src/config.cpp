#include "mixseg/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mixseg/image_io.hpp"

namespace mixseg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected on/off, got '" + v + "'");
}

losses::Normalization to_norm(const std::string& key, const std::string& v) {
  if (v == "sum") return losses::Normalization::Sum;
  if (v == "mean") return losses::Normalization::Mean;
  throw ConfigError("config key '" + key + "': expected sum or mean, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* on_off(bool b) { return b ? "on" : "off"; }
const char* norm_str(losses::Normalization n) { return n == losses::Normalization::Sum ? "sum" : "mean"; }

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(grad_clip >= 0.0 && std::isfinite(grad_clip))) throw ConfigError("grad_clip must be >= 0");
  if (iterations == 0) throw ConfigError("iterations must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  try {
    fusion.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  encoder(96, 96);
}

double TrainConfig::lr_at(std::size_t iteration) const {
  if (lr_schedule == LrSchedule::Constant) return learning_rate;
  const double frac = static_cast<double>(iteration) / static_cast<double>(iterations);
  return learning_rate * std::pow(1.0 - frac, lr_power);
}

EncoderConfig TrainConfig::encoder(std::size_t height, std::size_t width) const {
  EncoderConfig e;
  e.channels = encoder_channels;
  e.decoder_width = decoder_width;
  e.height = height;
  e.width = width;
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  return e;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "learning_rate") cfg.learning_rate = to_double(key, v);
  else if (key == "momentum") cfg.momentum = to_double(key, v);
  else if (key == "grad_clip") cfg.grad_clip = to_double(key, v);
  else if (key == "batch_size") cfg.batch_size = to_uint(key, v);
  else if (key == "iterations") cfg.iterations = to_uint(key, v);
  else if (key == "lambda") cfg.fusion.lambda = to_double(key, v);
  else if (key == "lambda_mode") {
    if (v == "fixed") cfg.fusion.mode = losses::FusionSpec::Mode::Fixed;
    else if (v == "uniform") cfg.fusion.mode = losses::FusionSpec::Mode::Uniform;
    else throw ConfigError("lambda_mode must be fixed or uniform, got '" + v + "'");
  } else if (key == "lambda_min") cfg.fusion.lo = to_double(key, v);
  else if (key == "lambda_max") cfg.fusion.hi = to_double(key, v);
  else if (key == "toggle_sp") cfg.toggles.sp = to_bool(key, v);
  else if (key == "toggle_bme") cfg.toggles.bme = to_bool(key, v);
  else if (key == "toggle_lr") cfg.toggles.lr = to_bool(key, v);
  else if (key == "seed") cfg.seed = to_uint(key, v);
  else if (key == "eval_interval") cfg.eval_interval = to_uint(key, v);
  else if (key == "lr_schedule") {
    if (v == "constant") cfg.lr_schedule = LrSchedule::Constant;
    else if (v == "poly") cfg.lr_schedule = LrSchedule::Poly;
    else throw ConfigError("lr_schedule must be constant or poly, got '" + v + "'");
  } else if (key == "lr_power") cfg.lr_power = to_double(key, v);
  else if (key == "pixel_bce_norm") cfg.pixel_bce_norm = to_norm(key, v);
  else if (key == "sp_bce_norm") cfg.sp_bce_norm = to_norm(key, v);
  else if (key == "augment") cfg.augment = to_bool(key, v);
  else if (key == "encoder_channels") {
    std::istringstream is(v);
    std::string part;
    std::size_t i = 0;
    while (std::getline(is, part, ',')) {
      if (i == 4) throw ConfigError("encoder_channels needs exactly 4 values");
      cfg.encoder_channels[i++] = to_uint(key, trim(part));
    }
    if (i != 4) throw ConfigError("encoder_channels needs exactly 4 values");
  } else if (key == "decoder_width") cfg.decoder_width = to_uint(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), base);
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "learning_rate = " << fmt(c.learning_rate) << '\n'
     << "momentum = " << fmt(c.momentum) << '\n'
     << "grad_clip = " << fmt(c.grad_clip) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "iterations = " << c.iterations << '\n'
     << "lambda = " << fmt(c.fusion.lambda) << '\n'
     << "lambda_mode = " << (c.fusion.mode == losses::FusionSpec::Mode::Fixed ? "fixed" : "uniform") << '\n'
     << "lambda_min = " << fmt(c.fusion.lo) << '\n'
     << "lambda_max = " << fmt(c.fusion.hi) << '\n'
     << "toggle_sp = " << on_off(c.toggles.sp) << '\n'
     << "toggle_bme = " << on_off(c.toggles.bme) << '\n'
     << "toggle_lr = " << on_off(c.toggles.lr) << '\n'
     << "seed = " << c.seed << '\n'
     << "eval_interval = " << c.eval_interval << '\n'
     << "lr_schedule = " << (c.lr_schedule == LrSchedule::Constant ? "constant" : "poly") << '\n'
     << "lr_power = " << fmt(c.lr_power) << '\n'
     << "pixel_bce_norm = " << norm_str(c.pixel_bce_norm) << '\n'
     << "sp_bce_norm = " << norm_str(c.sp_bce_norm) << '\n'
     << "augment = " << on_off(c.augment) << '\n'
     << "encoder_channels = " << c.encoder_channels[0] << ',' << c.encoder_channels[1] << ','
     << c.encoder_channels[2] << ',' << c.encoder_channels[3] << '\n'
     << "decoder_width = " << c.decoder_width << '\n';
  return os.str();
}

std::string config_hash(const TrainConfig& cfg) {
  const std::string text = to_text(cfg);
  return sha256_hex({text.begin(), text.end()});
}

std::string config_hash_without_toggles(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.toggles = losses::LossToggles{};
  return config_hash(c);
}

}  // namespace mixseg
