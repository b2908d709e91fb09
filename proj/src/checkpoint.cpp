#include "mixseg/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "mixseg/image_io.hpp"
#include "mixseg/tensor_io.hpp"

namespace mixseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string file_name_for(const std::string& tensor_name) {
  std::string f = tensor_name;
  std::replace(f.begin(), f.end(), '/', '_');
  return f + ".mxt";
}

json tensor_entry(const std::string& name, const Tensor& t) {
  return {{"name", name}, {"shape", t.shape()}, {"file", file_name_for(name)}};
}

Tensor load_entry(const fs::path& dir, const json& entry) {
  const std::string name = entry.at("name").get<std::string>();
  const fs::path p = dir / entry.at("file").get<std::string>();
  if (!fs::exists(p)) throw CheckpointError("checkpoint missing tensor file for '" + name + "'");
  Tensor t = load_tensor(p);
  if (t.shape() != entry.at("shape").get<Shape>()) {
    throw CheckpointError("tensor '" + name + "' shape " + shape_str(t.shape()) +
                          " disagrees with index");
  }
  return t;
}

}  // namespace

json encoder_to_json(const EncoderConfig& cfg) {
  return {{"channels", cfg.channels},
          {"height", cfg.height},
          {"width", cfg.width},
          {"decoder_width", cfg.decoder_width}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.channels = j.at("channels").get<std::array<std::size_t, 4>>();
  cfg.height = j.at("height").get<std::size_t>();
  cfg.width = j.at("width").get<std::size_t>();
  cfg.decoder_width = j.at("decoder_width").get<std::size_t>();
  cfg.validate();
  return cfg;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string());
  json index;
  index["format"] = "mixseg-checkpoint";
  index["iteration"] = ckpt.iteration;
  index["config_hash"] = ckpt.config_hash;
  index["config"] = ckpt.config_text;
  index["encoder"] = encoder_to_json(ckpt.params.config());
  json params = json::array();
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    save_tensor(dir / file_name_for(ckpt.params.name(i)), ckpt.params.tensor(i));
    params.push_back(tensor_entry(ckpt.params.name(i), ckpt.params.tensor(i)));
  }
  index["tensors"] = std::move(params);
  json extra = json::array();
  for (const auto& [name, t] : ckpt.extra_tensors) {
    save_tensor(dir / file_name_for(name), t);
    extra.push_back(tensor_entry(name, t));
  }
  index["extra_tensors"] = std::move(extra);
  index["state"] = ckpt.extra;
  std::ofstream os(dir / kCheckpointIndex);
  if (!os) throw CheckpointError("cannot write checkpoint index in " + dir.string());
  os << index.dump(1) << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path index_path = dir / kCheckpointIndex;
  if (!fs::exists(index_path)) throw CheckpointError("no checkpoint index at " + index_path.string());
  try {
    std::ifstream is(index_path);
    const json index = json::parse(is);
    Checkpoint ckpt;
    ckpt.iteration = index.at("iteration").get<std::size_t>();
    ckpt.config_hash = index.at("config_hash").get<std::string>();
    ckpt.config_text = index.at("config").get<std::string>();
    const std::vector<std::uint8_t> bytes(ckpt.config_text.begin(), ckpt.config_text.end());
    if (sha256_hex(bytes) != ckpt.config_hash) {
      throw CheckpointError("config hash mismatch in " + index_path.string());
    }
    ckpt.params = ModelParams(encoder_from_json(index.at("encoder")));
    const ModelParams reference = init_params(ckpt.params.config(), 0);
    const auto& entries = index.at("tensors");
    if (entries.size() != reference.size()) {
      throw CheckpointError("checkpoint has " + std::to_string(entries.size()) +
                            " parameter tensors, architecture needs " +
                            std::to_string(reference.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      Tensor t = load_entry(dir, entries[i]);
      const std::string name = entries[i].at("name").get<std::string>();
      if (name != reference.name(i) || t.shape() != reference.tensor(i).shape()) {
        throw CheckpointError("parameter '" + name + "' does not match the encoder config");
      }
      ckpt.params.add(name, std::move(t));
    }
    for (const auto& e : index.at("extra_tensors")) {
      ckpt.extra_tensors.emplace_back(e.at("name").get<std::string>(), load_entry(dir, e));
    }
    ckpt.extra = index.value("state", json::object());
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint index: " + std::string(e.what()));
  } catch (const TensorIoError& e) {
    throw CheckpointError(e.what());
  }
}

}  // namespace mixseg
