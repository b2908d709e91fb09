#include "mixseg/corpus.hpp"

#include <fstream>
#include <json.hpp>

#include "mixseg/image_io.hpp"

namespace mixseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

GrayImage mask_to_gray(const PixelMask& m) {
  GrayImage g{m.width, m.height, std::vector<std::uint8_t>(m.values.size())};
  for (std::size_t i = 0; i < m.values.size(); ++i) g.pixels[i] = m.values[i] ? 255 : 0;
  return g;
}

GrayImage scribble_to_gray(const ScribbleAnnotation& s) {
  GrayImage g{s.width, s.height, std::vector<std::uint8_t>(s.codes.size())};
  for (std::size_t i = 0; i < s.codes.size(); ++i) {
    switch (s.codes[i]) {
      case ScribbleCode::Unlabeled: g.pixels[i] = kScribbleUnlabeled; break;
      case ScribbleCode::Background: g.pixels[i] = kScribbleBackground; break;
      case ScribbleCode::Foreground: g.pixels[i] = kScribbleForeground; break;
    }
  }
  return g;
}

PixelMask gray_to_mask(const GrayImage& g, const std::string& id) {
  PixelMask m(g.width, g.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    if (g.pixels[i] != 0 && g.pixels[i] != 255) {
      throw CorpusError(id, "mask value " + std::to_string(g.pixels[i]) + " is not 0/255");
    }
    m.values[i] = g.pixels[i] ? 1 : 0;
  }
  return m;
}

ScribbleAnnotation gray_to_scribble(const GrayImage& g, const std::string& id) {
  ScribbleAnnotation s(g.width, g.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    switch (g.pixels[i]) {
      case kScribbleUnlabeled: s.codes[i] = ScribbleCode::Unlabeled; break;
      case kScribbleBackground: s.codes[i] = ScribbleCode::Background; break;
      case kScribbleForeground: s.codes[i] = ScribbleCode::Foreground; break;
      default:
        throw CorpusError(id, "invalid scribble code " + std::to_string(g.pixels[i]));
    }
  }
  if (s.labeled_count() == 0) throw CorpusError(id, "scribble has no labelled pixels");
  return s;
}

}  // namespace

std::string write_corpus(const std::vector<Sample>& samples, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw CorpusError("", "cannot create corpus directory " + dir.string());
  }
  json manifest;
  manifest["schema_version"] = kCorpusSchemaVersion;
  json list = json::array();
  for (const Sample& s : samples) {
    json entry;
    entry["id"] = s.id;
    entry["split"] = to_string(s.split);
    entry["kind"] = to_string(s.kind());
    json files = json::object();
    json sums = json::object();
    auto add_file = [&](const std::string& role, const std::string& name) {
      files[role] = name;
      sums[name] = sha256_file(dir / name);
    };
    write_ppm(dir / (s.id + ".ppm"), s.image);
    add_file("image", s.id + ".ppm");
    write_pgm(dir / (s.id + "_truth.pgm"), mask_to_gray(s.truth));
    add_file("truth", s.id + "_truth.pgm");
    if (const auto* m = std::get_if<PixelMask>(&s.annotation)) {
      write_pgm(dir / (s.id + "_mask.pgm"), mask_to_gray(*m));
      add_file("mask", s.id + "_mask.pgm");
    } else if (const auto* sc = std::get_if<ScribbleAnnotation>(&s.annotation)) {
      write_pgm(dir / (s.id + "_scribble.pgm"), scribble_to_gray(*sc));
      add_file("scribble", s.id + "_scribble.pgm");
    } else {
      const auto& b = std::get<BoxAnnotation>(s.annotation);
      entry["box"] = {b.x0, b.y0, b.x1, b.y1};
    }
    entry["files"] = files;
    entry["sha256"] = sums;
    list.push_back(std::move(entry));
  }
  manifest["samples"] = std::move(list);
  {
    std::ofstream os(dir / kManifestName, std::ios::binary);
    if (!os) throw CorpusError("", "cannot write manifest in " + dir.string());
    os << manifest.dump(1) << '\n';
  }
  return sha256_file(dir / kManifestName);
}

std::vector<Sample> read_corpus(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path)) {
    throw CorpusError("", "no " + std::string(kManifestName) + " in " + dir.string());
  }
  json manifest;
  try {
    std::ifstream is(manifest_path);
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw CorpusError("", "malformed manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("schema_version") || manifest["schema_version"] != kCorpusSchemaVersion) {
    throw CorpusError("", "unsupported manifest schema version");
  }
  if (!manifest.contains("samples") || !manifest["samples"].is_array()) {
    throw CorpusError("", "manifest has no sample list");
  }

  std::vector<Sample> out;
  for (const json& entry : manifest["samples"]) {
    std::string id = entry.value("id", std::string{});
    try {
      if (id.empty()) throw CorpusError("", "manifest entry without id");
      const auto& files = entry.at("files");
      const auto& sums = entry.at("sha256");
      auto checked = [&](const std::string& role) {
        const std::string name = files.at(role).get<std::string>();
        const fs::path p = dir / name;
        if (!fs::exists(p)) throw CorpusError(id, "missing file " + name);
        if (sha256_file(p) != sums.at(name).get<std::string>()) {
          throw CorpusError(id, "checksum mismatch for " + name);
        }
        return p;
      };
      Sample s;
      s.id = id;
      s.split = parse_split(entry.at("split").get<std::string>());
      s.image = read_ppm(checked("image"));
      s.truth = gray_to_mask(read_pgm(checked("truth")), id);
      const std::size_t h = s.image.dim(1), w = s.image.dim(2);
      if (s.truth.width != w || s.truth.height != h) throw CorpusError(id, "truth size differs from image");
      switch (parse_kind(entry.at("kind").get<std::string>())) {
        case AnnotationKind::Pixel: {
          PixelMask m = gray_to_mask(read_pgm(checked("mask")), id);
          if (m.width != w || m.height != h) throw CorpusError(id, "mask size differs from image");
          s.annotation = std::move(m);
          break;
        }
        case AnnotationKind::Scribble: {
          ScribbleAnnotation sc = gray_to_scribble(read_pgm(checked("scribble")), id);
          if (sc.width != w || sc.height != h) throw CorpusError(id, "scribble size differs from image");
          s.annotation = std::move(sc);
          break;
        }
        case AnnotationKind::Box: {
          const auto& b = entry.at("box");
          if (!b.is_array() || b.size() != 4) throw CorpusError(id, "box must be [x0,y0,x1,y1]");
          BoxAnnotation box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
          validate_box(box, w, h);
          s.annotation = box;
          break;
        }
      }
      out.push_back(std::move(s));
    } catch (const CorpusError&) {
      throw;
    } catch (const std::exception& e) {
      throw CorpusError(id, e.what());
    }
  }
  return out;
}

std::vector<Sample> select(const std::vector<Sample>& samples, Split split,
                           std::optional<AnnotationKind> kind) {
  std::vector<Sample> out;
  for (const Sample& s : samples) {
    if (s.split == split && (!kind || s.kind() == *kind)) out.push_back(s);
  }
  return out;
}

}  // namespace mixseg
