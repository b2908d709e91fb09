#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixseg/annotations.hpp"

namespace mixseg {

/// Corpus load/store failure. sample_id() is empty for manifest-level faults.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& sample_id, const std::string& what)
      : std::runtime_error(sample_id.empty() ? what : "sample " + sample_id + ": " + what),
        sample_id_(sample_id) {}
  const std::string& sample_id() const { return sample_id_; }

 private:
  std::string sample_id_;
};

inline constexpr int kCorpusSchemaVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

/// Writes images (P6), masks and scribbles (P5) and manifest.json.
/// Returns the sha256 of the manifest file.
std::string write_corpus(const std::vector<Sample>& samples, const std::filesystem::path& dir);

/// Loads and verifies a corpus written by write_corpus.
std::vector<Sample> read_corpus(const std::filesystem::path& dir);

/// Samples of one split and annotation kind, in corpus order.
std::vector<Sample> select(const std::vector<Sample>& samples, Split split,
                           std::optional<AnnotationKind> kind = std::nullopt);

// Scribble raster codes on disk.
inline constexpr std::uint8_t kScribbleUnlabeled = 0;
inline constexpr std::uint8_t kScribbleBackground = 128;
inline constexpr std::uint8_t kScribbleForeground = 255;

}  // namespace mixseg
