#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixseg/tensor.hpp"

namespace mixseg {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Binary PPM (P6, maxval 255) from a [3, H, W] tensor in [0, 1].
void write_ppm(const std::filesystem::path& path, const Tensor& image);
/// Reads a P6 file into a [3, H, W] tensor of byte / 255.
Tensor read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace mixseg
