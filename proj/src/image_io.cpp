#include "mixseg/image_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

namespace mixseg {
namespace {

// Header of a binary netpbm file: magic, width, height, maxval.
struct NetpbmHeader {
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
};

std::size_t read_header_int(std::istream& is, const std::filesystem::path& path) {
  int c = is.peek();
  while (is && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else {
      is.get();
    }
    c = is.peek();
  }
  std::size_t v = 0;
  if (!(is >> v)) throw ImageIoError(path.string() + ": malformed netpbm header");
  return v;
}

NetpbmHeader read_header(std::istream& is, const std::filesystem::path& path) {
  NetpbmHeader h;
  if (!(is >> h.magic)) throw ImageIoError(path.string() + ": empty file");
  h.width = read_header_int(is, path);
  h.height = read_header_int(is, path);
  h.maxval = read_header_int(is, path);
  is.get();  // single whitespace before the raster
  if (h.maxval != 255) throw ImageIoError(path.string() + ": only maxval 255 is supported");
  return h;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ImageIoError("write_ppm expects [3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ImageIoError("cannot write " + path.string());
  os << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<char> raster(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        raster[(y * w + x) * 3 + c] = static_cast<char>(to_byte(image.at(c, y, x)));
      }
    }
  }
  os.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!os) throw ImageIoError("write failed: " + path.string());
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageIoError("cannot open " + path.string());
  const NetpbmHeader hd = read_header(is, path);
  if (hd.magic != "P6") throw ImageIoError(path.string() + ": not a binary PPM");
  std::vector<unsigned char> raster(3 * hd.width * hd.height);
  if (!is.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()))) {
    throw ImageIoError(path.string() + ": truncated raster");
  }
  Tensor t({3, hd.height, hd.width});
  for (std::size_t y = 0; y < hd.height; ++y) {
    for (std::size_t x = 0; x < hd.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        t.at(c, y, x) = static_cast<double>(raster[(y * hd.width + x) * 3 + c]) / 255.0;
      }
    }
  }
  return t;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ImageIoError("cannot write " + path.string());
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw ImageIoError("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageIoError("cannot open " + path.string());
  const NetpbmHeader hd = read_header(is, path);
  if (hd.magic != "P5") throw ImageIoError(path.string() + ": not a binary PGM");
  GrayImage img{hd.width, hd.height, std::vector<std::uint8_t>(hd.width * hd.height)};
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size()))) {
    throw ImageIoError(path.string() + ": truncated raster");
  }
  return img;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

}  // namespace mixseg
