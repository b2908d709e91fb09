#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "mixseg/tensor.hpp"

namespace mixseg {

// Raw tensor file: 8-byte magic "MXTENSOR", u8 dtype (1 = f32, 2 = f64),
// u8 rank, rank little-endian u32 extents, little-endian payload.

enum class DType : std::uint8_t { F32 = 1, F64 = 2 };

class TensorIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensor(std::ostream& os, const Tensor& t, DType dtype = DType::F64);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::F64);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace mixseg
