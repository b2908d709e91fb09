#include "mixseg/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mixseg {
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'X', 'T', 'E', 'N', 'S', 'O', 'R'};

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf;
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
    throw TensorIoError("truncated tensor stream");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t, DType dtype) {
  if (t.rank() > 255) throw TensorIoError("rank exceeds 255");
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(dtype));
  os.put(static_cast<char>(t.rank()));
  for (std::size_t e : t.shape()) {
    if (e > 0xFFFFFFFFu) throw TensorIoError("extent exceeds u32");
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  }
  for (double v : t.data()) {
    if (dtype == DType::F64) {
      put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (!os) throw TensorIoError("tensor write failed");
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw TensorIoError("bad tensor magic");
  }
  const auto dtype = static_cast<std::uint8_t>(get_le<std::uint8_t>(is));
  if (dtype != 1 && dtype != 2) throw TensorIoError("unknown dtype code " + std::to_string(dtype));
  const std::size_t rank = get_le<std::uint8_t>(is);
  Shape shape(rank);
  for (auto& e : shape) e = get_le<std::uint32_t>(is);
  Tensor t(shape);
  for (double& v : t.data()) {
    if (dtype == 2) {
      v = std::bit_cast<double>(get_le<std::uint64_t>(is));
    } else {
      v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(is)));
    }
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw TensorIoError("cannot open " + path.string() + " for writing");
  write_tensor(os, t, dtype);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorIoError("cannot open " + path.string());
  try {
    return read_tensor(is);
  } catch (const TensorIoError& e) {
    throw TensorIoError(path.string() + ": " + e.what());
  }
}

}  // namespace mixseg
