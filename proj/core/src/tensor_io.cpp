#include "mtensor/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mtensor {
namespace {

constexpr std::array<char, 4> kMagic = {'M', 'T', 'D', '1'};
// Guards against allocating absurd buffers from a corrupt header.
constexpr std::uint64_t kMaxNumel = std::uint64_t{1} << 34;

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<unsigned char, sizeof(U)> buf{};
  for (std::size_t b = 0; b < sizeof(U); ++b) buf[b] = static_cast<unsigned char>((v >> (8 * b)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(buf.data()), buf.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw std::runtime_error("MTD1: unexpected end of stream");
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(buf[b]) << (8 * b);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const DenseTensor& t) {
  if (t.order() == 0) throw std::invalid_argument("MTD1: cannot write an empty tensor");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.order()));
  for (Index e : t.shape()) put_le<std::uint64_t>(os, e);
  for (double v : t.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("MTD1: write failed");
}

DenseTensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("MTD1: bad magic bytes");
  const auto order = get_le<std::uint32_t>(is);
  if (order == 0 || order > 64) throw std::runtime_error("MTD1: invalid order " + std::to_string(order));
  Shape shape(order);
  std::uint64_t numel = 1;
  for (auto& e : shape) {
    const auto v = get_le<std::uint64_t>(is);
    if (v == 0) throw std::runtime_error("MTD1: zero extent");
    if (numel > kMaxNumel / v) throw std::runtime_error("MTD1: tensor too large");
    numel *= v;
    e = static_cast<Index>(v);
  }
  std::vector<double> data(numel);
  for (auto& d : data) d = std::bit_cast<double>(get_le<std::uint64_t>(is));
  return DenseTensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace mtensor
