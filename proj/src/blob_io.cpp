#include "alseg/blob_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "alseg/error.hpp"

namespace alseg::io {

void append_f32(std::vector<char>& buffer, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  const auto* p = reinterpret_cast<const char*>(&bits);
  buffer.insert(buffer.end(), p, p + 4);
}

void write_f32_blob(const std::filesystem::path& path, std::span<const float> values) {
  std::vector<char> buffer;
  buffer.reserve(values.size() * 4);
  for (float v : values) append_f32(buffer, v);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

std::vector<float> read_f32_blob(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open tensor blob " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) {
    throw ParseError("tensor blob " + path.string() + " is truncated (size not a multiple of 4)");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace alseg::io
