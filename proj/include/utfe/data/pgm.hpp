#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "utfe/data/image.hpp"
#include "utfe/io.hpp"

namespace utfe::data {

class PgmError : public FormatError {
 public:
  enum class Code { wrong_magic, bad_maxval, bad_header, truncated };
  PgmError(Code code, const std::string& what) : FormatError(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Parses a binary (P5) 8-bit PGM; pixels are byte / 255.
inline Image decode_pgm(std::span<const std::uint8_t> bytes) {
  using Code = PgmError::Code;
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw PgmError(Code::wrong_magic, "not a binary PGM (expected magic P5)");
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw PgmError(Code::bad_header, std::string("PGM header: missing ") + field);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24)) throw PgmError(Code::bad_header, std::string("PGM header: ") + field + " too large");
    }
    return static_cast<std::size_t>(v);
  };
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (width == 0 || height == 0) throw PgmError(Code::bad_header, "PGM header: zero extent");
  if (maxval != 255)
    throw PgmError(Code::bad_maxval, "PGM maxval " + std::to_string(maxval) + " unsupported (need 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw PgmError(Code::truncated, "PGM header not terminated");
  ++pos;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n)
    throw PgmError(Code::truncated, "PGM payload truncated: need " + std::to_string(n) + " bytes, have " +
                                        std::to_string(bytes.size() - pos));
  Image image{Tensor({height, width}), Provenance::file};
  for (std::size_t i = 0; i < n; ++i) image.pixels[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return image;
}

/// P5 encoding with a minimal header "P5\n<w> <h>\n255\n"; pixels are
/// clamped and rounded to the nearest byte.
inline std::vector<std::uint8_t> encode_pgm(const Tensor& pixels) {
  if (pixels.rank() != 2) throw ShapeError("PGM needs an [H, W] image");
  const std::string header =
      "P5\n" + std::to_string(pixels.extent(1)) + " " + std::to_string(pixels.extent(0)) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + pixels.size());
  for (float v : pixels.values()) {
    const float c = std::isfinite(v) ? clamp01(v) : 0.0f;
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  return out;
}

inline Image load_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

inline void save_pgm(const Tensor& pixels, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm(pixels));
}

}  // namespace utfe::data
