#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>

#include "utfe/error.hpp"

namespace utfe::extractors {

/// Encoder feature geometry C x (h, w); the feature vector has length C*h*w.
class FeatureSize {
 public:
  FeatureSize() = default;
  FeatureSize(std::size_t channels, std::size_t map_h, std::size_t map_w)
      : channels_(channels), map_h_(map_h), map_w_(map_w) {
    if (!channels || !map_h || !map_w) throw ArgumentError("feature size extents must be >= 1");
  }

  std::size_t channels() const { return channels_; }
  std::size_t map_h() const { return map_h_; }
  std::size_t map_w() const { return map_w_; }
  std::size_t length() const { return channels_ * map_h_ * map_w_; }

  /// "Cx(h,w)", e.g. "2x(5,6)".
  std::string str() const {
    return std::to_string(channels_) + "x(" + std::to_string(map_h_) + "," + std::to_string(map_w_) + ")";
  }

  /// Accepts "Cx(h,w)" with optional spaces; 'X' and the UTF-8 multiplication sign also work.
  static FeatureSize parse(std::string_view text) {
    std::string s;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const unsigned char ch = static_cast<unsigned char>(text[i]);
      if (std::isspace(ch)) continue;
      if (ch == 0xC3 && i + 1 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x97) {
        s.push_back('x');
        ++i;
        continue;
      }
      s.push_back(static_cast<char>(std::tolower(ch)));
    }
    std::size_t pos = 0;
    auto number = [&]() -> std::size_t {
      const std::size_t start = pos;
      std::size_t v = 0;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        v = v * 10 + static_cast<std::size_t>(s[pos++] - '0');
        if (v > 1'000'000) break;
      }
      if (pos == start) throw FormatError("bad feature size '" + std::string(text) + "', expected Cx(h,w)");
      return v;
    };
    auto expect = [&](char c) {
      if (pos >= s.size() || s[pos] != c)
        throw FormatError("bad feature size '" + std::string(text) + "', expected Cx(h,w)");
      ++pos;
    };
    const std::size_t c = number();
    expect('x');
    expect('(');
    const std::size_t h = number();
    expect(',');
    const std::size_t w = number();
    expect(')');
    if (pos != s.size()) throw FormatError("trailing characters in feature size '" + std::string(text) + "'");
    return FeatureSize(c, h, w);
  }

  friend bool operator==(const FeatureSize&, const FeatureSize&) = default;

 private:
  std::size_t channels_ = 1, map_h_ = 1, map_w_ = 1;
};

}  // namespace utfe::extractors
