#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "utfe/extractors/model.hpp"
#include "utfe/io.hpp"

// Model file layout, all integers and floats little-endian:
//
//   "UTFE"                      magic
//   u16 version                 kModelFormatVersion
//   u64 body_size               bytes between this field and the checksum
//   body:
//     u8  kind                  ExtractorKind
//     u32 input_h, input_w
//     u32 channels, map_h, map_w
//     u32 epochs_run, f32 final_loss, u64 seed
//     u32 encoder_layers, u32 decoder_layers
//     per layer: u8 LayerKind, u8 field count, u32 fields...
//     f32 parameters: per parametrised layer, weights then biases, encoder first
//   u32 crc32                   over every preceding byte

namespace utfe::extractors {

inline constexpr char kModelMagic[4] = {'U', 'T', 'F', 'E'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

class ModelFileError : public FormatError {
 public:
  enum class Code { bad_magic, version_mismatch, truncated, checksum, malformed };
  ModelFileError(Code code, const std::string& what) : FormatError(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    std::uint8_t raw[sizeof(U)];
    std::memcpy(raw, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    bytes.insert(bytes.end(), raw, raw + sizeof(U));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <class U>
  U get() {
    if (pos_ + sizeof(U) > bytes_.size())
      throw ModelFileError(ModelFileError::Code::malformed, "model body ends inside a field");
    std::uint8_t raw[sizeof(U)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, raw, sizeof(U));
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint32_t> spec_fields(const nn::LayerSpec& spec) {
  using namespace nn;
  return std::visit(
      overloaded{
          [](const DenseSpec& s) { return std::vector<std::uint32_t>{std::uint32_t(s.in_units), std::uint32_t(s.out_units)}; },
          [](const Conv2dSpec& s) {
            return std::vector<std::uint32_t>{std::uint32_t(s.in_channels), std::uint32_t(s.out_channels),
                                              std::uint32_t(s.kernel_h), std::uint32_t(s.kernel_w)};
          },
          [](const MaxPool2dSpec& s) { return std::vector<std::uint32_t>{std::uint32_t(s.pool_h), std::uint32_t(s.pool_w)}; },
          [](const Upsample2dSpec& s) { return std::vector<std::uint32_t>{std::uint32_t(s.factor_h), std::uint32_t(s.factor_w)}; },
          [](const SigmoidSpec&) { return std::vector<std::uint32_t>{}; },
          [](const ReluSpec&) { return std::vector<std::uint32_t>{}; },
          [](const FlattenSpec&) { return std::vector<std::uint32_t>{}; },
          [](const ReshapeSpec& s) { return std::vector<std::uint32_t>(s.target.begin(), s.target.end()); },
      },
      spec);
}

inline nn::LayerSpec spec_from_fields(std::uint8_t kind, const std::vector<std::uint32_t>& f) {
  using namespace nn;
  auto need = [&](std::size_t n) {
    if (f.size() != n)
      throw ModelFileError(ModelFileError::Code::malformed, "layer " + name_of(static_cast<LayerKind>(kind)) +
                                                                " has " + std::to_string(f.size()) + " fields");
  };
  switch (static_cast<LayerKind>(kind)) {
    case LayerKind::dense: need(2); return DenseSpec{f[0], f[1]};
    case LayerKind::conv2d: need(4); return Conv2dSpec{f[0], f[1], f[2], f[3]};
    case LayerKind::maxpool2d: need(2); return MaxPool2dSpec{f[0], f[1]};
    case LayerKind::upsample2d: need(2); return Upsample2dSpec{f[0], f[1]};
    case LayerKind::sigmoid: need(0); return SigmoidSpec{};
    case LayerKind::relu: need(0); return ReluSpec{};
    case LayerKind::flatten: need(0); return FlattenSpec{};
    case LayerKind::reshape: return ReshapeSpec{Shape(f.begin(), f.end())};
  }
  throw ModelFileError(ModelFileError::Code::malformed, "unknown layer kind " + std::to_string(kind));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_model(const ExtractorModel& m) {
  detail::Writer body;
  body.put<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.input_h));
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.input_w));
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.feature_size.channels()));
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.feature_size.map_h()));
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.feature_size.map_w()));
  body.put<std::uint32_t>(m.meta.epochs_run);
  body.put<float>(m.meta.final_loss);
  body.put<std::uint64_t>(m.meta.seed);
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.encoder.layers().size()));
  body.put<std::uint32_t>(static_cast<std::uint32_t>(m.decoder.layers().size()));
  for (const auto* net : {&m.encoder, &m.decoder})
    for (const auto& layer : net->layers()) {
      const auto fields = detail::spec_fields(layer.spec);
      body.put<std::uint8_t>(static_cast<std::uint8_t>(nn::kind_of(layer.spec)));
      body.put<std::uint8_t>(static_cast<std::uint8_t>(fields.size()));
      for (auto v : fields) body.put<std::uint32_t>(v);
    }
  for (const auto* net : {&m.encoder, &m.decoder})
    for (const auto& layer : net->layers())
      for (const auto& p : layer.params)
        for (float v : p.value.values()) body.put<float>(v);

  detail::Writer out;
  for (char c : kModelMagic) out.put<std::uint8_t>(static_cast<std::uint8_t>(c));
  out.put<std::uint16_t>(kModelFormatVersion);
  out.put<std::uint64_t>(body.bytes.size());
  out.bytes.insert(out.bytes.end(), body.bytes.begin(), body.bytes.end());
  out.put<std::uint32_t>(detail::crc32_of(out.bytes));
  return out.bytes;
}

/// Parses a model file image. Each failure class raises a distinct
/// ModelFileError code; nothing is returned on failure.
inline ExtractorModel decode_model(std::span<const std::uint8_t> bytes) {
  using Code = ModelFileError::Code;
  constexpr std::size_t kHeader = 4 + 2 + 8;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    throw ModelFileError(Code::bad_magic, "not a model file (bad magic)");
  if (bytes.size() < kHeader) throw ModelFileError(Code::truncated, "model file truncated in header");
  detail::Reader header(bytes.subspan(4, kHeader - 4));
  const auto version = header.get<std::uint16_t>();
  if (version != kModelFormatVersion)
    throw ModelFileError(Code::version_mismatch, "model format version " + std::to_string(version) +
                                                     " unsupported (expected " +
                                                     std::to_string(kModelFormatVersion) + ")");
  const auto body_size = header.get<std::uint64_t>();
  if (bytes.size() - kHeader < 4 || bytes.size() - kHeader - 4 < body_size)
    throw ModelFileError(Code::truncated, "model file truncated: body needs " + std::to_string(body_size) + " bytes");
  if (bytes.size() - kHeader - 4 > body_size) throw ModelFileError(Code::malformed, "trailing bytes after model");
  const std::size_t crc_at = kHeader + body_size;
  const auto stored = detail::Reader(bytes.subspan(crc_at, 4)).get<std::uint32_t>();
  if (stored != detail::crc32_of(bytes.first(crc_at)))
    throw ModelFileError(Code::checksum, "model file checksum mismatch");

  detail::Reader in(bytes.subspan(kHeader, body_size));
  ExtractorModel m;
  const auto kind = in.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(ExtractorKind::dcae))
    throw ModelFileError(Code::malformed, "unknown extractor kind " + std::to_string(kind));
  m.kind = static_cast<ExtractorKind>(kind);
  m.input_h = in.get<std::uint32_t>();
  m.input_w = in.get<std::uint32_t>();
  const auto c = in.get<std::uint32_t>(), fh = in.get<std::uint32_t>(), fw = in.get<std::uint32_t>();
  m.meta.epochs_run = in.get<std::uint32_t>();
  m.meta.final_loss = in.get<float>();
  m.meta.seed = in.get<std::uint64_t>();
  const auto n_enc = in.get<std::uint32_t>(), n_dec = in.get<std::uint32_t>();
  try {
    m.feature_size = FeatureSize(c, fh, fw);
    std::vector<nn::LayerSpec> enc, dec;
    for (std::uint32_t i = 0; i < n_enc + n_dec; ++i) {
      const auto lk = in.get<std::uint8_t>();
      const auto count = in.get<std::uint8_t>();
      std::vector<std::uint32_t> fields(count);
      for (auto& f : fields) f = in.get<std::uint32_t>();
      (i < n_enc ? enc : dec).push_back(detail::spec_from_fields(lk, fields));
    }
    if (m.kind != ExtractorKind::dct) {
      m.encoder = nn::Sequential<float>({1, m.input_h, m.input_w}, enc);
      m.decoder = nn::Sequential<float>(m.feature_shape(), dec);
    } else if (!enc.empty() || !dec.empty()) {
      throw ModelFileError(Code::malformed, "DCT model lists layers");
    }
    for (auto* net : {&m.encoder, &m.decoder})
      for (auto& layer : net->layers())
        for (auto& p : layer.params) {
          if (in.remaining() < p.value.size() * sizeof(float))
            throw ModelFileError(Code::malformed, "model parameters shorter than the layer table requires");
          for (float& v : p.value.values()) v = in.get<float>();
        }
    if (in.remaining() != 0) throw ModelFileError(Code::malformed, "unused bytes after model parameters");
    check_model(m);
  } catch (const ModelFileError&) {
    throw;
  } catch (const Error& e) {
    throw ModelFileError(Code::malformed, std::string("inconsistent model description: ") + e.what());
  }
  return m;
}

inline void save_model(const ExtractorModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(m));
}

inline ExtractorModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace utfe::extractors
