#include "selfment/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "selfment/errors.hpp"

namespace selfment {

namespace {

constexpr char kDpfMagic[4] = {'D', 'P', 'F', '1'};
constexpr std::size_t kDpfHeaderBytes = 4 + 5 * 4 + 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[offset + b]) << (8 * b);
  return v;
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = get_u32(bytes_, pos_);
    pos_ += 4;
    return v;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated DPF file while reading ") + what, pos_);
    }
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void FeatureField::validate() const {
  if (h_patches < 1 || w_patches < 1 || dim < 1) {
    throw ValidationError("feature field dimensions must be >= 1");
  }
  if (source_h < 1 || source_w < 1) {
    throw ValidationError("feature field source dimensions must be >= 1");
  }
  if (data.size() != patch_count() * dim) {
    throw ValidationError("feature field data length " + std::to_string(data.size()) +
                          " does not match " + std::to_string(patch_count() * dim));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError("non-finite feature value at element " + std::to_string(i) +
                            " (patch " + std::to_string(i / dim) + ")");
    }
  }
}

std::size_t PatchMask::count_foreground() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

void PatchMask::validate() const {
  if (labels.size() != static_cast<std::size_t>(h_patches) * w_patches) {
    throw ValidationError("mask length does not match its grid");
  }
  for (auto v : labels) {
    if (v > 1) throw ValidationError("mask labels must be 0 or 1");
  }
}

void ProbMap::validate() const {
  if (height < 1 || width < 1) throw ValidationError("probability map dimensions must be >= 1");
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw ValidationError("probability map length does not match its dimensions");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("probability outside [0,1]");
  }
}

std::vector<std::uint8_t> encode_dpf(const FeatureField& field) {
  field.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kDpfHeaderBytes + field.image_id.size() + field.data.size() * 4);
  out.insert(out.end(), kDpfMagic, kDpfMagic + 4);
  put_u32(out, field.h_patches);
  put_u32(out, field.w_patches);
  put_u32(out, field.dim);
  put_u32(out, field.source_h);
  put_u32(out, field.source_w);
  put_u32(out, static_cast<std::uint32_t>(field.image_id.size()));
  out.insert(out.end(), field.image_id.begin(), field.image_id.end());
  for (float f : field.data) put_f32(out, f);
  return out;
}

FeatureField decode_dpf(std::span<const std::uint8_t> bytes) {
  Cursor cur(bytes);
  cur.need(4, "magic");
  if (std::memcmp(bytes.data(), kDpfMagic, 4) != 0) throw FormatError("bad DPF magic", 0);
  cur.skip(4);

  FeatureField field;
  field.h_patches = cur.u32("h_patches");
  field.w_patches = cur.u32("w_patches");
  field.dim = cur.u32("dim");
  field.source_h = cur.u32("source_h");
  field.source_w = cur.u32("source_w");
  if (field.h_patches == 0 || field.w_patches == 0 || field.dim == 0) {
    throw FormatError("DPF dimensions must be positive", 4);
  }
  if (field.source_h == 0 || field.source_w == 0) {
    throw FormatError("DPF source dimensions must be positive", 16);
  }
  std::uint32_t id_len = cur.u32("image id length");
  cur.need(id_len, "image id");
  field.image_id.assign(reinterpret_cast<const char*>(bytes.data() + cur.pos()), id_len);
  cur.skip(id_len);

  const std::size_t count = field.patch_count() * field.dim;
  const std::size_t payload_start = cur.pos();
  if ((bytes.size() - payload_start) / 4 < count) {
    throw FormatError("truncated DPF payload: expected " + std::to_string(count * 4) + " bytes, found " +
                          std::to_string(bytes.size() - payload_start),
                      bytes.size());
  }
  if (bytes.size() - payload_start != count * 4) {
    throw FormatError("trailing bytes after DPF payload", payload_start + count * 4);
  }
  field.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = payload_start + 4 * i;
    float f = std::bit_cast<float>(get_u32(bytes, off));
    if (!std::isfinite(f)) throw FormatError("non-finite DPF value", off);
    field.data[i] = f;
  }
  return field;
}

void write_dpf(const FeatureField& field, const std::filesystem::path& path) {
  auto bytes = encode_dpf(field);
  write_file_atomic(path, bytes);
}

FeatureField read_dpf(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  try {
    return decode_dpf(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(std::uint32_t height, std::uint32_t width,
                                     std::span<const std::uint8_t> pixels) {
  if (height < 1 || width < 1 || pixels.size() != static_cast<std::size_t>(height) * width) {
    throw ValidationError("PGM dimensions do not match pixel count");
  }
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::uint8_t quantize_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0,1]");
  return static_cast<std::uint8_t>(std::lround(p * 255.0));
}

void write_mask_pgm(const PatchMask& mask, const std::filesystem::path& path) {
  mask.validate();
  std::vector<std::uint8_t> px(mask.size());
  std::transform(mask.labels.begin(), mask.labels.end(), px.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_file_atomic(path, encode_pgm(mask.h_patches, mask.w_patches, px));
}

void write_prob_pgm(const ProbMap& map, const std::filesystem::path& path) {
  map.validate();
  std::vector<std::uint8_t> px(map.size());
  std::transform(map.values.begin(), map.values.end(), px.begin(), quantize_probability);
  write_file_atomic(path, encode_pgm(map.height, map.width, px));
}

ProbMap decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
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
  auto read_int = [&](const char* what) -> std::uint64_t {
    skip_space();
    const std::size_t start = pos;
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1u << 30)) throw FormatError(std::string("PGM ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("malformed PGM header: expected ") + what, start);
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (P5)", 0);
  pos = 2;
  auto width = read_int("width");
  auto height = read_int("height");
  auto maxval = read_int("maxval");
  if (width == 0 || height == 0) throw FormatError("PGM dimensions must be positive", pos);
  if (maxval != 255) throw FormatError("PGM maxval must be 255", pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("malformed PGM header: missing whitespace after maxval", pos);
  }
  ++pos;
  const std::size_t count = width * height;
  if (bytes.size() - pos != count) {
    throw FormatError("PGM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                          std::to_string(count),
                      pos);
  }
  ProbMap map(static_cast<std::uint32_t>(height), static_cast<std::uint32_t>(width));
  for (std::size_t i = 0; i < count; ++i) map.values[i] = bytes[pos + i] / 255.0;
  return map;
}

ProbMap read_mask_pgm(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  try {
    return decode_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

PatchMask prob_map_to_mask(const ProbMap& map) {
  PatchMask mask(map.height, map.width);
  for (std::size_t i = 0; i < map.size(); ++i) {
    mask.labels[i] = map.values[i] > 127.0 / 255.0 ? 1 : 0;
  }
  return mask;
}

void write_cls_sidecar(std::span<const float> embedding, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  out.reserve(embedding.size() * 4);
  for (float f : embedding) {
    if (!std::isfinite(f)) throw ValidationError("non-finite CLS embedding value");
    put_f32(out, f);
  }
  write_file_atomic(path, out);
}

std::vector<float> read_cls_sidecar(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.empty() || bytes.size() % 4 != 0) {
    throw FormatError(path.string() + ": CLS sidecar length is not a positive multiple of 4", bytes.size());
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<float>(get_u32(bytes, 4 * i));
    if (!std::isfinite(out[i])) throw FormatError(path.string() + ": non-finite CLS value", 4 * i);
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path()) {
    std::error_code mk;
    std::filesystem::create_directories(path.parent_path(), mk);
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace selfment
