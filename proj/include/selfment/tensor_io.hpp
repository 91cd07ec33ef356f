#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace selfment {

/// Dense per-patch embedding grid for one image. Patches are stored in
/// row-major grid order, each one a contiguous run of `dim` floats.
struct FeatureField {
  std::uint32_t h_patches = 0;
  std::uint32_t w_patches = 0;
  std::uint32_t dim = 0;
  std::uint32_t source_h = 0;
  std::uint32_t source_w = 0;
  std::string image_id;
  std::vector<float> data;

  std::size_t patch_count() const {
    return static_cast<std::size_t>(h_patches) * w_patches;
  }
  std::span<const float> patch(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  std::span<float> patch(std::size_t i) { return {data.data() + i * dim, dim}; }

  /// Throws ValidationError when a size or finiteness invariant is broken.
  void validate() const;

  bool operator==(const FeatureField&) const = default;
};

/// Binary label per patch, row-major.
struct PatchMask {
  std::uint32_t h_patches = 0;
  std::uint32_t w_patches = 0;
  std::vector<std::uint8_t> labels;

  PatchMask() = default;
  PatchMask(std::uint32_t h, std::uint32_t w, std::uint8_t fill = 0)
      : h_patches(h), w_patches(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return labels.size(); }
  std::size_t count_foreground() const;
  void validate() const;

  bool operator==(const PatchMask&) const = default;
};

/// Pixel-resolution probability map with values in [0, 1].
struct ProbMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> values;

  ProbMap() = default;
  ProbMap(std::uint32_t h, std::uint32_t w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return values.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  void validate() const;

  bool operator==(const ProbMap&) const = default;
};

/// Serializes a field as "DPF1" + five little-endian u32 dimensions + a
/// u32-length-prefixed UTF-8 image id + little-endian f32 payload.
std::vector<std::uint8_t> encode_dpf(const FeatureField& field);
FeatureField decode_dpf(std::span<const std::uint8_t> bytes);

void write_dpf(const FeatureField& field, const std::filesystem::path& path);
FeatureField read_dpf(const std::filesystem::path& path);

/// Binary 8-bit PGM (P5, maxval 255). Masks are stored as {0,255};
/// probabilities are quantized with round-half-away-from-zero of p*255.
std::vector<std::uint8_t> encode_pgm(std::uint32_t height, std::uint32_t width,
                                     std::span<const std::uint8_t> pixels);
void write_mask_pgm(const PatchMask& mask, const std::filesystem::path& path);
void write_prob_pgm(const ProbMap& map, const std::filesystem::path& path);
std::uint8_t quantize_probability(double p);

/// Reads any P5/maxval-255 image and maps byte b to b/255.
ProbMap read_mask_pgm(const std::filesystem::path& path);
ProbMap decode_pgm(std::span<const std::uint8_t> bytes);

/// Reinterprets a patch-resolution PGM as a mask (byte > 127 is foreground).
PatchMask prob_map_to_mask(const ProbMap& map);

/// CLS-embedding sidecar: raw little-endian f32 values, no header.
void write_cls_sidecar(std::span<const float> embedding, const std::filesystem::path& path);
std::vector<float> read_cls_sidecar(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace selfment
