#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurodecode/tensor.hpp"

namespace neurodecode {

// DCTF layout (all integers little-endian):
//   "DCTF" | version u8 = 1 | dtype u8 = 1 (f32) | pad u16 = 0 | ndim u32 |
//   ndim x u32 dims | row-major f32 payload
inline constexpr std::uint8_t kDctfVersion = 1;
inline constexpr std::uint8_t kDctfDtypeF32 = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

// 8-bit RGB, RGBA (alpha dropped), grayscale or palette PNG -> [H,W,3] in [0,1].
ImageRGB load_image(const std::filesystem::path& path);
// Quantizes to 8-bit RGB with round-to-nearest after clamping to [0,1].
void write_png(const ImageRGB& img, const std::filesystem::path& path);

// Half-pixel-center bilinear resampling; works on any [H,W,C] tensor.
Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w);

enum class Split { kTrain, kTest };
const char* to_string(Split split);

struct SampleRecord {
  std::filesystem::path image;
  int category = 0;
  std::optional<std::filesystem::path> voxels;
  std::optional<std::filesystem::path> features;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;

  std::size_t count(Split split) const;
  std::vector<std::size_t> indices(Split split) const;
  // max(category) + 1, or 0 for an empty manifest.
  int num_categories() const;
};

// Paths inside the manifest are resolved relative to the manifest's directory.
// When `category_count` is given, every category id must be below it.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              std::optional<int> category_count = std::nullopt);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace neurodecode
