#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neurodecode/cgan.hpp"
#include "neurodecode/recon.hpp"
#include "neurodecode/ridge.hpp"
#include "neurodecode/tensor_io.hpp"

namespace neurodecode {

enum class CategorySource {
  kGiven,            // caller supplies one category per sample
  kVoxelClassifier,  // one-hot ridge classifier over the voxels, argmax
};

struct PipelineBundle {
  RidgeModel ridge;
  ReconSpec recon_spec;
  ReconParams recon;
  GanRegistry gans;
  // Output size when no GAN is registered (otherwise taken from the GANs).
  std::size_t gan_image_size = 16;
  CategorySource category_source = CategorySource::kVoxelClassifier;
  std::optional<RidgeModel> classifier;
  bool fallback_to_coarse = true;

  std::size_t output_size() const;
  void validate() const;
};

struct Reconstruction {
  std::vector<ImageRGB> coarse;   // recon output resized to the GAN size
  std::vector<ImageRGB> refined;  // GAN output, or coarse on fallback
  std::vector<int> categories;
  std::vector<bool> refined_by_gan;
  std::size_t fallbacks = 0;
};

// voxels -> decoded features -> coarse image -> resize -> per-category G.
Reconstruction reconstruct_from_voxels(const PipelineBundle& bundle, const Tensor& X,
                                       std::optional<std::span<const int>> categories, std::uint64_t seed);

struct DecodingData {
  Tensor X_train, Z_train, X_test, Z_test;
  std::vector<std::size_t> train_indices, test_indices;
  std::vector<int> train_categories, test_categories;
};

// Reads each record's voxel and feature files, grouped by split.
DecodingData load_decoding_data(const DatasetManifest& manifest);

struct DecodingRow {
  std::string method;  // "linear" (near-zero alpha) or "ridge"
  double alpha = 0.0;
  double r_squared = 0.0;
  double rmse = 0.0;
};

struct DecodingReport {
  std::vector<DecodingRow> rows;
  std::size_t best_ridge_row = 0;
  std::vector<std::size_t> excluded_dims;
  std::size_t train_samples = 0, test_samples = 0;
};

// Fits on the train split only and scores held-out R^2 / RMSE: one row for
// the near-zero-alpha linear baseline followed by one row per alpha.
DecodingReport evaluate_decoding(const DecodingData& data, std::span<const double> alphas, RidgeOptions options = {});
DecodingReport evaluate_decoding(const DatasetManifest& manifest, std::span<const double> alphas,
                                 RidgeOptions options = {});

struct ImageMetrics {
  double l1 = 0.0;
  double mse = 0.0;
};

struct ReconstructionReport {
  std::vector<ImageMetrics> per_image;
  double mean_l1 = 0.0;
  double mean_mse = 0.0;
  std::filesystem::path grid_path;
  Dims grid_dims;
};

inline constexpr std::size_t kGridGutter = 2;

// Rows of equally sized images separated by white 2-pixel gutters.
ImageRGB make_comparison_grid(std::span<const std::vector<ImageRGB>> rows);

// Metrics of `refined` against `originals` (resized to match), plus a PNG
// grid with rows original / coarse / refined.
ReconstructionReport evaluate_reconstruction(std::span<const ImageRGB> originals, std::span<const ImageRGB> coarse,
                                             std::span<const ImageRGB> refined,
                                             const std::filesystem::path& grid_path);

nlohmann::json to_json(const DecodingReport& report);
nlohmann::json to_json(const ReconstructionReport& report);

}  // namespace neurodecode
