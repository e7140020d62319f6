#pragma once

#include <cstdint>
#include <filesystem>
#include <random>

#include "neurodecode/tensor.hpp"
#include "neurodecode/tensor_io.hpp"

namespace neurodecode {

struct SynthConfig {
  int num_categories = 2;
  int samples_per_category = 10;
  int image_size = 32;
  int feature_dim = 64;
  int voxel_dim = 128;
  double voxel_noise = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Ground-truth linear-Gaussian map from features to voxels:
// x = M z + b0 + noise * eps.
struct VoxelForwardModel {
  Tensor M;   // [V, F]
  Tensor b0;  // [V]
  double noise = 0.0;
};

// Category k draws shape k mod 6 (circle, square, triangle, cross, diamond,
// ring) in a fixed per-category color, with per-sample jitter from `rng`.
ImageRGB render_toy_image(int category, int size, std::mt19937_64& rng);

// Writes out_dir/images/*.png and out_dir/manifest.json. Each category is
// split 80/20 into train/test; output is a pure function of cfg.
DatasetManifest gen_toy_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

// M ~ N(0, 1/F) entrywise, b0 ~ U(-0.1, 0.1).
VoxelForwardModel make_forward_model(const SynthConfig& cfg);

Tensor simulate_voxels(const Tensor& Z, const VoxelForwardModel& model, std::uint64_t seed);

void save_forward_model(const VoxelForwardModel& model, const std::filesystem::path& dir);
VoxelForwardModel load_forward_model(const std::filesystem::path& dir);

// Writes one feature and one voxel DCTF vector per record (rows of Z and X,
// in record order) and rewrites out_dir/manifest.json to reference them.
DatasetManifest attach_features_and_voxels(DatasetManifest manifest, const Tensor& Z, const Tensor& X,
                                           const std::filesystem::path& out_dir);

}  // namespace neurodecode
