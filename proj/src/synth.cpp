#include "neurodecode/synth.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "neurodecode/nn.hpp"

namespace neurodecode {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kForwardModelStream = 0xF0F0'0001ULL;

constexpr std::array<std::array<float, 3>, 8> kPalette = {{
    {0.90f, 0.20f, 0.20f},
    {0.20f, 0.75f, 0.25f},
    {0.25f, 0.35f, 0.95f},
    {0.95f, 0.85f, 0.15f},
    {0.80f, 0.30f, 0.85f},
    {0.15f, 0.85f, 0.85f},
    {0.95f, 0.55f, 0.15f},
    {0.95f, 0.95f, 0.95f},
}};
constexpr float kBackground = 0.08f;

bool inside(int shape, double dx, double dy, double r) {
  const double dist = std::hypot(dx, dy);
  switch (shape) {
    case 0: return dist <= r;
    case 1: return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r;
    case 2: {
      // apex at the top, base 0.7r below center
      const double top = -r, bottom = 0.7 * r;
      if (dy < top || dy > bottom) return false;
      return std::abs(dx) <= r * (dy - top) / (bottom - top);
    }
    case 3: {
      const double arm = r / 3.0;
      return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
    case 4: return std::abs(dx) + std::abs(dy) <= r;
    default: return dist <= r && dist >= 0.5 * r;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (num_categories < 2) throw Error(ErrorCode::kConfig, "num_categories must be >= 2");
  if (samples_per_category < 1 || image_size < 1 || feature_dim < 1 || voxel_dim < 1) {
    throw Error(ErrorCode::kConfig, "all synth dimensions must be >= 1");
  }
  if (!(voxel_noise >= 0.0)) throw Error(ErrorCode::kConfig, "voxel_noise must be >= 0");
}

ImageRGB render_toy_image(int category, int size, std::mt19937_64& rng) {
  const int shape = category % 6;
  const auto& color = kPalette[static_cast<std::size_t>(category) % kPalette.size()];
  std::uniform_real_distribution<double> jitter(-size / 8.0, size / 8.0);
  std::uniform_real_distribution<double> scale(0.25, 0.35);
  const double cx = size / 2.0 + jitter(rng);
  const double cy = size / 2.0 + jitter(rng);
  const double r = size * scale(rng);

  const auto n = static_cast<std::size_t>(size);
  Tensor img({n, n, 3}, kBackground);
  constexpr int kSuper = 2;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper, py = y + (sy + 0.5) / kSuper;
          hits += inside(shape, px - cx, py - cy, r) ? 1 : 0;
        }
      const float cover = float(hits) / float(kSuper * kSuper);
      for (std::size_t c = 0; c < 3; ++c) {
        img[(std::size_t(y) * n + std::size_t(x)) * 3 + c] = kBackground + cover * (color[c] - kBackground);
      }
    }
  }
  return img;
}

DatasetManifest gen_toy_dataset(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  ensure_dir(out_dir / "images");
  DatasetManifest m;
  const int n = cfg.samples_per_category;
  const int n_test = static_cast<int>(std::lround(0.2 * n));
  std::uint64_t index = 0;
  for (int k = 0; k < cfg.num_categories; ++k) {
    for (int i = 0; i < n; ++i, ++index) {
      auto rng = nn::make_rng(cfg.seed, index);
      const ImageRGB img = render_toy_image(k, cfg.image_size, rng);
      const fs::path path = out_dir / "images" / fmt::format("c{:03d}_s{:04d}.png", k, i);
      write_png(img, path);
      SampleRecord r;
      r.image = path;
      r.category = k;
      r.split = i < n - n_test ? Split::kTrain : Split::kTest;
      m.records.push_back(std::move(r));
    }
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

VoxelForwardModel make_forward_model(const SynthConfig& cfg) {
  cfg.validate();
  auto rng = nn::make_rng(cfg.seed, kForwardModelStream);
  const auto v = static_cast<std::size_t>(cfg.voxel_dim), f = static_cast<std::size_t>(cfg.feature_dim);
  VoxelForwardModel model;
  model.M = nn::normal_tensor({v, f}, rng, 1.0f / std::sqrt(float(f)));
  std::uniform_real_distribution<float> bias(-0.1f, 0.1f);
  model.b0 = Tensor({v});
  for (auto& x : model.b0.data()) x = bias(rng);
  model.noise = cfg.voxel_noise;
  return model;
}

Tensor simulate_voxels(const Tensor& Z, const VoxelForwardModel& model, std::uint64_t seed) {
  if (Z.ndim() != 2 || Z.dim(1) != model.M.dim(1)) {
    throw Error(ErrorCode::kShapeMismatch, "Z " + dims_string(Z.dims()) + " does not match M " +
                                               dims_string(model.M.dims()));
  }
  const std::size_t n = Z.dim(0), v = model.M.dim(0), f = model.M.dim(1);
  Tensor X({n, v});
  for (std::size_t i = 0; i < n; ++i) {
    // per-row stream so rows are independent of batch composition
    auto rng = nn::make_rng(seed, i);
    std::normal_distribution<double> eps(0.0, 1.0);
    for (std::size_t j = 0; j < v; ++j) {
      double acc = model.b0[j];
      const float* m_row = model.M.raw() + j * f;
      for (std::size_t k = 0; k < f; ++k) acc += double(m_row[k]) * double(Z.at(i, k));
      if (model.noise > 0.0) acc += model.noise * eps(rng);
      X.at(i, j) = static_cast<float>(acc);
    }
  }
  return X;
}

void save_forward_model(const VoxelForwardModel& model, const fs::path& dir) {
  nn::save_checkpoint(dir, {{"M", model.M}, {"b0", model.b0}}, {{"noise", model.noise}});
}

VoxelForwardModel load_forward_model(const fs::path& dir) {
  auto ck = nn::load_checkpoint(dir);
  VoxelForwardModel m;
  m.M = ck.params.at("M");
  m.b0 = ck.params.at("b0");
  m.noise = ck.meta.at("noise").get<double>();
  return m;
}

DatasetManifest attach_features_and_voxels(DatasetManifest manifest, const Tensor& Z, const Tensor& X,
                                           const fs::path& out_dir) {
  const std::size_t n = manifest.records.size();
  if (Z.ndim() != 2 || X.ndim() != 2 || Z.dim(0) != n || X.dim(0) != n) {
    throw Error(ErrorCode::kShapeMismatch, "features/voxels must have one row per manifest record");
  }
  ensure_dir(out_dir / "features");
  ensure_dir(out_dir / "voxels");
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = manifest.records[i];
    r.features = out_dir / "features" / fmt::format("{:05d}.dctf", i);
    r.voxels = out_dir / "voxels" / fmt::format("{:05d}.dctf", i);
    write_tensor(Z.row(i), *r.features);
    write_tensor(X.row(i), *r.voxels);
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace neurodecode
