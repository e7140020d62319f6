#include "neurodecode/pipeline.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t PipelineBundle::output_size() const {
  return gans.empty() ? gan_image_size : gans.begin()->second.gen_spec.image_size;
}

void PipelineBundle::validate() const {
  if (ridge.features() != recon_spec.feature_dim) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("decoder emits {} features but recon expects {}",
                                                       ridge.features(), recon_spec.feature_dim));
  }
  validate_recon(recon, recon_spec);
  for (const auto& [k, m] : gans) {
    if (m.gen_spec.image_size != output_size()) {
      throw Error(ErrorCode::kShapeMismatch, fmt::format("GAN for category {} has a different image size", k));
    }
  }
  if (category_source == CategorySource::kVoxelClassifier && !classifier) {
    throw Error(ErrorCode::kConfig, "voxel-classifier category source needs a fitted classifier");
  }
}

Reconstruction reconstruct_from_voxels(const PipelineBundle& bundle, const Tensor& X,
                                       std::optional<std::span<const int>> categories, std::uint64_t seed) {
  bundle.validate();
  const Tensor Z = predict_features(bundle.ridge, X);
  const std::size_t n = X.dim(0);

  std::vector<int> cats;
  if (bundle.category_source == CategorySource::kGiven) {
    if (!categories || categories->size() != n) {
      throw Error(ErrorCode::kInvalidArgument, "category_source=given needs one category per voxel row");
    }
    cats.assign(categories->begin(), categories->end());
  } else {
    cats = classify_voxels(*bundle.classifier, X);
  }

  const std::size_t size = bundle.output_size();
  Reconstruction out;
  for (std::size_t i = 0; i < n; ++i) {
    const ImageRGB coarse = resize_bilinear(recon_forward(bundle.recon, bundle.recon_spec, Z.row(i)), size, size);
    auto it = bundle.gans.find(cats[i]);
    if (it == bundle.gans.end()) {
      if (!bundle.fallback_to_coarse) {
        throw Error(ErrorCode::kUnknownCategory, fmt::format("no GAN registered for category {}", cats[i]));
      }
      out.refined.push_back(coarse);
      out.refined_by_gan.push_back(false);
      ++out.fallbacks;
    } else {
      const auto& m = it->second;
      out.refined.push_back(gen_forward(m.G, m.gen_spec, coarse, make_noise(size, seed, i)));
      out.refined_by_gan.push_back(true);
    }
    out.coarse.push_back(coarse);
  }
  out.categories = std::move(cats);
  if (out.fallbacks) spdlog::info("{} of {} samples fell back to the coarse image", out.fallbacks, n);
  return out;
}

DecodingData load_decoding_data(const DatasetManifest& manifest) {
  DecodingData d;
  std::vector<Tensor> xtr, ztr, xte, zte;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (!r.voxels || !r.features) {
      throw Error(ErrorCode::kDanglingPath, fmt::format("record {} has no voxel or feature file", i));
    }
    Tensor x = read_tensor(*r.voxels), z = read_tensor(*r.features);
    x = x.reshaped({x.size()});
    z = z.reshaped({z.size()});
    if (r.split == Split::kTrain) {
      xtr.push_back(std::move(x));
      ztr.push_back(std::move(z));
      d.train_indices.push_back(i);
      d.train_categories.push_back(r.category);
    } else {
      xte.push_back(std::move(x));
      zte.push_back(std::move(z));
      d.test_indices.push_back(i);
      d.test_categories.push_back(r.category);
    }
  }
  if (xtr.size() < 2 || xte.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "decoding evaluation needs >= 2 train and >= 2 test samples");
  }
  d.X_train = stack_rows(xtr);
  d.Z_train = stack_rows(ztr);
  d.X_test = stack_rows(xte);
  d.Z_test = stack_rows(zte);
  return d;
}

DecodingReport evaluate_decoding(const DecodingData& data, std::span<const double> alphas, RidgeOptions options) {
  for (auto i : data.test_indices) {
    if (std::find(data.train_indices.begin(), data.train_indices.end(), i) != data.train_indices.end()) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("record {} is in both train and test splits", i));
    }
  }
  DecodingReport rep;
  rep.train_samples = data.X_train.dim(0);
  rep.test_samples = data.X_test.dim(0);
  auto score = [&](const char* method, double alpha) {
    const RidgeModel m = fit_ridge(data.X_train, data.Z_train, alpha, options);
    const auto met = regression_metrics(data.Z_test, predict_features(m, data.X_test));
    rep.excluded_dims = met.excluded_dims;
    rep.rows.push_back({method, alpha, met.r_squared, met.rmse});
  };
  score("linear", near_zero_alpha(data.X_train, options.standardize));
  for (double a : alphas) score("ridge", a);
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (rep.best_ridge_row == 0 || rep.rows[i].r_squared > rep.rows[rep.best_ridge_row].r_squared) rep.best_ridge_row = i;
  }
  return rep;
}

DecodingReport evaluate_decoding(const DatasetManifest& manifest, std::span<const double> alphas,
                                 RidgeOptions options) {
  return evaluate_decoding(load_decoding_data(manifest), alphas, options);
}

ImageRGB make_comparison_grid(std::span<const std::vector<ImageRGB>> rows) {
  if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::kInvalidArgument, "empty comparison grid");
  const std::size_t cols = rows.front().size();
  const std::size_t h = rows.front().front().dim(0), w = rows.front().front().dim(1);
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error(ErrorCode::kShapeMismatch, "grid rows differ in length");
    for (const auto& img : r) require_dims(img, {h, w, 3}, "grid cell");
  }
  const std::size_t gh = rows.size() * h + (rows.size() - 1) * kGridGutter;
  const std::size_t gw = cols * w + (cols - 1) * kGridGutter;
  Tensor grid({gh, gw, 3}, 1.0f);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const ImageRGB& img = rows[r][c];
      const std::size_t oy = r * (h + kGridGutter), ox = c * (w + kGridGutter);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          for (std::size_t k = 0; k < 3; ++k) grid[((oy + y) * gw + ox + x) * 3 + k] = img[(y * w + x) * 3 + k];
    }
  }
  return grid;
}

ReconstructionReport evaluate_reconstruction(std::span<const ImageRGB> originals, std::span<const ImageRGB> coarse,
                                             std::span<const ImageRGB> refined, const fs::path& grid_path) {
  if (originals.size() != refined.size() || coarse.size() != refined.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("length mismatch: {} originals, {} coarse, {} refined", originals.size(), coarse.size(),
                            refined.size()));
  }
  if (refined.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to evaluate");
  ReconstructionReport rep;
  const std::size_t h = refined.front().dim(0), w = refined.front().dim(1);
  std::vector<std::vector<ImageRGB>> rows(3);
  for (std::size_t i = 0; i < refined.size(); ++i) {
    const ImageRGB orig = resize_bilinear(originals[i], h, w);
    rows[0].push_back(orig);
    rows[1].push_back(resize_bilinear(coarse[i], h, w));
    rows[2].push_back(refined[i]);
    const ImageMetrics m{mean_abs_diff(orig, refined[i]), mean_squared_diff(orig, refined[i])};
    rep.per_image.push_back(m);
    rep.mean_l1 += m.l1;
    rep.mean_mse += m.mse;
  }
  rep.mean_l1 /= double(refined.size());
  rep.mean_mse /= double(refined.size());
  const ImageRGB grid = make_comparison_grid(rows);
  rep.grid_dims = grid.dims();
  if (!grid_path.empty()) {
    write_png(grid, grid_path);
    rep.grid_path = grid_path;
  }
  return rep;
}

json to_json(const DecodingReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", r.method}, {"alpha", r.alpha}, {"r_squared", r.r_squared}, {"rmse", r.rmse}});
  }
  return {{"methods", rows},
          {"best_ridge", rows.at(report.best_ridge_row)},
          {"excluded_dims", report.excluded_dims},
          {"train_samples", report.train_samples},
          {"test_samples", report.test_samples}};
}

json to_json(const ReconstructionReport& report) {
  json per = json::array();
  for (const auto& m : report.per_image) per.push_back({{"l1", m.l1}, {"mse", m.mse}});
  return {{"per_image", per},
          {"mean_l1", report.mean_l1},
          {"mean_mse", report.mean_mse},
          {"grid", report.grid_path.filename().generic_string()},
          {"grid_dims", report.grid_dims}};
}

}  // namespace neurodecode
