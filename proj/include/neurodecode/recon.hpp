#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "neurodecode/nn.hpp"

namespace neurodecode {

// Feature vector -> fully connected (ReLU) -> [C0,H0,W0] -> transposed convs
// (kernel 4, stride 2, padding 1, ReLU; each doubles H and W) -> 1x1 conv to
// 3 channels -> sigmoid.
struct ReconSpec {
  std::size_t feature_dim = 64;
  std::size_t fc_channels = 32;
  std::size_t fc_height = 4;
  std::size_t fc_width = 4;
  std::vector<std::size_t> deconv_channels = {16, 8};

  std::size_t output_height() const { return fc_height << deconv_channels.size(); }
  std::size_t output_width() const { return fc_width << deconv_channels.size(); }
  Dims output_dims() const { return {output_height(), output_width(), 3}; }
  void validate() const;

  static ReconSpec desk_scale();
  // 4096 -> 512x7x7 -> 256,128,128,128 -> 112x112x3
  static ReconSpec paper_scale();
};

using ReconParams = nn::ParamMap;

enum class ReconLossMode {
  kMeanSquared,  // mean over pixels of the squared residual
  kL2Norm,       // unsquared Euclidean norm of the residual
};

ReconParams init_recon(const ReconSpec& spec, std::uint64_t seed);
void validate_recon(const ReconParams& params, const ReconSpec& spec);

ImageRGB recon_forward(const ReconParams& params, const ReconSpec& spec, const Tensor& z);

double recon_loss(const ReconParams& params, const ReconSpec& spec, const Tensor& z, const ImageRGB& x,
                  ReconLossMode mode = ReconLossMode::kMeanSquared);

// Batch-mean loss and its gradient.
nn::LossAndGrad recon_loss_and_grad(const ReconParams& params, const ReconSpec& spec, std::span<const Tensor> z,
                                    std::span<const ImageRGB> x, ReconLossMode mode = ReconLossMode::kMeanSquared);

struct ReconPair {
  Tensor z;
  ImageRGB x;
};

struct ReconTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double lr = 0.01;
  double lr_decay = 0.95;  // lr = lr * lr_decay^epoch
  // Input perturbation std, relative to each feature dim's std over the pairs.
  double noise_scale = 0.01;
  ReconLossMode loss = ReconLossMode::kMeanSquared;
  std::uint64_t seed = 0;
};

struct ReconTrainResult {
  ReconParams params;
  std::vector<double> loss_history;
  nn::Adam optimizer;
};

// Throws nn::TrainingDiverged on a non-finite loss.
ReconTrainResult train_recon(std::span<const ReconPair> pairs, const ReconSpec& spec, const ReconTrainConfig& cfg);

nlohmann::json to_json(const ReconSpec& spec);
ReconSpec recon_spec_from_json(const nlohmann::json& j);

void save_recon(const std::filesystem::path& dir, const ReconParams& params, const ReconSpec& spec,
                const nn::Adam* optimizer = nullptr);
std::pair<ReconParams, ReconSpec> load_recon(const std::filesystem::path& dir);

}  // namespace neurodecode
