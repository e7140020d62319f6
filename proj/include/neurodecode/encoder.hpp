#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "neurodecode/nn.hpp"
#include "neurodecode/tensor_io.hpp"

namespace neurodecode {

struct ConvLayerSpec {
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 2;
};

// Conv stack (ReLU, padding kernel/2) followed by fully connected layers.
// The feature tap z is the ReLU output of the first fully connected layer;
// the last layer produces class logits.
struct EncoderSpec {
  std::size_t input_size = 32;
  std::vector<ConvLayerSpec> conv = {{8, 3, 2}, {16, 3, 2}};
  std::vector<std::size_t> fc = {64, 2};

  std::size_t feature_dim() const { return fc.front(); }
  std::size_t num_classes() const { return fc.back(); }
  // Spatial size and channel count after the conv stack.
  std::size_t conv_output_size() const;
  std::size_t conv_output_channels() const;
  void validate() const;

  static EncoderSpec desk_scale(std::size_t num_classes);
  // VGG-shaped stand-in: 224x224 input, 4096-wide feature tap.
  static EncoderSpec paper_scale(std::size_t num_classes = 1000);
};

using EncoderParams = nn::ParamMap;

EncoderParams init_encoder(const EncoderSpec& spec, std::uint64_t seed);
void validate_encoder(const EncoderParams& params, const EncoderSpec& spec);

struct EncoderOutput {
  Tensor z;       // [F]
  Tensor logits;  // [K]
  int predicted() const;
};

EncoderOutput encode(const EncoderParams& params, const EncoderSpec& spec, const ImageRGB& img);
// Logits recomputed from a feature tap through the remaining layers.
Tensor encoder_head(const EncoderParams& params, const EncoderSpec& spec, const Tensor& z);

// Mean softmax cross-entropy over the batch and its gradient.
nn::LossAndGrad encoder_loss_and_grad(const EncoderParams& params, const EncoderSpec& spec,
                                  std::span<const ImageRGB> images, std::span<const int> labels);

struct EncoderTrainConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct EncoderTrainResult {
  EncoderParams params;
  std::vector<double> loss_history;
};

EncoderTrainResult train_encoder(std::span<const ImageRGB> images, std::span<const int> labels,
                                 const EncoderSpec& spec, const EncoderTrainConfig& cfg);
// Trains on the manifest's train split, images resized to the spec input size.
EncoderTrainResult train_encoder(const DatasetManifest& manifest, const EncoderSpec& spec,
                                 const EncoderTrainConfig& cfg);

double encoder_accuracy(const EncoderParams& params, const EncoderSpec& spec, std::span<const ImageRGB> images,
                        std::span<const int> labels);

// Feature taps for every image, stacked as [N, F].
Tensor extract_features(const EncoderParams& params, const EncoderSpec& spec, std::span<const ImageRGB> images);

// Loads every manifest image resized to size x size (record order).
std::vector<ImageRGB> load_manifest_images(const DatasetManifest& manifest, std::size_t size);

void save_encoder(const std::filesystem::path& dir, const EncoderParams& params, const EncoderSpec& spec);
std::pair<EncoderParams, EncoderSpec> load_encoder(const std::filesystem::path& dir);

nlohmann::json to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

}  // namespace neurodecode
