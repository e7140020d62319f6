#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neurodecode/cgan.hpp"
#include "neurodecode/encoder.hpp"
#include "neurodecode/recon.hpp"
#include "neurodecode/synth.hpp"

namespace neurodecode {

struct EncoderSection {
  std::optional<std::size_t> input_size;  // defaults to synth.image_size
  std::vector<ConvLayerSpec> conv = {{8, 3, 2}, {16, 3, 2}};
  std::vector<std::size_t> hidden;  // extra widths between the feature tap and the logits
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double lr = 1e-3;
};

struct DecoderSection {
  double alpha = 0.7;
  std::vector<double> alphas = {0.1, 1.0, 10.0, 100.0, 1000.0};
  bool standardize = true;
  double classifier_alpha = 10.0;
};

struct ReconSection {
  std::size_t fc_channels = 32;
  std::size_t fc_height = 4;
  std::size_t fc_width = 4;
  std::vector<std::size_t> deconv_channels = {16, 8};
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double lr = 0.01;
  double lr_decay = 0.95;
  double noise_scale = 0.01;
  std::string loss = "mse";  // mse | l2
};

struct GanSection {
  std::size_t image_size = 16;
  std::vector<std::size_t> gen_channels = {16, 32};
  std::vector<std::size_t> disc_channels = {16, 32};
  double lambda_l1 = 100.0;
  double theta_recon = 0.0;
  double lr = 1e-3;
  std::size_t batch = 16;
  std::size_t epochs = 100;
  std::string mode = "minimax";  // minimax | non_saturating
  double beta1 = 0.5;
  std::vector<int> categories;   // empty = every category in the train split
};

struct EvalSection {
  std::string category_source = "classifier";  // classifier | given
  bool fallback = true;
  std::size_t grid_samples = 8;
};

// Whole-run configuration. Parsing rejects unknown keys at every level; the
// echo written by each stage contains every field, defaults included.
struct RunConfig {
  std::uint64_t seed = 0;
  bool deterministic = false;
  SynthConfig synth;
  EncoderSection encoder;
  DecoderSection decoder;
  ReconSection recon;
  GanSection gan;
  EvalSection eval;

  EncoderSpec encoder_spec() const;
  EncoderTrainConfig encoder_train_config(std::size_t train_samples) const;
  ReconSpec recon_spec() const;
  ReconTrainConfig recon_train_config() const;
  GenSpec gen_spec() const;
  DiscSpec disc_spec() const;
  GanConfig gan_config() const;

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace neurodecode
