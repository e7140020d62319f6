#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "neurodecode/nn.hpp"

namespace neurodecode {

// Encoder-decoder generator with skip connections. Input is the coarse image
// plus one noise channel. Encoder: `channels.size()` stride-2 convs (kernel 4,
// LeakyReLU 0.2). Decoder: mirrored stride-2 transposed convs (ReLU) whose
// outputs are concatenated with the matching encoder activation; the last one
// emits 3 channels through a sigmoid.
struct GenSpec {
  std::size_t image_size = 16;
  std::vector<std::size_t> channels = {16, 32};

  void validate() const;
  static GenSpec desk_scale(std::size_t image_size = 16);
  static GenSpec paper_scale();  // 128x128x3
};

// Patch discriminator over the 6-channel (coarse, candidate) stack: stride-2
// convs (kernel 4, LeakyReLU 0.2) then a 3x3 conv to one channel and a sigmoid.
struct DiscSpec {
  std::size_t image_size = 16;
  std::vector<std::size_t> channels = {16, 32};

  std::size_t patch_grid() const { return image_size >> channels.size(); }
  void validate() const;
  static DiscSpec desk_scale(std::size_t image_size = 16);
  static DiscSpec paper_scale();
};

using GenParams = nn::ParamMap;
using DiscParams = nn::ParamMap;
// [H, W, 1] standard normal values fed to G as an extra input channel.
using NoiseSample = Tensor;

enum class GenLossMode {
  kMinimax,        // mean log(1 - D(fake)) + lambda * L1
  kNonSaturating,  // -mean log D(fake) + lambda * L1
};

struct GanConfig {
  double lambda_l1 = 100.0;
  // Weight of the reconstruction-network loss in a joint fine-tune. The
  // staged default trains R first and keeps it frozen, so this stays 0.
  double theta_recon = 0.0;
  double lr = 1e-3;
  std::size_t batch = 256;
  std::size_t epochs = 500;
  GenLossMode mode = GenLossMode::kMinimax;
  double beta1 = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

GenParams init_generator(const GenSpec& spec, std::uint64_t seed);
DiscParams init_discriminator(const DiscSpec& spec, std::uint64_t seed);

NoiseSample make_noise(std::size_t size, std::uint64_t seed, std::uint64_t stream = 0);

ImageRGB gen_forward(const GenParams& G, const GenSpec& spec, const ImageRGB& coarse, const NoiseSample& w);
// Per-patch probabilities, [Hp, Wp].
Tensor disc_forward(const DiscParams& D, const DiscSpec& spec, const ImageRGB& coarse, const ImageRGB& candidate);

inline constexpr double kProbabilityClamp = 1e-7;

struct GanLosses {
  double l_cgan = 0.0;
  double l_l1 = 0.0;
  double g_objective = 0.0;
  double d_objective = 0.0;
  // Probabilities clamped into [1e-7, 1 - 1e-7] before taking logs.
  std::size_t clamped = 0;
};

GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake, const ImageRGB& target, const ImageRGB& x_prime,
                     double lambda, GenLossMode mode = GenLossMode::kMinimax);

struct GanSample {
  ImageRGB coarse;
  ImageRGB target;
  NoiseSample noise;
};

// Weights of the two generator terms; {1, lambda} is the generator objective,
// {0, 1} isolates the L1 term and {1, 0} the adversarial term.
struct GenObjectiveTerms {
  double adversarial = 1.0;
  double l1 = 100.0;
  GenLossMode mode = GenLossMode::kMinimax;
};

// Batch-mean generator objective and its gradient w.r.t. G (D held fixed).
nn::LossAndGrad generator_loss_and_grad(const GenParams& G, const GenSpec& gs, const DiscParams& D,
                                        const DiscSpec& ds, std::span<const GanSample> batch,
                                        GenObjectiveTerms terms);
// Batch-mean d_objective = -l_cgan and its gradient w.r.t. D (G held fixed).
nn::LossAndGrad discriminator_loss_and_grad(const GenParams& G, const GenSpec& gs, const DiscParams& D,
                                            const DiscSpec& ds, std::span<const GanSample> batch);

struct GanPair {
  ImageRGB coarse;
  ImageRGB target;
  int category = 0;
};

struct GanState {
  GenSpec gen_spec;
  DiscSpec disc_spec;
  GenParams G;
  DiscParams D;
  nn::Adam g_opt;
  nn::Adam d_opt;
  std::size_t step = 0;

  static GanState init(const GenSpec& gs, const DiscSpec& ds, const GanConfig& cfg);
};

// Batch means; l_cgan/d_objective from the discriminator phase, l_l1 and
// g_objective from the generator phase.
struct GanStepRecord {
  double l_cgan = 0.0;
  double l_l1 = 0.0;
  double g_objective = 0.0;
  double d_objective = 0.0;
  std::size_t clamped = 0;
};

// One discriminator update (ascending l_cgan) followed by one generator update.
GanStepRecord gan_step(GanState& state, std::span<const GanPair> batch, const GanConfig& cfg);

struct GanModel {
  GenSpec gen_spec;
  DiscSpec disc_spec;
  GenParams G;
  DiscParams D;
  GanConfig config;
};

struct GanTrainResult {
  GanModel model;
  std::vector<GanStepRecord> history;
};

// All pairs must share one category; runs cfg.epochs sweeps of gan_step.
GanTrainResult train_gan(std::span<const GanPair> pairs, const GenSpec& gs, const DiscSpec& ds, const GanConfig& cfg);

using GanRegistry = std::map<int, GanModel>;

nlohmann::json to_json(const GanConfig& cfg);
GanConfig gan_config_from_json(const nlohmann::json& j);

// dir/<category>/{generator,discriminator}/ checkpoints plus gan_config.json.
void save_gan_registry(const GanRegistry& registry, const std::filesystem::path& dir);
GanRegistry load_gan_registry(const std::filesystem::path& dir);

}  // namespace neurodecode
