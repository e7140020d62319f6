#include "neurodecode/recon.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kDeconvKernel = 4;
constexpr nn::Conv kDeconv{2, 1};
constexpr nn::Conv kPointwise{1, 0};

std::string deconv_name(std::size_t i, const char* part) { return fmt::format("deconv{}.{}", i, part); }

struct ForwardCache {
  TensorD z;
  TensorD fc_out;                          // post-ReLU, [C0,H0,W0]
  std::vector<TensorD> deconv_out;         // post-ReLU
  TensorD image_chw;                       // post-sigmoid
};

ForwardCache forward(const ReconParams& p, const ReconSpec& spec, const Tensor& z) {
  if (z.size() != spec.feature_dim || z.ndim() != 1) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("recon expects a [{}] feature vector, got {}",
                                                       spec.feature_dim, dims_string(z.dims())));
  }
  ForwardCache c;
  c.z = widen(z);
  c.fc_out = nn::relu(nn::linear(c.z, p.at("fc.weight"), p.at("fc.bias")))
                 .reshaped({spec.fc_channels, spec.fc_height, spec.fc_width});
  const TensorD* x = &c.fc_out;
  for (std::size_t i = 0; i < spec.deconv_channels.size(); ++i) {
    c.deconv_out.push_back(
        nn::relu(nn::conv_transpose2d(*x, p.at(deconv_name(i, "weight")), p.at(deconv_name(i, "bias")), kDeconv)));
    x = &c.deconv_out.back();
  }
  c.image_chw = nn::sigmoid(nn::conv2d(*x, p.at("out.weight"), p.at("out.bias"), kPointwise));
  return c;
}

// Loss of one sample and its gradient with respect to the image (HWC).
double residual_loss(const TensorD& out, const ImageRGB& x, ReconLossMode mode, TensorD* grad) {
  const std::size_t n = out.size();
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = out[i] - double(x[i]);
    ss += d * d;
  }
  const double loss = mode == ReconLossMode::kMeanSquared ? ss / double(n) : std::sqrt(ss);
  if (grad) {
    *grad = TensorD(out.dims());
    const double norm = std::sqrt(ss);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = out[i] - double(x[i]);
      double g = 0.0;
      if (mode == ReconLossMode::kMeanSquared) {
        g = 2.0 * d / double(n);
      } else if (norm > 0.0) {
        g = d / norm;
      }
      (*grad)[i] = g;
    }
  }
  return loss;
}

void backward(const ReconParams& p, const ReconSpec& spec, const ForwardCache& c, const TensorD& grad_image_hwc,
              nn::ParamMap& grads) {
  TensorD g = nn::sigmoid_backward(c.image_chw, nn::hwc_to_chw(grad_image_hwc));
  const TensorD& last = c.deconv_out.empty() ? c.fc_out : c.deconv_out.back();
  TensorD gin;
  nn::conv2d_backward(last, p.at("out.weight"), g, kPointwise, &gin, grads.at("out.weight"), grads.at("out.bias"));
  g = std::move(gin);
  for (std::size_t i = spec.deconv_channels.size(); i-- > 0;) {
    g = nn::relu_backward(c.deconv_out[i], g);
    const TensorD& in = i == 0 ? c.fc_out : c.deconv_out[i - 1];
    nn::conv_transpose2d_backward(in, p.at(deconv_name(i, "weight")), g, kDeconv, &gin,
                                  grads.at(deconv_name(i, "weight")), grads.at(deconv_name(i, "bias")));
    g = std::move(gin);
  }
  g = nn::relu_backward(c.fc_out, g);
  nn::linear_backward(c.z, p.at("fc.weight"), g.reshaped({g.size()}), nullptr, grads.at("fc.weight"),
                      grads.at("fc.bias"));
}

}  // namespace

void ReconSpec::validate() const {
  if (feature_dim == 0 || fc_channels == 0 || fc_height == 0 || fc_width == 0) {
    throw Error(ErrorCode::kConfig, "recon dims must be >= 1");
  }
  for (auto c : deconv_channels) {
    if (c == 0) throw Error(ErrorCode::kConfig, "deconv channels must be >= 1");
  }
}

ReconSpec ReconSpec::desk_scale() { return ReconSpec{}; }

ReconSpec ReconSpec::paper_scale() {
  ReconSpec s;
  s.feature_dim = 4096;
  s.fc_channels = 512;
  s.fc_height = 7;
  s.fc_width = 7;
  s.deconv_channels = {256, 128, 128, 128};
  return s;
}

ReconParams init_recon(const ReconSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = nn::make_rng(seed, 0x4EC0ULL);
  ReconParams p;
  const std::size_t fc_out = spec.fc_channels * spec.fc_height * spec.fc_width;
  p["fc.weight"] = nn::uniform_init({fc_out, spec.feature_dim}, spec.feature_dim, rng);
  p["fc.bias"] = Tensor({fc_out});
  std::size_t in = spec.fc_channels;
  for (std::size_t i = 0; i < spec.deconv_channels.size(); ++i) {
    const std::size_t out = spec.deconv_channels[i];
    // each output pixel of a stride-2, kernel-4 deconv sees 2x2 taps per input channel
    p[deconv_name(i, "weight")] = nn::uniform_init({in, out, kDeconvKernel, kDeconvKernel}, in * 4, rng);
    p[deconv_name(i, "bias")] = Tensor({out});
    in = out;
  }
  p["out.weight"] = nn::uniform_init({3, in, 1, 1}, in, rng);
  p["out.bias"] = Tensor({3});
  return p;
}

void validate_recon(const ReconParams& params, const ReconSpec& spec) {
  nn::require_same_layout(init_recon(spec, 0), params, "recon params");
  if (!nn::all_finite(params)) throw Error(ErrorCode::kNonFinite, "recon params contain non-finite values");
}

ImageRGB recon_forward(const ReconParams& params, const ReconSpec& spec, const Tensor& z) {
  return narrow(nn::chw_to_hwc(forward(params, spec, z).image_chw));
}

double recon_loss(const ReconParams& params, const ReconSpec& spec, const Tensor& z, const ImageRGB& x,
                  ReconLossMode mode) {
  require_dims(x, spec.output_dims(), "recon target");
  return residual_loss(nn::chw_to_hwc(forward(params, spec, z).image_chw), x, mode, nullptr);
}

nn::LossAndGrad recon_loss_and_grad(const ReconParams& params, const ReconSpec& spec, std::span<const Tensor> z,
                                    std::span<const ImageRGB> x, ReconLossMode mode) {
  if (z.empty() || z.size() != x.size()) throw Error(ErrorCode::kInvalidArgument, "need matching non-empty (z, x)");
  nn::LossAndGrad out{0.0, nn::zeros_like(params)};
  for (std::size_t i = 0; i < z.size(); ++i) {
    require_dims(x[i], spec.output_dims(), "recon target");
    const auto c = forward(params, spec, z[i]);
    TensorD g;
    out.loss += residual_loss(nn::chw_to_hwc(c.image_chw), x[i], mode, &g);
    backward(params, spec, c, g, out.grads);
  }
  const double inv = 1.0 / double(z.size());
  out.loss *= inv;
  nn::scale(out.grads, inv);
  return out;
}

ReconTrainResult train_recon(std::span<const ReconPair> pairs, const ReconSpec& spec, const ReconTrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "train_recon needs at least one (z, x) pair");
  spec.validate();
  for (const auto& pr : pairs) {
    require_dims(pr.z, {spec.feature_dim}, "recon training feature");
    require_dims(pr.x, spec.output_dims(), "recon training image");
  }

  // Per-dimension std of the training features sets the input noise scale.
  const std::size_t f = spec.feature_dim, n = pairs.size();
  std::vector<float> noise_std(f, 0.0f);
  for (std::size_t k = 0; k < f; ++k) {
    double mean = 0.0, sq = 0.0;
    for (const auto& pr : pairs) mean += pr.z[k];
    mean /= double(n);
    for (const auto& pr : pairs) sq += (pr.z[k] - mean) * (pr.z[k] - mean);
    noise_std[k] = static_cast<float>(cfg.noise_scale * std::sqrt(sq / double(n)));
  }

  ReconTrainResult result{init_recon(spec, cfg.seed), {}, nn::Adam{}};
  nn::BatchSampler sampler(n, cfg.batch_size, cfg.seed);
  const std::size_t total = cfg.epochs * sampler.batches_per_epoch();
  std::vector<Tensor> zb;
  std::vector<ImageRGB> xb;
  for (std::size_t step = 0; step < total; ++step) {
    const auto idx = sampler.next();
    auto rng = nn::make_rng(cfg.seed, 0x7000'0000ULL + step);
    std::normal_distribution<float> eps(0.0f, 1.0f);
    zb.clear();
    xb.clear();
    for (auto i : idx) {
      Tensor z = pairs[i].z;
      for (std::size_t k = 0; k < f; ++k) {
        if (noise_std[k] > 0.0f) z[k] += noise_std[k] * eps(rng);
      }
      zb.push_back(std::move(z));
      xb.push_back(pairs[i].x);
    }
    auto lg = recon_loss_and_grad(result.params, spec, zb, xb, cfg.loss);
    if (!std::isfinite(lg.loss) || !nn::all_finite(lg.grads)) {
      throw nn::TrainingDiverged(fmt::format("recon loss became {} at step {}", lg.loss, step), result.params, step);
    }
    result.loss_history.push_back(lg.loss);
    const double lr = cfg.lr * std::pow(cfg.lr_decay, double(sampler.epoch()));
    result.optimizer.step(result.params, lg.grads, lr);
    if (step % 100 == 0) spdlog::debug("recon step {} loss {:.6f} lr {:.3g}", step, lg.loss, lr);
  }
  return result;
}

json to_json(const ReconSpec& spec) {
  return {{"feature_dim", spec.feature_dim},
          {"fc_shape", {spec.fc_channels, spec.fc_height, spec.fc_width}},
          {"deconv_channels", spec.deconv_channels}};
}

ReconSpec recon_spec_from_json(const json& j) {
  ReconSpec s;
  s.feature_dim = j.at("feature_dim").get<std::size_t>();
  const auto shape = j.at("fc_shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3) throw Error(ErrorCode::kConfig, "fc_shape must be [C0, H0, W0]");
  s.fc_channels = shape[0];
  s.fc_height = shape[1];
  s.fc_width = shape[2];
  s.deconv_channels = j.at("deconv_channels").get<std::vector<std::size_t>>();
  s.validate();
  return s;
}

void save_recon(const fs::path& dir, const ReconParams& params, const ReconSpec& spec, const nn::Adam* optimizer) {
  json meta = {{"kind", "recon"}, {"spec", to_json(spec)}, {"step", optimizer ? optimizer->steps() : 0}};
  nn::save_checkpoint(dir, params, meta, optimizer);
}

std::pair<ReconParams, ReconSpec> load_recon(const fs::path& dir) {
  auto ck = nn::load_checkpoint(dir);
  auto spec = recon_spec_from_json(ck.meta.at("spec"));
  validate_recon(ck.params, spec);
  return {std::move(ck.params), spec};
}

}  // namespace neurodecode
