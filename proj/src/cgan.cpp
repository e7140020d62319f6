#include "neurodecode/cgan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kKernel = 4;
constexpr nn::Conv kDown{2, 1};
constexpr nn::Conv kUp{2, 1};
constexpr nn::Conv kPatchHead{1, 1};
constexpr double kLeak = 0.2;

std::string name(const char* prefix, std::size_t i, const char* part) { return fmt::format("{}{}.{}", prefix, i, part); }

// --- generator ---------------------------------------------------------------

struct GenCache {
  std::vector<TensorD> enc_in, enc_pre, enc_out;
  std::vector<TensorD> dec_in, dec_out;  // dec_out[0] is unused; see out
  TensorD out;                           // sigmoid output, CHW
};

GenCache gen_forward_cache(const GenParams& G, const GenSpec& spec, const ImageRGB& coarse, const NoiseSample& w) {
  check_image(coarse, "coarse image");
  if (coarse.dim(0) != spec.image_size || coarse.dim(1) != spec.image_size) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("generator expects {0}x{0}x3 input, got {1}", spec.image_size,
                                                       dims_string(coarse.dims())));
  }
  require_dims(w, {spec.image_size, spec.image_size, 1}, "noise sample");
  const std::size_t L = spec.channels.size();
  GenCache c;
  TensorD h = nn::concat_channels(nn::hwc_to_chw(coarse), nn::hwc_to_chw(w));
  for (std::size_t i = 0; i < L; ++i) {
    c.enc_in.push_back(h);
    c.enc_pre.push_back(nn::conv2d(h, G.at(name("enc", i, "weight")), G.at(name("enc", i, "bias")), kDown));
    c.enc_out.push_back(nn::leaky_relu(c.enc_pre.back(), kLeak));
    h = c.enc_out.back();
  }
  c.dec_in.resize(L);
  c.dec_out.resize(L);
  for (std::size_t j = L - 1; j >= 1; --j) {
    c.dec_in[j] = h;
    c.dec_out[j] = nn::relu(nn::conv_transpose2d(h, G.at(name("dec", j, "weight")), G.at(name("dec", j, "bias")), kUp));
    h = nn::concat_channels(c.dec_out[j], c.enc_out[j - 1]);
  }
  c.dec_in[0] = h;
  c.out = nn::sigmoid(nn::conv_transpose2d(h, G.at("dec0.weight"), G.at("dec0.bias"), kUp));
  return c;
}

void gen_backward(const GenParams& G, const GenSpec& spec, const GenCache& c, const TensorD& grad_out_hwc,
                  nn::ParamMap& grads) {
  const std::size_t L = spec.channels.size();
  std::vector<TensorD> g_enc;
  for (const auto& e : c.enc_out) g_enc.emplace_back(e.dims());
  auto add_into = [](TensorD& acc, const TensorD& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  };

  TensorD g = nn::sigmoid_backward(c.out, nn::hwc_to_chw(grad_out_hwc));
  TensorD g_h;
  nn::conv_transpose2d_backward(c.dec_in[0], G.at("dec0.weight"), g, kUp, &g_h, grads.at("dec0.weight"),
                                grads.at("dec0.bias"));
  for (std::size_t j = 1; j < L; ++j) {
    TensorD g_dec, g_skip;
    nn::split_channels(g_h, c.dec_out[j].dim(0), g_dec, g_skip);
    add_into(g_enc[j - 1], g_skip);
    g_dec = nn::relu_backward(c.dec_out[j], g_dec);
    nn::conv_transpose2d_backward(c.dec_in[j], G.at(name("dec", j, "weight")), g_dec, kUp, &g_h,
                                  grads.at(name("dec", j, "weight")), grads.at(name("dec", j, "bias")));
  }
  add_into(g_enc[L - 1], g_h);
  for (std::size_t i = L; i-- > 0;) {
    TensorD gp = nn::leaky_relu_backward(c.enc_pre[i], g_enc[i], kLeak);
    TensorD gin;
    nn::conv2d_backward(c.enc_in[i], G.at(name("enc", i, "weight")), gp, kDown, i > 0 ? &gin : nullptr,
                        grads.at(name("enc", i, "weight")), grads.at(name("enc", i, "bias")));
    if (i > 0) add_into(g_enc[i - 1], gin);
  }
}

// --- discriminator -----------------------------------------------------------

struct DiscCache {
  std::vector<TensorD> conv_in, conv_pre;
  TensorD head_in;
  TensorD probs;  // [1, Hp, Wp]
};

// The candidate stays in double so generator gradients see the exact output.
DiscCache disc_forward_cache(const DiscParams& D, const DiscSpec& spec, const ImageRGB& coarse,
                             const TensorD& candidate) {
  check_image(coarse, "coarse image");
  if (candidate.ndim() != 3 || candidate.dim(2) != 3) {
    throw Error(ErrorCode::kShapeMismatch, "candidate image must be [H,W,3], got " + dims_string(candidate.dims()));
  }
  if (coarse.dims() != candidate.dims() || coarse.dim(0) != spec.image_size || coarse.dim(1) != spec.image_size) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("discriminator expects two {0}x{0}x3 images, got {1} and {2}", spec.image_size,
                            dims_string(coarse.dims()), dims_string(candidate.dims())));
  }
  DiscCache c;
  TensorD h = nn::concat_channels(nn::hwc_to_chw(coarse), nn::hwc_to_chw(candidate));
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    c.conv_in.push_back(h);
    c.conv_pre.push_back(nn::conv2d(h, D.at(name("conv", i, "weight")), D.at(name("conv", i, "bias")), kDown));
    h = nn::leaky_relu(c.conv_pre.back(), kLeak);
  }
  c.head_in = h;
  c.probs = nn::sigmoid(nn::conv2d(h, D.at("head.weight"), D.at("head.bias"), kPatchHead));
  return c;
}

// Backpropagates d(loss)/d(logits); returns d(loss)/d(candidate) in HWC when requested.
TensorD disc_backward(const DiscParams& D, const DiscSpec& spec, const DiscCache& c, const TensorD& grad_logits,
                      nn::ParamMap& grads, bool want_candidate_grad) {
  TensorD g;
  nn::conv2d_backward(c.head_in, D.at("head.weight"), grad_logits, kPatchHead, &g, grads.at("head.weight"),
                      grads.at("head.bias"));
  for (std::size_t i = spec.channels.size(); i-- > 0;) {
    TensorD gp = nn::leaky_relu_backward(c.conv_pre[i], g, kLeak);
    const bool need_in = i > 0 || want_candidate_grad;
    TensorD gin;
    nn::conv2d_backward(c.conv_in[i], D.at(name("conv", i, "weight")), gp, kDown, need_in ? &gin : nullptr,
                        grads.at(name("conv", i, "weight")), grads.at(name("conv", i, "bias")));
    g = std::move(gin);
  }
  if (!want_candidate_grad) return {};
  TensorD g_coarse, g_cand;
  nn::split_channels(g, 3, g_coarse, g_cand);
  return nn::chw_to_hwc(g_cand);
}

double clamp_prob(double p, std::size_t& clamped) {
  if (p < kProbabilityClamp) {
    ++clamped;
    return kProbabilityClamp;
  }
  if (p > 1.0 - kProbabilityClamp) {
    ++clamped;
    return 1.0 - kProbabilityClamp;
  }
  return p;
}

template <class T>
double mean_log(const BasicTensor<T>& p, bool complement, std::size_t& clamped) {
  double s = 0.0;
  for (T v : p.data()) {
    const double q = clamp_prob(v, clamped);
    s += std::log(complement ? 1.0 - q : q);
  }
  return s / double(p.size());
}

struct GenEval {
  double objective = 0.0, l1 = 0.0;
  std::size_t clamped = 0;
  nn::ParamMap grads;
};

GenEval evaluate_generator(const GenParams& G, const GenSpec& gs, const DiscParams& D, const DiscSpec& ds,
                           std::span<const GanSample> batch, GenObjectiveTerms terms) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty GAN batch");
  GenEval ev;
  ev.grads = nn::zeros_like(G);
  nn::ParamMap d_scratch = nn::zeros_like(D);
  for (const auto& s : batch) {
    const GenCache gc = gen_forward_cache(G, gs, s.coarse, s.noise);
    const TensorD x_prime = nn::chw_to_hwc(gc.out);
    if (s.target.dims() != x_prime.dims()) {
      throw Error(ErrorCode::kShapeMismatch, "GAN target: expected " + dims_string(x_prime.dims()) + ", got " +
                                                 dims_string(s.target.dims()));
    }

    TensorD grad_x(x_prime.dims());
    double l1 = 0.0;
    if (terms.l1 != 0.0) {
      const double inv_n = 1.0 / double(x_prime.size());
      for (std::size_t i = 0; i < x_prime.size(); ++i) {
        const double d = x_prime[i] - double(s.target[i]);
        grad_x[i] = terms.l1 * (d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0));
      }
    }
    for (std::size_t i = 0; i < x_prime.size(); ++i) l1 += std::abs(x_prime[i] - double(s.target[i]));
    l1 /= double(x_prime.size());
    double adv = 0.0;
    if (terms.adversarial != 0.0) {
      const DiscCache dc = disc_forward_cache(D, ds, s.coarse, x_prime);
      const TensorD& p = dc.probs;
      const double inv_p = 1.0 / double(p.size());
      TensorD g_logits(p.dims());
      for (std::size_t i = 0; i < p.size(); ++i) {
        // d/da log(1 - sigmoid(a)) = -p ; d/da -log(sigmoid(a)) = -(1 - p)
        const double gi = terms.mode == GenLossMode::kMinimax ? -p[i] : -(1.0 - p[i]);
        g_logits[i] = terms.adversarial * gi * inv_p;
      }
      adv = terms.mode == GenLossMode::kMinimax ? mean_log(p, true, ev.clamped) : -mean_log(p, false, ev.clamped);
      const TensorD g_cand = disc_backward(D, ds, dc, g_logits, d_scratch, true);
      for (std::size_t i = 0; i < grad_x.size(); ++i) grad_x[i] += g_cand[i];
    }
    ev.objective += terms.adversarial * adv + terms.l1 * l1;
    ev.l1 += l1;
    gen_backward(G, gs, gc, grad_x, ev.grads);
  }
  const double inv_b = 1.0 / double(batch.size());
  ev.objective *= inv_b;
  ev.l1 *= inv_b;
  nn::scale(ev.grads, inv_b);
  return ev;
}

struct DiscEval {
  double d_objective = 0.0;
  std::size_t clamped = 0;
  nn::ParamMap grads;
};

DiscEval evaluate_discriminator(const GenParams& G, const GenSpec& gs, const DiscParams& D, const DiscSpec& ds,
                                std::span<const GanSample> batch) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty GAN batch");
  DiscEval ev;
  ev.grads = nn::zeros_like(D);
  for (const auto& s : batch) {
    const TensorD x_prime = nn::chw_to_hwc(gen_forward_cache(G, gs, s.coarse, s.noise).out);
    const DiscCache real = disc_forward_cache(D, ds, s.coarse, widen(s.target));
    const DiscCache fake = disc_forward_cache(D, ds, s.coarse, x_prime);
    const double l_cgan = mean_log(real.probs, false, ev.clamped) + mean_log(fake.probs, true, ev.clamped);
    ev.d_objective += -l_cgan;

    const double inv_p = 1.0 / double(real.probs.size());
    TensorD g_real(real.probs.dims()), g_fake(fake.probs.dims());
    for (std::size_t i = 0; i < g_real.size(); ++i) {
      g_real[i] = -(1.0 - real.probs[i]) * inv_p;
      g_fake[i] = fake.probs[i] * inv_p;
    }
    disc_backward(D, ds, real, g_real, ev.grads, false);
    disc_backward(D, ds, fake, g_fake, ev.grads, false);
  }
  const double inv_b = 1.0 / double(batch.size());
  ev.d_objective *= inv_b;
  nn::scale(ev.grads, inv_b);
  return ev;
}

void check_depth(std::size_t image_size, std::size_t depth, const char* what) {
  if (depth == 0) throw Error(ErrorCode::kConfig, std::string(what) + " needs at least one layer");
  if (image_size == 0 || image_size % (std::size_t{1} << depth) != 0) {
    throw Error(ErrorCode::kConfig, fmt::format("{}: image size {} must be divisible by 2^{}", what, image_size, depth));
  }
}

}  // namespace

// --- specs and init ----------------------------------------------------------

void GenSpec::validate() const {
  check_depth(image_size, channels.size(), "generator");
  for (auto c : channels) {
    if (c == 0) throw Error(ErrorCode::kConfig, "generator channels must be >= 1");
  }
}

GenSpec GenSpec::desk_scale(std::size_t image_size) { return {image_size, {16, 32}}; }
GenSpec GenSpec::paper_scale() { return {128, {64, 128, 256, 512}}; }

void DiscSpec::validate() const {
  check_depth(image_size, channels.size(), "discriminator");
  for (auto c : channels) {
    if (c == 0) throw Error(ErrorCode::kConfig, "discriminator channels must be >= 1");
  }
}

DiscSpec DiscSpec::desk_scale(std::size_t image_size) { return {image_size, {16, 32}}; }
DiscSpec DiscSpec::paper_scale() { return {128, {64, 128, 256}}; }

void GanConfig::validate() const {
  if (!(lambda_l1 >= 0.0) || !(theta_recon >= 0.0)) throw Error(ErrorCode::kConfig, "lambda and theta must be >= 0");
  if (!(lr >= 0.0)) throw Error(ErrorCode::kConfig, "lr must be >= 0");
  if (batch == 0) throw Error(ErrorCode::kConfig, "batch must be >= 1");
}

GenParams init_generator(const GenSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = nn::make_rng(seed, 0x6E4ULL);
  const std::size_t L = spec.channels.size();
  GenParams p;
  std::size_t in = 4;
  for (std::size_t i = 0; i < L; ++i) {
    const std::size_t out = spec.channels[i];
    p[name("enc", i, "weight")] = nn::uniform_init({out, in, kKernel, kKernel}, in * kKernel * kKernel, rng);
    p[name("enc", i, "bias")] = Tensor({out});
    in = out;
  }
  for (std::size_t j = L; j-- > 0;) {
    const std::size_t dec_in = j == L - 1 ? spec.channels[L - 1] : 2 * spec.channels[j];
    const std::size_t dec_out = j == 0 ? 3 : spec.channels[j - 1];
    p[name("dec", j, "weight")] = nn::uniform_init({dec_in, dec_out, kKernel, kKernel}, dec_in * 4, rng);
    p[name("dec", j, "bias")] = Tensor({dec_out});
  }
  return p;
}

DiscParams init_discriminator(const DiscSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = nn::make_rng(seed, 0xD15CULL);
  DiscParams p;
  std::size_t in = 6;
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    const std::size_t out = spec.channels[i];
    p[name("conv", i, "weight")] = nn::uniform_init({out, in, kKernel, kKernel}, in * kKernel * kKernel, rng);
    p[name("conv", i, "bias")] = Tensor({out});
    in = out;
  }
  p["head.weight"] = nn::uniform_init({1, in, 3, 3}, in * 9, rng);
  p["head.bias"] = Tensor({1});
  return p;
}

NoiseSample make_noise(std::size_t size, std::uint64_t seed, std::uint64_t stream) {
  auto rng = nn::make_rng(seed, stream);
  return nn::normal_tensor({size, size, 1}, rng);
}

ImageRGB gen_forward(const GenParams& G, const GenSpec& spec, const ImageRGB& coarse, const NoiseSample& w) {
  return narrow(nn::chw_to_hwc(gen_forward_cache(G, spec, coarse, w).out));
}

Tensor disc_forward(const DiscParams& D, const DiscSpec& spec, const ImageRGB& coarse, const ImageRGB& candidate) {
  check_image(candidate, "candidate image");
  const Tensor p = narrow(disc_forward_cache(D, spec, coarse, widen(candidate)).probs);
  return p.reshaped({p.dim(1), p.dim(2)});
}

GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake, const ImageRGB& target, const ImageRGB& x_prime,
                     double lambda, GenLossMode mode) {
  GanLosses out;
  const double log_real = mean_log(d_real, false, out.clamped);
  const double log_fake_c = mean_log(d_fake, true, out.clamped);
  out.l_cgan = log_real + log_fake_c;
  out.d_objective = -out.l_cgan;
  out.l_l1 = mean_abs_diff(target, x_prime);
  if (mode == GenLossMode::kMinimax) {
    out.g_objective = log_fake_c + lambda * out.l_l1;
  } else {
    std::size_t unused = 0;
    out.g_objective = -mean_log(d_fake, false, unused) + lambda * out.l_l1;
  }
  if (out.clamped) spdlog::warn("gan_losses: clamped {} probabilities at 0 or 1", out.clamped);
  return out;
}

nn::LossAndGrad generator_loss_and_grad(const GenParams& G, const GenSpec& gs, const DiscParams& D,
                                        const DiscSpec& ds, std::span<const GanSample> batch,
                                        GenObjectiveTerms terms) {
  auto ev = evaluate_generator(G, gs, D, ds, batch, terms);
  return {ev.objective, std::move(ev.grads)};
}

nn::LossAndGrad discriminator_loss_and_grad(const GenParams& G, const GenSpec& gs, const DiscParams& D,
                                            const DiscSpec& ds, std::span<const GanSample> batch) {
  auto ev = evaluate_discriminator(G, gs, D, ds, batch);
  return {ev.d_objective, std::move(ev.grads)};
}

// --- training ----------------------------------------------------------------

GanState GanState::init(const GenSpec& gs, const DiscSpec& ds, const GanConfig& cfg) {
  cfg.validate();
  if (gs.image_size != ds.image_size) throw Error(ErrorCode::kConfig, "generator and discriminator sizes differ");
  const nn::AdamOptions opt{cfg.beta1, 0.999, 1e-8};
  return GanState{gs, ds, init_generator(gs, cfg.seed), init_discriminator(ds, cfg.seed), nn::Adam(opt), nn::Adam(opt), 0};
}

GanStepRecord gan_step(GanState& state, std::span<const GanPair> batch, const GanConfig& cfg) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "gan_step needs a non-empty batch");
  std::vector<GanSample> samples;
  samples.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::uint64_t stream = (std::uint64_t(state.step) << 20) | b;
    samples.push_back({batch[b].coarse, batch[b].target, make_noise(state.gen_spec.image_size, cfg.seed, stream)});
  }

  GanStepRecord rec;
  auto d_ev = evaluate_discriminator(state.G, state.gen_spec, state.D, state.disc_spec, samples);
  if (!std::isfinite(d_ev.d_objective) || !nn::all_finite(d_ev.grads)) {
    throw nn::TrainingDiverged(fmt::format("discriminator objective {} at step {}", d_ev.d_objective, state.step),
                               state.D, state.step);
  }
  rec.d_objective = d_ev.d_objective;
  rec.l_cgan = -d_ev.d_objective;
  state.d_opt.step(state.D, d_ev.grads, cfg.lr);

  auto g_ev = evaluate_generator(state.G, state.gen_spec, state.D, state.disc_spec, samples,
                                 {1.0, cfg.lambda_l1, cfg.mode});
  if (!std::isfinite(g_ev.objective) || !nn::all_finite(g_ev.grads)) {
    throw nn::TrainingDiverged(fmt::format("generator objective {} at step {}", g_ev.objective, state.step), state.G,
                               state.step);
  }
  rec.g_objective = g_ev.objective;
  rec.l_l1 = g_ev.l1;
  rec.clamped = d_ev.clamped + g_ev.clamped;
  state.g_opt.step(state.G, g_ev.grads, cfg.lr);
  ++state.step;
  return rec;
}

GanTrainResult train_gan(std::span<const GanPair> pairs, const GenSpec& gs, const DiscSpec& ds, const GanConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "train_gan needs at least one pair");
  const int category = pairs.front().category;
  for (const auto& p : pairs) {
    if (p.category != category) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("train_gan got mixed categories {} and {}; train one model per category", category,
                              p.category));
    }
  }
  GanState state = GanState::init(gs, ds, cfg);
  GanTrainResult result;
  nn::BatchSampler sampler(pairs.size(), cfg.batch, cfg.seed);
  const std::size_t total = cfg.epochs * sampler.batches_per_epoch();
  std::vector<GanPair> batch;
  for (std::size_t s = 0; s < total; ++s) {
    batch.clear();
    for (auto i : sampler.next()) batch.push_back(pairs[i]);
    result.history.push_back(gan_step(state, batch, cfg));
    if (s % 100 == 0) {
      const auto& r = result.history.back();
      spdlog::debug("gan[{}] step {} d_obj {:.4f} g_obj {:.4f} l1 {:.4f}", category, s, r.d_objective, r.g_objective,
                    r.l_l1);
    }
  }
  result.model = GanModel{gs, ds, std::move(state.G), std::move(state.D), cfg};
  return result;
}

// --- persistence -------------------------------------------------------------

namespace {

json spec_json(std::size_t size, const std::vector<std::size_t>& channels) {
  return {{"image_size", size}, {"channels", channels}};
}

}  // namespace

json to_json(const GanConfig& cfg) {
  return {{"lambda_l1", cfg.lambda_l1},
          {"theta_recon", cfg.theta_recon},
          {"lr", cfg.lr},
          {"batch", cfg.batch},
          {"epochs", cfg.epochs},
          {"mode", cfg.mode == GenLossMode::kMinimax ? "minimax" : "non_saturating"},
          {"beta1", cfg.beta1},
          {"seed", cfg.seed}};
}

GanConfig gan_config_from_json(const json& j) {
  GanConfig c;
  c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
  c.theta_recon = j.value("theta_recon", c.theta_recon);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.epochs = j.value("epochs", c.epochs);
  const auto mode = j.value("mode", std::string("minimax"));
  if (mode == "minimax") {
    c.mode = GenLossMode::kMinimax;
  } else if (mode == "non_saturating") {
    c.mode = GenLossMode::kNonSaturating;
  } else {
    throw Error(ErrorCode::kConfig, "gan mode must be minimax|non_saturating, got " + mode);
  }
  c.beta1 = j.value("beta1", c.beta1);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void save_gan_registry(const GanRegistry& registry, const fs::path& dir) {
  for (const auto& [category, m] : registry) {
    const fs::path cat_dir = dir / std::to_string(category);
    nn::save_checkpoint(cat_dir / "generator", m.G,
                        {{"kind", "generator"}, {"spec", spec_json(m.gen_spec.image_size, m.gen_spec.channels)}});
    nn::save_checkpoint(cat_dir / "discriminator", m.D,
                        {{"kind", "discriminator"}, {"spec", spec_json(m.disc_spec.image_size, m.disc_spec.channels)}});
    json cfg = to_json(m.config);
    cfg["category"] = category;
    cfg["objective_note"] =
        "generator minimizes adversarial + lambda*L1; theta weights the reconstruction-network loss and is only "
        "used by a joint fine-tune (staged training keeps the reconstruction network frozen)";
    std::ofstream out(cat_dir / "gan_config.json", std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (cat_dir / "gan_config.json").string());
    out << cfg.dump(2) << '\n';
  }
}

GanRegistry load_gan_registry(const fs::path& dir) {
  GanRegistry reg;
  if (!fs::is_directory(dir)) return reg;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const auto stem = entry.path().filename().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    const int category = std::stoi(stem);
    std::ifstream in(entry.path() / "gan_config.json");
    if (!in) throw Error(ErrorCode::kIo, "missing gan_config.json in " + entry.path().string());
    GanModel m;
    m.config = gan_config_from_json(json::parse(in));
    auto g = nn::load_checkpoint(entry.path() / "generator");
    auto d = nn::load_checkpoint(entry.path() / "discriminator");
    m.gen_spec = {g.meta.at("spec").at("image_size").get<std::size_t>(),
                  g.meta.at("spec").at("channels").get<std::vector<std::size_t>>()};
    m.disc_spec = {d.meta.at("spec").at("image_size").get<std::size_t>(),
                   d.meta.at("spec").at("channels").get<std::vector<std::size_t>>()};
    nn::require_same_layout(init_generator(m.gen_spec, 0), g.params, "generator");
    nn::require_same_layout(init_discriminator(m.disc_spec, 0), d.params, "discriminator");
    m.G = std::move(g.params);
    m.D = std::move(d.params);
    reg.emplace(category, std::move(m));
  }
  return reg;
}

}  // namespace neurodecode
