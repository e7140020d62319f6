#include "neurodecode/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string conv_name(std::size_t i, const char* part) { return fmt::format("conv{}.{}", i, part); }
std::string fc_name(std::size_t i, const char* part) { return fmt::format("fc{}.{}", i, part); }

nn::Conv conv_geometry(const ConvLayerSpec& l) { return {l.stride, l.kernel / 2}; }

struct ForwardCache {
  std::vector<TensorD> conv_in, conv_out;
  std::vector<TensorD> fc_in, fc_out;
};

ForwardCache forward(const EncoderParams& p, const EncoderSpec& spec, const ImageRGB& img) {
  check_image(img);
  if (img.dim(0) != spec.input_size || img.dim(1) != spec.input_size) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("encoder expects {0}x{0}x3 input, got {1}",
                                                       spec.input_size, dims_string(img.dims())));
  }
  ForwardCache c;
  TensorD x = nn::hwc_to_chw(img);
  for (std::size_t i = 0; i < spec.conv.size(); ++i) {
    c.conv_in.push_back(x);
    x = nn::relu(nn::conv2d(x, p.at(conv_name(i, "weight")), p.at(conv_name(i, "bias")), conv_geometry(spec.conv[i])));
    c.conv_out.push_back(x);
  }
  for (std::size_t i = 0; i < spec.fc.size(); ++i) {
    c.fc_in.push_back(x);
    x = nn::linear(x, p.at(fc_name(i, "weight")), p.at(fc_name(i, "bias")));
    if (i + 1 < spec.fc.size()) x = nn::relu(x);
    c.fc_out.push_back(x);
  }
  return c;
}

void backward(const EncoderParams& p, const EncoderSpec& spec, const ForwardCache& c, TensorD g,
              nn::ParamMap& grads) {
  for (std::size_t i = spec.fc.size(); i-- > 0;) {
    if (i + 1 < spec.fc.size()) g = nn::relu_backward(c.fc_out[i], g);
    TensorD gin;
    nn::linear_backward(c.fc_in[i], p.at(fc_name(i, "weight")), g, &gin, grads.at(fc_name(i, "weight")),
                        grads.at(fc_name(i, "bias")));
    g = std::move(gin);
  }
  for (std::size_t i = spec.conv.size(); i-- > 0;) {
    g = nn::relu_backward(c.conv_out[i], g.reshaped(c.conv_out[i].dims()));
    TensorD gin;
    nn::conv2d_backward(c.conv_in[i], p.at(conv_name(i, "weight")), g, conv_geometry(spec.conv[i]),
                        i > 0 ? &gin : nullptr, grads.at(conv_name(i, "weight")), grads.at(conv_name(i, "bias")));
    g = std::move(gin);
  }
}

}  // namespace

std::size_t EncoderSpec::conv_output_size() const {
  std::size_t s = input_size;
  for (const auto& l : conv) s = nn::conv_out_size(s, l.kernel, conv_geometry(l));
  return s;
}

std::size_t EncoderSpec::conv_output_channels() const { return conv.empty() ? 3 : conv.back().channels; }

void EncoderSpec::validate() const {
  if (input_size == 0) throw Error(ErrorCode::kConfig, "encoder input_size must be >= 1");
  if (fc.size() < 2) throw Error(ErrorCode::kConfig, "encoder needs at least two fully connected layers [F, K]");
  for (const auto& l : conv) {
    if (l.channels == 0 || l.kernel == 0 || l.stride == 0) throw Error(ErrorCode::kConfig, "bad conv layer");
  }
  for (auto w : fc) {
    if (w == 0) throw Error(ErrorCode::kConfig, "fully connected widths must be >= 1");
  }
  if (num_classes() < 2) throw Error(ErrorCode::kConfig, "encoder needs >= 2 classes");
  (void)conv_output_size();
}

EncoderSpec EncoderSpec::desk_scale(std::size_t num_classes) {
  EncoderSpec s;
  s.fc = {64, num_classes};
  return s;
}

EncoderSpec EncoderSpec::paper_scale(std::size_t num_classes) {
  EncoderSpec s;
  s.input_size = 224;
  s.conv = {{64, 3, 2}, {128, 3, 2}, {256, 3, 2}, {512, 3, 2}, {512, 3, 2}};
  s.fc = {4096, 4096, num_classes};
  return s;
}

EncoderParams init_encoder(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = nn::make_rng(seed, 0xE1C0DEULL);
  EncoderParams p;
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < spec.conv.size(); ++i) {
    const auto& l = spec.conv[i];
    p[conv_name(i, "weight")] = nn::uniform_init({l.channels, in_ch, l.kernel, l.kernel}, in_ch * l.kernel * l.kernel, rng);
    p[conv_name(i, "bias")] = Tensor({l.channels});
    in_ch = l.channels;
  }
  const std::size_t side = spec.conv_output_size();
  std::size_t in = spec.conv_output_channels() * side * side;
  for (std::size_t i = 0; i < spec.fc.size(); ++i) {
    p[fc_name(i, "weight")] = nn::uniform_init({spec.fc[i], in}, in, rng);
    p[fc_name(i, "bias")] = Tensor({spec.fc[i]});
    in = spec.fc[i];
  }
  return p;
}

void validate_encoder(const EncoderParams& params, const EncoderSpec& spec) {
  nn::require_same_layout(init_encoder(spec, 0), params, "encoder params");
}

int EncoderOutput::predicted() const {
  const auto v = logits.values();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

EncoderOutput encode(const EncoderParams& params, const EncoderSpec& spec, const ImageRGB& img) {
  const auto c = forward(params, spec, img);
  Tensor z = narrow(c.fc_out.front());
  // logits come from the stored (float) features so encoder_head reproduces them
  Tensor logits = encoder_head(params, spec, z);
  return {std::move(z), std::move(logits)};
}

Tensor encoder_head(const EncoderParams& params, const EncoderSpec& spec, const Tensor& z) {
  require_dims(z, {spec.feature_dim()}, "feature tap");
  TensorD x = widen(z);
  for (std::size_t i = 1; i < spec.fc.size(); ++i) {
    x = nn::linear(x, params.at(fc_name(i, "weight")), params.at(fc_name(i, "bias")));
    if (i + 1 < spec.fc.size()) x = nn::relu(x);
  }
  return narrow(x);
}

nn::LossAndGrad encoder_loss_and_grad(const EncoderParams& params, const EncoderSpec& spec,
                                  std::span<const ImageRGB> images, std::span<const int> labels) {
  if (images.empty() || images.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "need a non-empty batch with one label per image");
  }
  nn::LossAndGrad out{0.0, nn::zeros_like(params)};
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto c = forward(params, spec, images[n]);
    const TensorD& logits = c.fc_out.back();
    const auto y = static_cast<std::size_t>(labels[n]);
    if (labels[n] < 0 || y >= logits.size()) throw Error(ErrorCode::kCategoryOutOfRange, "label out of range");
    double mx = logits[0];
    for (double v : logits.data()) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits.data()) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    out.loss += log_z - logits[y];
    TensorD g(logits.dims());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::exp(logits[k] - log_z);
    g[y] -= 1.0;
    backward(params, spec, c, std::move(g), out.grads);
  }
  const double inv = 1.0 / double(images.size());
  out.loss *= inv;
  nn::scale(out.grads, inv);
  return out;
}

EncoderTrainResult train_encoder(std::span<const ImageRGB> images, std::span<const int> labels,
                                 const EncoderSpec& spec, const EncoderTrainConfig& cfg) {
  spec.validate();
  if (images.size() != labels.size() || images.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need one label per training image");
  }
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw Error(ErrorCode::kInvalidArgument, "encoder training needs >= 2 categories");
  if (static_cast<std::size_t>(*distinct.rbegin()) >= spec.num_classes()) {
    throw Error(ErrorCode::kCategoryOutOfRange, "label exceeds the encoder's class count");
  }

  EncoderTrainResult result{init_encoder(spec, cfg.seed), {}};
  nn::Adam adam;
  nn::BatchSampler sampler(images.size(), cfg.batch_size, cfg.seed);
  std::vector<ImageRGB> batch_x;
  std::vector<int> batch_y;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch_x.clear();
    batch_y.clear();
    for (auto i : sampler.next()) {
      batch_x.push_back(images[i]);
      batch_y.push_back(labels[i]);
    }
    auto lg = encoder_loss_and_grad(result.params, spec, batch_x, batch_y);
    if (!std::isfinite(lg.loss)) {
      throw Error(ErrorCode::kNonFinite, fmt::format("encoder loss became {} at step {}", lg.loss, step));
    }
    result.loss_history.push_back(lg.loss);
    adam.step(result.params, lg.grads, cfg.lr);
    if (step % 50 == 0) spdlog::debug("encoder step {} loss {:.5f}", step, lg.loss);
  }
  return result;
}

std::vector<ImageRGB> load_manifest_images(const DatasetManifest& manifest, std::size_t size) {
  std::vector<ImageRGB> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) out.push_back(resize_bilinear(load_image(r.image), size, size));
  return out;
}

EncoderTrainResult train_encoder(const DatasetManifest& manifest, const EncoderSpec& spec,
                                 const EncoderTrainConfig& cfg) {
  std::vector<ImageRGB> images;
  std::vector<int> labels;
  for (const auto i : manifest.indices(Split::kTrain)) {
    const auto& r = manifest.records[i];
    images.push_back(resize_bilinear(load_image(r.image), spec.input_size, spec.input_size));
    labels.push_back(r.category);
  }
  return train_encoder(images, labels, spec, cfg);
}

double encoder_accuracy(const EncoderParams& params, const EncoderSpec& spec, std::span<const ImageRGB> images,
                        std::span<const int> labels) {
  if (images.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) hits += encode(params, spec, images[i]).predicted() == labels[i];
  return double(hits) / double(images.size());
}

Tensor extract_features(const EncoderParams& params, const EncoderSpec& spec, std::span<const ImageRGB> images) {
  std::vector<Tensor> rows;
  rows.reserve(images.size());
  for (const auto& img : images) rows.push_back(encode(params, spec, img).z);
  return stack_rows(rows);
}

json to_json(const EncoderSpec& spec) {
  json conv = json::array();
  for (const auto& l : spec.conv) conv.push_back({{"channels", l.channels}, {"kernel", l.kernel}, {"stride", l.stride}});
  return {{"input_size", spec.input_size}, {"conv", conv}, {"fc", spec.fc}};
}

EncoderSpec encoder_spec_from_json(const json& j) {
  EncoderSpec s;
  s.input_size = j.at("input_size").get<std::size_t>();
  s.conv.clear();
  for (const auto& l : j.at("conv")) {
    s.conv.push_back({l.at("channels").get<std::size_t>(), l.at("kernel").get<std::size_t>(),
                      l.at("stride").get<std::size_t>()});
  }
  s.fc = j.at("fc").get<std::vector<std::size_t>>();
  s.validate();
  return s;
}

void save_encoder(const fs::path& dir, const EncoderParams& params, const EncoderSpec& spec) {
  nn::save_checkpoint(dir, params, {{"kind", "encoder"}, {"spec", to_json(spec)}});
}

std::pair<EncoderParams, EncoderSpec> load_encoder(const fs::path& dir) {
  auto ck = nn::load_checkpoint(dir);
  auto spec = encoder_spec_from_json(ck.meta.at("spec"));
  validate_encoder(ck.params, spec);
  return {std::move(ck.params), spec};
}

}  // namespace neurodecode
