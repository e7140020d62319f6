#include "neurodecode/config.hpp"

#include <set>

#include <fmt/format.h>

namespace neurodecode {

using nlohmann::json;

namespace {

// Reads known keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::kConfig, path_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& into) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      into = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, fmt::format("{}.{}: {}", path_, key, e.what()));
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw Error(ErrorCode::kConfig, fmt::format("unknown key '{}' in {}", key, path_));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json conv_json(const std::vector<ConvLayerSpec>& conv) {
  json out = json::array();
  for (const auto& l : conv) out.push_back({{"channels", l.channels}, {"kernel", l.kernel}, {"stride", l.stride}});
  return out;
}

std::vector<ConvLayerSpec> conv_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kConfig, "encoder.conv must be an array");
  std::vector<ConvLayerSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Section s(j[i], fmt::format("encoder.conv[{}]", i));
    ConvLayerSpec l;
    s.read("channels", l.channels);
    s.read("kernel", l.kernel);
    s.read("stride", l.stride);
    s.finish();
    out.push_back(l);
  }
  return out;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "config");
  root.read("seed", c.seed);
  root.read("deterministic", c.deterministic);
  if (const json* s = root.child("synth")) {
    Section sec(*s, "synth");
    sec.read("num_categories", c.synth.num_categories);
    sec.read("samples_per_category", c.synth.samples_per_category);
    sec.read("image_size", c.synth.image_size);
    sec.read("feature_dim", c.synth.feature_dim);
    sec.read("voxel_dim", c.synth.voxel_dim);
    sec.read("voxel_noise", c.synth.voxel_noise);
    sec.finish();
  }
  if (const json* s = root.child("encoder")) {
    Section sec(*s, "encoder");
    std::size_t input_size = 0;
    sec.read("input_size", input_size);
    if (input_size) c.encoder.input_size = input_size;
    if (const json* conv = sec.child("conv")) c.encoder.conv = conv_from_json(*conv);
    sec.read("hidden", c.encoder.hidden);
    sec.read("epochs", c.encoder.epochs);
    sec.read("batch_size", c.encoder.batch_size);
    sec.read("lr", c.encoder.lr);
    sec.finish();
  }
  if (const json* s = root.child("decoder")) {
    Section sec(*s, "decoder");
    sec.read("alpha", c.decoder.alpha);
    sec.read("alphas", c.decoder.alphas);
    sec.read("standardize", c.decoder.standardize);
    sec.read("classifier_alpha", c.decoder.classifier_alpha);
    sec.finish();
  }
  if (const json* s = root.child("recon")) {
    Section sec(*s, "recon");
    std::vector<std::size_t> fc_shape;
    sec.read("fc_shape", fc_shape);
    if (!fc_shape.empty()) {
      if (fc_shape.size() != 3) throw Error(ErrorCode::kConfig, "recon.fc_shape must be [C0, H0, W0]");
      c.recon.fc_channels = fc_shape[0];
      c.recon.fc_height = fc_shape[1];
      c.recon.fc_width = fc_shape[2];
    }
    sec.read("deconv_channels", c.recon.deconv_channels);
    sec.read("epochs", c.recon.epochs);
    sec.read("batch_size", c.recon.batch_size);
    sec.read("lr", c.recon.lr);
    sec.read("lr_decay", c.recon.lr_decay);
    sec.read("noise_scale", c.recon.noise_scale);
    sec.read("loss", c.recon.loss);
    sec.finish();
  }
  if (const json* s = root.child("gan")) {
    Section sec(*s, "gan");
    sec.read("image_size", c.gan.image_size);
    sec.read("gen_channels", c.gan.gen_channels);
    sec.read("disc_channels", c.gan.disc_channels);
    sec.read("lambda_l1", c.gan.lambda_l1);
    sec.read("theta_recon", c.gan.theta_recon);
    sec.read("lr", c.gan.lr);
    sec.read("batch", c.gan.batch);
    sec.read("epochs", c.gan.epochs);
    sec.read("mode", c.gan.mode);
    sec.read("beta1", c.gan.beta1);
    sec.read("categories", c.gan.categories);
    sec.finish();
  }
  if (const json* s = root.child("eval")) {
    Section sec(*s, "eval");
    sec.read("category_source", c.eval.category_source);
    sec.read("fallback", c.eval.fallback);
    sec.read("grid_samples", c.eval.grid_samples);
    sec.finish();
  }
  root.finish();
  c.synth.seed = c.seed;
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"synth",
       {{"num_categories", c.synth.num_categories},
        {"samples_per_category", c.synth.samples_per_category},
        {"image_size", c.synth.image_size},
        {"feature_dim", c.synth.feature_dim},
        {"voxel_dim", c.synth.voxel_dim},
        {"voxel_noise", c.synth.voxel_noise}}},
      {"encoder",
       {{"input_size", c.encoder_spec().input_size},
        {"conv", conv_json(c.encoder.conv)},
        {"hidden", c.encoder.hidden},
        {"epochs", c.encoder.epochs},
        {"batch_size", c.encoder.batch_size},
        {"lr", c.encoder.lr}}},
      {"decoder",
       {{"alpha", c.decoder.alpha},
        {"alphas", c.decoder.alphas},
        {"standardize", c.decoder.standardize},
        {"classifier_alpha", c.decoder.classifier_alpha}}},
      {"recon",
       {{"fc_shape", {c.recon.fc_channels, c.recon.fc_height, c.recon.fc_width}},
        {"deconv_channels", c.recon.deconv_channels},
        {"epochs", c.recon.epochs},
        {"batch_size", c.recon.batch_size},
        {"lr", c.recon.lr},
        {"lr_decay", c.recon.lr_decay},
        {"noise_scale", c.recon.noise_scale},
        {"loss", c.recon.loss}}},
      {"gan",
       {{"image_size", c.gan.image_size},
        {"gen_channels", c.gan.gen_channels},
        {"disc_channels", c.gan.disc_channels},
        {"lambda_l1", c.gan.lambda_l1},
        {"theta_recon", c.gan.theta_recon},
        {"lr", c.gan.lr},
        {"batch", c.gan.batch},
        {"epochs", c.gan.epochs},
        {"mode", c.gan.mode},
        {"beta1", c.gan.beta1},
        {"categories", c.gan.categories}}},
      {"eval",
       {{"category_source", c.eval.category_source},
        {"fallback", c.eval.fallback},
        {"grid_samples", c.eval.grid_samples}}},
  };
}

EncoderSpec RunConfig::encoder_spec() const {
  EncoderSpec s;
  s.input_size = encoder.input_size.value_or(static_cast<std::size_t>(synth.image_size));
  s.conv = encoder.conv;
  s.fc = {static_cast<std::size_t>(synth.feature_dim)};
  s.fc.insert(s.fc.end(), encoder.hidden.begin(), encoder.hidden.end());
  s.fc.push_back(static_cast<std::size_t>(synth.num_categories));
  return s;
}

EncoderTrainConfig RunConfig::encoder_train_config(std::size_t train_samples) const {
  const std::size_t batch = std::max<std::size_t>(1, std::min(encoder.batch_size, train_samples));
  const std::size_t per_epoch = (train_samples + batch - 1) / batch;
  return {encoder.epochs * per_epoch, encoder.batch_size, encoder.lr, seed};
}

ReconSpec RunConfig::recon_spec() const {
  ReconSpec s;
  s.feature_dim = static_cast<std::size_t>(synth.feature_dim);
  s.fc_channels = recon.fc_channels;
  s.fc_height = recon.fc_height;
  s.fc_width = recon.fc_width;
  s.deconv_channels = recon.deconv_channels;
  return s;
}

ReconTrainConfig RunConfig::recon_train_config() const {
  ReconTrainConfig t;
  t.epochs = recon.epochs;
  t.batch_size = recon.batch_size;
  t.lr = recon.lr;
  t.lr_decay = recon.lr_decay;
  t.noise_scale = recon.noise_scale;
  t.loss = recon.loss == "l2" ? ReconLossMode::kL2Norm : ReconLossMode::kMeanSquared;
  t.seed = seed;
  return t;
}

GenSpec RunConfig::gen_spec() const { return {gan.image_size, gan.gen_channels}; }
DiscSpec RunConfig::disc_spec() const { return {gan.image_size, gan.disc_channels}; }

GanConfig RunConfig::gan_config() const {
  GanConfig g;
  g.lambda_l1 = gan.lambda_l1;
  g.theta_recon = gan.theta_recon;
  g.lr = gan.lr;
  g.batch = gan.batch;
  g.epochs = gan.epochs;
  g.mode = gan.mode == "non_saturating" ? GenLossMode::kNonSaturating : GenLossMode::kMinimax;
  g.beta1 = gan.beta1;
  g.seed = seed;
  return g;
}

void RunConfig::validate() const {
  synth.validate();
  encoder_spec().validate();
  recon_spec().validate();
  gen_spec().validate();
  disc_spec().validate();
  gan_config().validate();
  if (recon.loss != "mse" && recon.loss != "l2") throw Error(ErrorCode::kConfig, "recon.loss must be mse|l2");
  if (gan.mode != "minimax" && gan.mode != "non_saturating") {
    throw Error(ErrorCode::kConfig, "gan.mode must be minimax|non_saturating");
  }
  if (eval.category_source != "classifier" && eval.category_source != "given") {
    throw Error(ErrorCode::kConfig, "eval.category_source must be classifier|given");
  }
  if (!(decoder.alpha >= 0.0)) throw Error(ErrorCode::kConfig, "decoder.alpha must be >= 0");
  for (double a : decoder.alphas) {
    if (!(a >= 0.0)) throw Error(ErrorCode::kConfig, "decoder.alphas must be >= 0");
  }
  if (encoder.batch_size == 0 || recon.batch_size == 0) throw Error(ErrorCode::kConfig, "batch sizes must be >= 1");
}

}  // namespace neurodecode
