#include "neurodecode/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "neurodecode/config.hpp"
#include "neurodecode/pipeline.hpp"

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;

void init_logging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("neurodecode"));
    done = true;
  }
  const char* env = std::getenv("NEURODECODE_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

namespace {

constexpr std::uint64_t kVoxelNoiseStream = 0x0F0F'5EEDULL;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<int> category;
  bool deterministic = false;
};

struct Stage {
  std::string name;
  RunConfig cfg;
  fs::path out;
  Overrides ov;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

fs::path manifest_path(const Stage& s) { return s.out / "manifest.json"; }

DatasetManifest load_run_manifest(const Stage& s) {
  return load_manifest(manifest_path(s), s.cfg.synth.num_categories);
}

// Trains the encoder on the train split, then writes feature and simulated
// voxel files for every record.
json encode_dataset(const Stage& s, const DatasetManifest& manifest) {
  const EncoderSpec spec = s.cfg.encoder_spec();
  const auto images = load_manifest_images(manifest, spec.input_size);
  std::vector<ImageRGB> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    (r.split == Split::kTrain ? train_x : test_x).push_back(images[i]);
    (r.split == Split::kTrain ? train_y : test_y).push_back(r.category);
  }
  const auto trained = train_encoder(train_x, train_y, spec, s.cfg.encoder_train_config(train_x.size()));
  save_encoder(s.out / "encoder", trained.params, spec);

  const Tensor Z = extract_features(trained.params, spec, images);
  const fs::path fm_dir = s.out / "forward_model";
  const VoxelForwardModel fm = fs::exists(fm_dir / "index.json") ? load_forward_model(fm_dir)
                                                                 : make_forward_model(s.cfg.synth);
  save_forward_model(fm, fm_dir);
  const Tensor X = simulate_voxels(Z, fm, s.cfg.seed ^ kVoxelNoiseStream);
  attach_features_and_voxels(manifest, Z, X, s.out);

  json m;
  m["steps"] = trained.loss_history.size();
  m["final_loss"] = trained.loss_history.empty() ? 0.0 : trained.loss_history.back();
  m["train_accuracy"] = encoder_accuracy(trained.params, spec, train_x, train_y);
  m["test_accuracy"] = test_x.empty() ? 0.0 : encoder_accuracy(trained.params, spec, test_x, test_y);
  m["feature_dim"] = spec.feature_dim();
  return m;
}

int stage_synth(Stage& s) {
  const DatasetManifest manifest = gen_toy_dataset(s.cfg.synth, s.out);
  json m;
  m["records"] = manifest.records.size();
  m["train"] = manifest.count(Split::kTrain);
  m["test"] = manifest.count(Split::kTest);
  m["categories"] = s.cfg.synth.num_categories;
  m["encoder"] = encode_dataset(s, manifest);
  write_json(s.out / "synth_metrics.json", m);
  spdlog::info("synth: {} images ({} train / {} test) in {}", manifest.records.size(), manifest.count(Split::kTrain),
               manifest.count(Split::kTest), s.out.string());
  return 0;
}

int stage_train_encoder(Stage& s) {
  const DatasetManifest manifest = load_run_manifest(s);
  const json m = encode_dataset(s, manifest);
  write_json(s.out / "encoder_metrics.json", m);
  spdlog::info("train-encoder: train accuracy {:.3f}", m["train_accuracy"].get<double>());
  return 0;
}

std::vector<double> alpha_grid(const Stage& s) {
  std::vector<double> alphas = s.cfg.decoder.alphas;
  if (std::find(alphas.begin(), alphas.end(), s.cfg.decoder.alpha) == alphas.end()) {
    alphas.push_back(s.cfg.decoder.alpha);
  }
  return alphas;
}

int stage_fit_decoder(Stage& s) {
  const DatasetManifest manifest = load_run_manifest(s);
  const DecodingData data = load_decoding_data(manifest);
  RidgeOptions opts;
  opts.standardize = s.cfg.decoder.standardize;
  const auto alphas = alpha_grid(s);
  const DecodingReport report = evaluate_decoding(data, alphas, opts);

  const RidgeModel model = fit_ridge(data.X_train, data.Z_train, s.cfg.decoder.alpha, opts);
  save_ridge(model, s.out / "decoder");
  const auto chosen = regression_metrics(data.Z_test, predict_features(model, data.X_test));

  const RidgeModel classifier =
      fit_voxel_classifier(data.X_train, data.train_categories, s.cfg.synth.num_categories, s.cfg.decoder.classifier_alpha);
  save_ridge(classifier, s.out / "classifier");
  const auto predicted = classify_voxels(classifier, data.X_test);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == data.test_categories[i];

  json m;
  m["decoding"] = to_json(report);
  m["alpha"] = s.cfg.decoder.alpha;
  m["test"] = {{"r_squared", chosen.r_squared}, {"rmse", chosen.rmse}};
  m["classifier_test_accuracy"] = double(hits) / double(predicted.size());
  write_json(s.out / "decoder_metrics.json", m);
  spdlog::info("fit-decoder: alpha {} held-out R^2 {:.4f} RMSE {:.4f}", s.cfg.decoder.alpha, chosen.r_squared,
               chosen.rmse);
  return 0;
}

std::vector<ReconPair> recon_pairs(const DatasetManifest& manifest, const ReconSpec& spec, Split split) {
  std::vector<ReconPair> pairs;
  for (const auto i : manifest.indices(split)) {
    const auto& r = manifest.records[i];
    if (!r.features) throw Error(ErrorCode::kDanglingPath, fmt::format("record {} has no feature file", i));
    Tensor z = read_tensor(*r.features);
    pairs.push_back({z.reshaped({z.size()}), resize_bilinear(load_image(r.image), spec.output_height(),
                                                              spec.output_width())});
  }
  return pairs;
}

int stage_train_recon(Stage& s) {
  const DatasetManifest manifest = load_run_manifest(s);
  const ReconSpec spec = s.cfg.recon_spec();
  const auto pairs = recon_pairs(manifest, spec, Split::kTrain);
  const ReconTrainConfig tc = s.cfg.recon_train_config();
  ReconTrainResult result;
  try {
    result = train_recon(pairs, spec, tc);
  } catch (const nn::TrainingDiverged& e) {
    save_recon(s.out / "recon_last_good", e.last_good(), spec);
    spdlog::error("recon training diverged at step {}; last good parameters saved to recon_last_good", e.step());
    throw;
  }
  save_recon(s.out / "recon", result.params, spec, &result.optimizer);

  double train_mse = 0.0;
  for (const auto& p : pairs) train_mse += recon_loss(result.params, spec, p.z, p.x, ReconLossMode::kMeanSquared);
  train_mse /= double(pairs.size());
  json m;
  m["steps"] = result.loss_history.size();
  m["initial_loss"] = result.loss_history.empty() ? 0.0 : result.loss_history.front();
  m["final_loss"] = result.loss_history.empty() ? 0.0 : result.loss_history.back();
  m["train_mse"] = train_mse;
  m["output_dims"] = spec.output_dims();
  write_json(s.out / "recon_metrics.json", m);
  spdlog::info("train-recon: {} steps, train MSE {:.5f}", result.loss_history.size(), train_mse);
  return 0;
}

double mean_generator_l1(const GenParams& G, const GenSpec& gs, std::span<const GanPair> pairs, std::uint64_t seed) {
  double l1 = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    l1 += mean_abs_diff(pairs[i].target, gen_forward(G, gs, pairs[i].coarse, make_noise(gs.image_size, seed, i)));
  }
  return l1 / double(pairs.size());
}

int stage_train_gan(Stage& s) {
  const DatasetManifest manifest = load_run_manifest(s);
  const auto [recon, rspec] = load_recon(s.out / "recon");
  const GenSpec gs = s.cfg.gen_spec();
  const DiscSpec ds = s.cfg.disc_spec();
  const GanConfig gc = s.cfg.gan_config();

  std::set<int> categories;
  if (s.ov.category) {
    categories.insert(*s.ov.category);
  } else if (!s.cfg.gan.categories.empty()) {
    categories.insert(s.cfg.gan.categories.begin(), s.cfg.gan.categories.end());
  } else {
    for (auto i : manifest.indices(Split::kTrain)) categories.insert(manifest.records[i].category);
  }

  GanRegistry registry = load_gan_registry(s.out / "gan");
  json m = json::object();
  for (int k : categories) {
    std::vector<GanPair> pairs;
    for (auto i : manifest.indices(Split::kTrain)) {
      const auto& r = manifest.records[i];
      if (r.category != k) continue;
      Tensor z = read_tensor(r.features.value());
      pairs.push_back({resize_bilinear(recon_forward(recon, rspec, z.reshaped({z.size()})), gs.image_size, gs.image_size),
                       resize_bilinear(load_image(r.image), gs.image_size, gs.image_size), k});
    }
    if (pairs.empty()) throw Error(ErrorCode::kUnknownCategory, fmt::format("no training pairs for category {}", k));
    const double before = mean_generator_l1(init_generator(gs, gc.seed), gs, pairs, gc.seed);
    auto result = train_gan(pairs, gs, ds, gc);
    const double after = mean_generator_l1(result.model.G, gs, pairs, gc.seed);
    const auto& last = result.history.empty() ? GanStepRecord{} : result.history.back();
    m[std::to_string(k)] = {{"pairs", pairs.size()},
                            {"steps", result.history.size()},
                            {"initial_l1", before},
                            {"final_l1", after},
                            {"final_l_cgan", last.l_cgan},
                            {"final_g_objective", last.g_objective},
                            {"final_d_objective", last.d_objective}};
    spdlog::info("train-gan: category {} L1 {:.4f} -> {:.4f}", k, before, after);
    registry[k] = std::move(result.model);
  }
  save_gan_registry(registry, s.out / "gan");
  write_json(s.out / "gan_metrics.json", {{"categories", m}});
  return 0;
}

PipelineBundle load_bundle(const Stage& s) {
  PipelineBundle b;
  b.ridge = load_ridge(s.out / "decoder");
  std::tie(b.recon, b.recon_spec) = load_recon(s.out / "recon");
  b.gans = load_gan_registry(s.out / "gan");
  b.gan_image_size = s.cfg.gan.image_size;
  b.fallback_to_coarse = s.cfg.eval.fallback;
  const bool given = s.ov.category || s.cfg.eval.category_source == "given";
  b.category_source = given ? CategorySource::kGiven : CategorySource::kVoxelClassifier;
  if (!given) b.classifier = load_ridge(s.out / "classifier");
  return b;
}

Reconstruction reconstruct_test_split(const Stage& s, const DatasetManifest& manifest, const DecodingData& data) {
  const PipelineBundle bundle = load_bundle(s);
  std::vector<int> cats = data.test_categories;
  if (s.ov.category) std::fill(cats.begin(), cats.end(), *s.ov.category);
  (void)manifest;
  return reconstruct_from_voxels(bundle, data.X_test, std::span<const int>(cats), s.cfg.seed);
}

int stage_reconstruct(Stage& s) {
  const DatasetManifest manifest = load_run_manifest(s);
  const DecodingData data = load_decoding_data(manifest);
  const Reconstruction rec = reconstruct_test_split(s, manifest, data);
  const fs::path dir = s.out / "reconstructions";
  fs::create_directories(dir);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rec.refined.size(); ++i) {
    write_png(rec.refined[i], dir / fmt::format("refined_{:05d}.png", data.test_indices[i]));
    write_png(rec.coarse[i], dir / fmt::format("coarse_{:05d}.png", data.test_indices[i]));
    hits += rec.categories[i] == data.test_categories[i];
  }
  json m;
  m["samples"] = rec.refined.size();
  m["fallbacks"] = rec.fallbacks;
  m["categories"] = rec.categories;
  m["category_accuracy"] = double(hits) / double(rec.refined.size());
  write_json(s.out / "reconstruct_metrics.json", m);
  spdlog::info("reconstruct: wrote {} images to {}", rec.refined.size(), dir.string());
  return 0;
}

int stage_evaluate(Stage& s) {
  const DatasetManifest manifest = load_run_manifest(s);
  const DecodingData data = load_decoding_data(manifest);
  RidgeOptions opts;
  opts.standardize = s.cfg.decoder.standardize;
  const auto alphas = alpha_grid(s);
  const DecodingReport decoding = evaluate_decoding(data, alphas, opts);

  const Reconstruction rec = reconstruct_test_split(s, manifest, data);
  std::vector<ImageRGB> originals;
  for (auto i : data.test_indices) originals.push_back(load_image(manifest.records[i].image));
  const auto full = evaluate_reconstruction(originals, rec.coarse, rec.refined, {});

  const std::size_t g = std::min<std::size_t>(s.cfg.eval.grid_samples, originals.size());
  const auto sub = [g](const std::vector<ImageRGB>& v) { return std::span<const ImageRGB>(v.data(), g); };
  const auto grid = evaluate_reconstruction(sub(originals), sub(rec.coarse), sub(rec.refined), s.out / "grid.png");

  json m;
  m["decoding"] = to_json(decoding);
  m["reconstruction"] = to_json(full);
  m["reconstruction"]["grid"] = "grid.png";
  m["reconstruction"]["grid_dims"] = grid.grid_dims;
  m["reconstruction"]["fallbacks"] = rec.fallbacks;
  write_json(s.out / "eval_report.json", m);
  spdlog::info("evaluate: mean L1 {:.4f}, mean MSE {:.5f}", full.mean_l1, full.mean_mse);
  return 0;
}

void apply_overrides(Stage& s, json& echo_overrides) {
  auto& c = s.cfg;
  if (s.ov.seed) {
    c.seed = *s.ov.seed;
    c.synth.seed = *s.ov.seed;
    echo_overrides["seed"] = *s.ov.seed;
  }
  if (s.ov.deterministic) {
    c.deterministic = true;
    echo_overrides["deterministic"] = true;
  }
  if (s.ov.alpha) {
    c.decoder.alpha = *s.ov.alpha;
    echo_overrides["alpha"] = *s.ov.alpha;
  }
  if (s.ov.epochs) {
    if (s.name == "train-encoder") c.encoder.epochs = *s.ov.epochs;
    if (s.name == "train-recon") c.recon.epochs = *s.ov.epochs;
    if (s.name == "train-gan") c.gan.epochs = *s.ov.epochs;
    echo_overrides["epochs"] = *s.ov.epochs;
  }
  if (s.ov.lr) {
    if (s.name == "train-encoder") c.encoder.lr = *s.ov.lr;
    if (s.name == "train-recon") c.recon.lr = *s.ov.lr;
    if (s.name == "train-gan") c.gan.lr = *s.ov.lr;
    echo_overrides["lr"] = *s.ov.lr;
  }
  if (s.ov.category) echo_overrides["category"] = *s.ov.category;
  c.validate();
}

int run_stage(const std::string& name, const std::string& config_path, const fs::path& out, const Overrides& ov) {
  Stage s{name, RunConfig{}, out, ov};
  if (!config_path.empty()) s.cfg = run_config_from_json(read_json(config_path));
  json overrides = json::object();
  apply_overrides(s, overrides);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + out.string());
  write_json(out / fmt::format("config_echo.{}.json", name),
             {{"stage", name},
              {"config", to_json(s.cfg)},
              {"overrides", overrides},
              {"gan_objective",
               "G minimizes the gan.mode adversarial term + lambda_l1 * L1(target, G(coarse, w)); D ascends "
               "mean log D(coarse, target) + mean log(1 - D(coarse, G(coarse, w))); "
               "theta_recon weights the reconstruction-network loss and is unused while that network stays frozen"}});

  if (name == "synth") return stage_synth(s);
  if (name == "train-encoder") return stage_train_encoder(s);
  if (name == "fit-decoder") return stage_fit_decoder(s);
  if (name == "train-recon") return stage_train_recon(s);
  if (name == "train-gan") return stage_train_gan(s);
  if (name == "reconstruct") return stage_reconstruct(s);
  if (name == "evaluate") return stage_evaluate(s);
  throw Error(ErrorCode::kInvalidArgument, "unknown stage " + name);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  init_logging();
  CLI::App app{"neurodecode: voxel-to-image reconstruction pipeline"};
  app.name("neurodecode");
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  Overrides ov;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, lr;
  std::optional<std::size_t> epochs;
  std::optional<int> category;

  const std::vector<std::pair<const char*, const char*>> stages = {
      {"synth", "Generate the toy dataset, encoder features and simulated voxels"},
      {"train-encoder", "Retrain the encoder and regenerate features and voxels"},
      {"fit-decoder", "Fit the ridge voxel-to-feature decoder and score it"},
      {"train-recon", "Train the feature-to-image reconstruction network"},
      {"train-gan", "Train one conditional GAN per category"},
      {"reconstruct", "Reconstruct test-split images from voxels"},
      {"evaluate", "Decoding metrics, reconstruction metrics and comparison grid"},
  };
  for (const auto& [name, help] : stages) {
    auto* sub = app.add_subcommand(name, help);
    const std::string n = name;
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Run directory for every artifact")->required();
    sub->add_option("--seed", seed, "Global seed override");
    sub->add_flag("--deterministic", ov.deterministic, "Single-threaded numerics");
    if (n == "fit-decoder" || n == "evaluate") sub->add_option("--alpha", alpha, "Ridge regularization strength");
    if (n == "train-encoder" || n == "train-recon" || n == "train-gan") {
      sub->add_option("--epochs", epochs, "Training epochs");
      sub->add_option("--lr", lr, "Learning rate");
    }
    if (n == "train-gan" || n == "reconstruct" || n == "evaluate") {
      sub->add_option("--category", category, "Restrict to / condition on this category id");
    }
  }

  if (args.empty()) {
    std::cerr << app.help();
    return 1;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  ov.seed = seed;
  ov.alpha = alpha;
  ov.epochs = epochs;
  ov.lr = lr;
  ov.category = category;
  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    return run_stage(stage, config_path, out_dir, ov);
  } catch (const std::exception& e) {
    spdlog::error("{} failed: {}", stage, e.what());
    return 2;
  }
}

}  // namespace neurodecode
