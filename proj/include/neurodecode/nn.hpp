#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "neurodecode/tensor.hpp"

// Minimal layer kernels with hand-written backward passes. Activations are
// double, laid out channel-first [C,H,W], one sample at a time; parameters
// stay float. Parameter gradients are accumulated (+=) into caller-provided
// tensors so batches can be summed.
namespace neurodecode::nn {

using ParamMap = std::map<std::string, Tensor>;

// Independent stream per (seed, stream) pair.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Centered uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_init(Dims dims, std::size_t fan_in, std::mt19937_64& rng);
Tensor normal_tensor(Dims dims, std::mt19937_64& rng, float stddev = 1.0f);

// Images come in as float [H,W,C]; everything inside a network is double.
TensorD hwc_to_chw(const Tensor& img);
TensorD hwc_to_chw(const TensorD& img);
TensorD chw_to_hwc(const TensorD& t);
TensorD concat_channels(const TensorD& a, const TensorD& b);
// Inverse of concat_channels for gradients: first `channels_a` channels go to `ga`.
void split_channels(const TensorD& g, std::size_t channels_a, TensorD& ga, TensorD& gb);

struct Conv {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_out_size(std::size_t in, std::size_t kernel, Conv c);
std::size_t deconv_out_size(std::size_t in, std::size_t kernel, Conv c);

// in [C,H,W], w [O,C,k,k], b [O] -> [O,Ho,Wo]
TensorD conv2d(const TensorD& in, const Tensor& w, const Tensor& b, Conv c);
void conv2d_backward(const TensorD& in, const Tensor& w, const TensorD& grad_out, Conv c, TensorD* grad_in,
                     Tensor& grad_w, Tensor& grad_b);

// Transposed convolution. in [C,H,W], w [C,O,k,k], b [O] -> [O,Ho,Wo]
TensorD conv_transpose2d(const TensorD& in, const Tensor& w, const Tensor& b, Conv c);
void conv_transpose2d_backward(const TensorD& in, const Tensor& w, const TensorD& grad_out, Conv c,
                               TensorD* grad_in, Tensor& grad_w, Tensor& grad_b);

// Fully connected on the flattened input. w [Out,In], b [Out] -> [Out]
TensorD linear(const TensorD& in, const Tensor& w, const Tensor& b);
void linear_backward(const TensorD& in, const Tensor& w, const TensorD& grad_out, TensorD* grad_in,
                     Tensor& grad_w, Tensor& grad_b);

TensorD relu(const TensorD& x);
TensorD relu_backward(const TensorD& y, const TensorD& grad);
TensorD leaky_relu(const TensorD& x, double slope);
TensorD leaky_relu_backward(const TensorD& x, const TensorD& grad, double slope);
double sigmoid(double x);
TensorD sigmoid(const TensorD& x);
TensorD sigmoid_backward(const TensorD& y, const TensorD& grad);

ParamMap zeros_like(const ParamMap& params);
bool all_finite(const ParamMap& params);
void scale(ParamMap& grads, double factor);
void require_same_layout(const ParamMap& expected, const ParamMap& actual, const char* what);

// Deterministic shuffled mini-batches; reshuffles at each epoch boundary.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed);
  std::vector<std::size_t> next();
  // Number of completed passes over the data.
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batches_per_epoch() const noexcept { return (n_ + batch_ - 1) / batch_; }

 private:
  void reshuffle();

  std::size_t n_, batch_, pos_ = 0, epoch_ = 0;
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamMap grads;
};

// Raised when a training loss turns non-finite; carries the parameters from
// the last step whose loss was finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, ParamMap last_good, std::size_t step)
      : Error(ErrorCode::kNonFinite, what), last_good_(std::move(last_good)), step_(step) {}
  const ParamMap& last_good() const noexcept { return last_good_; }
  std::size_t step() const noexcept { return step_; }

 private:
  ParamMap last_good_;
  std::size_t step_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(ParamMap& params, const ParamMap& grads, double lr);

  std::int64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }
  const ParamMap& first_moment() const noexcept { return m_; }
  const ParamMap& second_moment() const noexcept { return v_; }
  void restore(ParamMap m, ParamMap v, std::int64_t t);

 private:
  AdamOptions options_;
  ParamMap m_, v_;
  std::int64_t t_ = 0;
};

// One DCTF file per tensor plus index.json {tensors: {name: {file, shape}}, meta}.
void save_checkpoint(const std::filesystem::path& dir, const ParamMap& params,
                     const nlohmann::json& meta = nlohmann::json::object(),
                     const Adam* optimizer = nullptr);

struct Checkpoint {
  ParamMap params;
  nlohmann::json meta;
  std::optional<Adam> optimizer;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace neurodecode::nn
