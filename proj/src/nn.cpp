#include "neurodecode/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <fstream>

#include "neurodecode/tensor_io.hpp"

namespace neurodecode::nn {

namespace fs = std::filesystem;
using nlohmann::json;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Tensor uniform_init(Dims dims, std::size_t fan_in, std::mt19937_64& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<float> dist(-bound, bound);
  Tensor t(std::move(dims));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor normal_tensor(Dims dims, std::mt19937_64& rng, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Tensor t(std::move(dims));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

namespace {
template <class T>
TensorD to_chw(const BasicTensor<T>& img) {
  if (img.ndim() != 3) throw Error(ErrorCode::kShapeMismatch, "hwc_to_chw expects rank 3");
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  TensorD out({c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(k * h + y) * w + x] = img[(y * w + x) * c + k];
  return out;
}
}  // namespace

TensorD hwc_to_chw(const Tensor& img) { return to_chw(img); }
TensorD hwc_to_chw(const TensorD& img) { return to_chw(img); }

TensorD chw_to_hwc(const TensorD& t) {
  if (t.ndim() != 3) throw Error(ErrorCode::kShapeMismatch, "chw_to_hwc expects rank 3");
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  TensorD out({h, w, c});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(y * w + x) * c + k] = t[(k * h + y) * w + x];
  return out;
}

TensorD concat_channels(const TensorD& a, const TensorD& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch,
                "concat_channels: " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
  }
  std::vector<double> data(a.values());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return TensorD({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(data));
}

void split_channels(const TensorD& g, std::size_t channels_a, TensorD& ga, TensorD& gb) {
  const std::size_t plane = g.dim(1) * g.dim(2);
  const auto mid = g.values().begin() + static_cast<std::ptrdiff_t>(channels_a * plane);
  ga = TensorD({channels_a, g.dim(1), g.dim(2)}, std::vector<double>(g.values().begin(), mid));
  gb = TensorD({g.dim(0) - channels_a, g.dim(1), g.dim(2)}, std::vector<double>(mid, g.values().end()));
}

std::size_t conv_out_size(std::size_t in, std::size_t kernel, Conv c) {
  if (in + 2 * c.pad < kernel) throw Error(ErrorCode::kShapeMismatch, "input smaller than kernel");
  return (in + 2 * c.pad - kernel) / c.stride + 1;
}

std::size_t deconv_out_size(std::size_t in, std::size_t kernel, Conv c) {
  return (in - 1) * c.stride + kernel - 2 * c.pad;
}

namespace {

void check_conv_args(const TensorD& in, const Tensor& w, const Tensor& b, std::size_t in_axis,
                     std::size_t out_axis, const char* what) {
  if (in.ndim() != 3 || w.ndim() != 4 || w.dim(2) != w.dim(3) || in.dim(0) != w.dim(in_axis) ||
      b.ndim() != 1 || b.dim(0) != w.dim(out_axis)) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": input " + dims_string(in.dims()) +
                                               " weight " + dims_string(w.dims()) + " bias " +
                                               dims_string(b.dims()));
  }
}

void accumulate(Tensor& dst, const std::vector<double>& src) {
  for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<float>(double(dst[j]) + src[j]);
}

}  // namespace

TensorD conv2d(const TensorD& in, const Tensor& w, const Tensor& b, Conv c) {
  check_conv_args(in, w, b, 1, 0, "conv2d");
  const std::size_t ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t co = w.dim(0), k = w.dim(2);
  const std::size_t ho = conv_out_size(h, k, c), wo = conv_out_size(wd, k, c);
  TensorD out({co, ho, wo});
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = b[o];
        for (std::size_t i = 0; i < ci; ++i) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) - static_cast<std::ptrdiff_t>(c.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* in_row = in.raw() + (i * h + static_cast<std::size_t>(iy)) * wd;
            const float* w_row = w.raw() + ((o * ci + i) * k + ky) * k;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) - static_cast<std::ptrdiff_t>(c.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
              acc += in_row[ix] * double(w_row[kx]);
            }
          }
        }
        out[(o * ho + oy) * wo + ox] = acc;
      }
    }
  }
  return out;
}

void conv2d_backward(const TensorD& in, const Tensor& w, const TensorD& grad_out, Conv c, TensorD* grad_in,
                     Tensor& grad_w, Tensor& grad_b) {
  const std::size_t ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t co = w.dim(0), k = w.dim(2);
  const std::size_t ho = grad_out.dim(1), wo = grad_out.dim(2);
  std::vector<double> gw(w.size(), 0.0), gb(co, 0.0);
  if (grad_in) *grad_in = TensorD(in.dims());
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const double g = grad_out[(o * ho + oy) * wo + ox];
        if (g == 0.0) continue;
        gb[o] += g;
        for (std::size_t i = 0; i < ci; ++i) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) - static_cast<std::ptrdiff_t>(c.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const std::size_t in_off = (i * h + static_cast<std::size_t>(iy)) * wd;
            const std::size_t w_off = ((o * ci + i) * k + ky) * k;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) - static_cast<std::ptrdiff_t>(c.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
              gw[w_off + kx] += g * in[in_off + static_cast<std::size_t>(ix)];
              if (grad_in) (*grad_in)[in_off + static_cast<std::size_t>(ix)] += g * double(w[w_off + kx]);
            }
          }
        }
      }
    }
  }
  accumulate(grad_w, gw);
  accumulate(grad_b, gb);
}

TensorD conv_transpose2d(const TensorD& in, const Tensor& w, const Tensor& b, Conv c) {
  check_conv_args(in, w, b, 0, 1, "conv_transpose2d");
  const std::size_t ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t co = w.dim(1), k = w.dim(2);
  const std::size_t ho = deconv_out_size(h, k, c), wo = deconv_out_size(wd, k, c);
  TensorD out({co, ho, wo});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t j = 0; j < ho * wo; ++j) out[o * ho * wo + j] = b[o];
  for (std::size_t i = 0; i < ci; ++i) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < wd; ++x) {
        const double v = in[(i * h + y) * wd + x];
        if (v == 0.0) continue;
        for (std::size_t o = 0; o < co; ++o) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto oy = static_cast<std::ptrdiff_t>(y * c.stride + ky) - static_cast<std::ptrdiff_t>(c.pad);
            if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(ho)) continue;
            const float* w_row = w.raw() + ((i * co + o) * k + ky) * k;
            double* out_row = out.raw() + (o * ho + static_cast<std::size_t>(oy)) * wo;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ox = static_cast<std::ptrdiff_t>(x * c.stride + kx) - static_cast<std::ptrdiff_t>(c.pad);
              if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(wo)) continue;
              out_row[ox] += v * double(w_row[kx]);
            }
          }
        }
      }
    }
  }
  return out;
}

void conv_transpose2d_backward(const TensorD& in, const Tensor& w, const TensorD& grad_out, Conv c,
                               TensorD* grad_in, Tensor& grad_w, Tensor& grad_b) {
  const std::size_t ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t co = w.dim(1), k = w.dim(2);
  const std::size_t ho = grad_out.dim(1), wo = grad_out.dim(2);
  std::vector<double> gb(co, 0.0);
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t j = 0; j < ho * wo; ++j) gb[o] += grad_out[o * ho * wo + j];
  }
  std::vector<double> gw(w.size(), 0.0);
  if (grad_in) *grad_in = TensorD(in.dims());
  for (std::size_t i = 0; i < ci; ++i) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < wd; ++x) {
        const double v = in[(i * h + y) * wd + x];
        double gi = 0.0;
        for (std::size_t o = 0; o < co; ++o) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto oy = static_cast<std::ptrdiff_t>(y * c.stride + ky) - static_cast<std::ptrdiff_t>(c.pad);
            if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(ho)) continue;
            const std::size_t w_off = ((i * co + o) * k + ky) * k;
            const double* g_row = grad_out.raw() + (o * ho + static_cast<std::size_t>(oy)) * wo;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ox = static_cast<std::ptrdiff_t>(x * c.stride + kx) - static_cast<std::ptrdiff_t>(c.pad);
              if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(wo)) continue;
              const double g = g_row[ox];
              gw[w_off + kx] += g * v;
              gi += g * double(w[w_off + kx]);
            }
          }
        }
        if (grad_in) (*grad_in)[(i * h + y) * wd + x] = gi;
      }
    }
  }
  accumulate(grad_w, gw);
  accumulate(grad_b, gb);
}

TensorD linear(const TensorD& in, const Tensor& w, const Tensor& b) {
  if (w.ndim() != 2 || w.dim(1) != in.size() || b.ndim() != 1 || b.dim(0) != w.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "linear: input " + dims_string(in.dims()) + " weight " +
                                               dims_string(w.dims()));
  }
  const std::size_t n_out = w.dim(0), n_in = w.dim(1);
  TensorD out({n_out});
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = b[o];
    const float* row = w.raw() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) acc += double(row[i]) * in[i];
    out[o] = acc;
  }
  return out;
}

void linear_backward(const TensorD& in, const Tensor& w, const TensorD& grad_out, TensorD* grad_in,
                     Tensor& grad_w, Tensor& grad_b) {
  const std::size_t n_out = w.dim(0), n_in = w.dim(1);
  if (grad_in) *grad_in = TensorD(in.dims());
  for (std::size_t o = 0; o < n_out; ++o) {
    const double g = grad_out[o];
    grad_b[o] = static_cast<float>(double(grad_b[o]) + g);
    if (g == 0.0) continue;
    float* gw_row = grad_w.raw() + o * n_in;
    const float* w_row = w.raw() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      gw_row[i] = static_cast<float>(double(gw_row[i]) + g * in[i]);
      if (grad_in) (*grad_in)[i] += g * double(w_row[i]);
    }
  }
}

TensorD relu(const TensorD& x) {
  TensorD y = x;
  for (auto& v : y.data()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return y;
}

TensorD relu_backward(const TensorD& y, const TensorD& grad) {
  TensorD g = grad;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(y[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

TensorD leaky_relu(const TensorD& x, double slope) {
  TensorD y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : slope * v;
  return y;
}

TensorD leaky_relu_backward(const TensorD& x, const TensorD& grad, double slope) {
  TensorD g = grad;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > 0.0)) g[i] *= slope;
  }
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

TensorD sigmoid(const TensorD& x) {
  TensorD y = x;
  for (auto& v : y.data()) v = sigmoid(v);
  return y;
}

TensorD sigmoid_backward(const TensorD& y, const TensorD& grad) {
  TensorD g = grad;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
  return g;
}

ParamMap zeros_like(const ParamMap& params) {
  ParamMap out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.dims()));
  return out;
}

bool all_finite(const ParamMap& params) {
  for (const auto& [_, t] : params) {
    if (!t.all_finite()) return false;
  }
  return true;
}

void scale(ParamMap& grads, double factor) {
  for (auto& [_, t] : grads)
    for (auto& v : t.data()) v = static_cast<float>(v * factor);
}

void require_same_layout(const ParamMap& expected, const ParamMap& actual, const char* what) {
  if (expected.size() != actual.size()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": expected " + std::to_string(expected.size()) +
                                               " tensors, got " + std::to_string(actual.size()));
  }
  for (const auto& [name, t] : expected) {
    auto it = actual.find(name);
    if (it == actual.end()) throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": missing " + name);
    if (it->second.dims() != t.dims()) {
      throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": " + name + " has dims " +
                                                 dims_string(it->second.dims()) + ", expected " +
                                                 dims_string(t.dims()));
    }
  }
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
    : n_(n), batch_(std::min(batch, n)), order_(n), rng_(make_rng(seed, 0xBA7C4ULL)) {
  if (n == 0 || batch == 0) throw Error(ErrorCode::kInvalidArgument, "batch sampler needs n, batch >= 1");
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  if (pos_ >= n_) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t end = std::min(pos_ + batch_, n_);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  return out;
}

void Adam::step(ParamMap& params, const ParamMap& grads, double lr) {
  if (m_.empty()) {
    m_ = zeros_like(params);
    v_ = zeros_like(params);
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_));
  const double c2 = 1.0 - std::pow(b2, double(t_));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + options_.eps);
      p[i] = static_cast<float>(double(p[i]) - update);
    }
  }
}

void Adam::restore(ParamMap m, ParamMap v, std::int64_t t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

namespace {

std::string file_name_for(const std::string& prefix, const std::string& name) {
  std::string out = prefix + name;
  for (auto& ch : out) {
    if (ch == '/' || ch == '\\') ch = '_';
  }
  return out + ".dctf";
}

json write_group(const fs::path& dir, const ParamMap& params, const std::string& prefix) {
  json index = json::object();
  for (const auto& [name, t] : params) {
    const auto file = file_name_for(prefix, name);
    write_tensor(t, dir / file);
    index[name] = {{"file", file}, {"shape", t.dims()}};
  }
  return index;
}

ParamMap read_group(const fs::path& dir, const json& index) {
  ParamMap out;
  for (const auto& [name, entry] : index.items()) {
    Tensor t = read_tensor(dir / entry.at("file").get<std::string>());
    if (t.dims() != entry.at("shape").get<Dims>()) {
      throw Error(ErrorCode::kShapeMismatch, dir.string() + ": " + name + " shape differs from index");
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParamMap& params, const json& meta, const Adam* optimizer) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  json index;
  index["tensors"] = write_group(dir, params, "");
  index["meta"] = meta;
  if (optimizer && optimizer->steps() > 0) {
    const auto& o = optimizer->options();
    index["optimizer"] = {{"step", optimizer->steps()},
                          {"beta1", o.beta1},
                          {"beta2", o.beta2},
                          {"eps", o.eps},
                          {"m", write_group(dir, optimizer->first_moment(), "adam_m.")},
                          {"v", write_group(dir, optimizer->second_moment(), "adam_v.")}};
  }
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw Error(ErrorCode::kIo, "missing checkpoint index in " + dir.string());
  json index;
  try {
    index = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kDecode, dir.string() + "/index.json: " + e.what());
  }
  Checkpoint ck;
  ck.params = read_group(dir, index.at("tensors"));
  ck.meta = index.value("meta", json::object());
  if (index.contains("optimizer")) {
    const auto& opt = index["optimizer"];
    Adam adam(AdamOptions{opt.value("beta1", 0.9), opt.value("beta2", 0.999), opt.value("eps", 1e-8)});
    adam.restore(read_group(dir, opt.at("m")), read_group(dir, opt.at("v")), opt.at("step").get<std::int64_t>());
    ck.optimizer = std::move(adam);
  }
  return ck;
}

}  // namespace neurodecode::nn
