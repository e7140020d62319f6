#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "neurodecode/nn.hpp"
#include "neurodecode/tensor.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("neurodecode_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Minimal PNG encoder with stored (uncompressed) deflate blocks. Kept apart
// from libpng so image loading is checked against an independent writer.
// color_type 0 = gray, 2 = RGB; bit_depth 8 or 16 (16-bit samples are the
// 8-bit value replicated into both bytes).
namespace png_detail {

inline std::uint32_t crc32(const std::uint8_t* p, std::size_t n, std::uint32_t crc = 0xFFFFFFFFu) {
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= p[i];
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return crc;
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& body) {
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  std::vector<std::uint8_t> tb(type, type + 4);
  tb.insert(tb.end(), body.begin(), body.end());
  out.insert(out.end(), tb.begin(), tb.end());
  put_u32(out, crc32(tb.data(), tb.size()) ^ 0xFFFFFFFFu);
}

}  // namespace png_detail

inline std::vector<std::uint8_t> encode_png(std::size_t w, std::size_t h, int color_type, int bit_depth,
                                            const std::vector<std::uint8_t>& samples) {
  using namespace png_detail;
  const std::size_t channels = color_type == 2 ? 3 : 1;
  const std::size_t bps = bit_depth == 16 ? 2 : 1;
  std::vector<std::uint8_t> raw;
  for (std::size_t y = 0; y < h; ++y) {
    raw.push_back(0);
    for (std::size_t x = 0; x < w * channels; ++x) {
      const std::uint8_t v = samples[y * w * channels + x];
      for (std::size_t b = 0; b < bps; ++b) raw.push_back(v);
    }
  }
  std::vector<std::uint8_t> z = {0x78, 0x01};
  std::size_t pos = 0;
  do {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - pos);
    const bool last = pos + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<std::uint8_t>(n & 0xFF));
    z.push_back(static_cast<std::uint8_t>(n >> 8));
    z.push_back(static_cast<std::uint8_t>(~n & 0xFF));
    z.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xFF));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos), raw.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  } while (pos < raw.size());
  std::uint32_t a = 1, b = 0;
  for (auto v : raw) {
    a = (a + v) % 65521;
    b = (b + a) % 65521;
  }
  put_u32(z, (b << 16) | a);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.insert(ihdr.end(), {static_cast<std::uint8_t>(bit_depth), static_cast<std::uint8_t>(color_type), 0, 0, 0});
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", {});
  return out;
}

inline neurodecode::Tensor random_tensor(neurodecode::Dims dims, std::uint64_t seed, float lo = -1.0f,
                                         float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  neurodecode::Tensor t(std::move(dims));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline neurodecode::Tensor constant_image(std::size_t h, std::size_t w, float v) {
  return neurodecode::Tensor({h, w, 3}, v);
}

// Central-difference check of an analytic gradient along random Gaussian
// directions over the whole parameter map. The step is rel_step times the RMS
// parameter value. Returns the worst relative error.
template <class LossFn>
double worst_directional_error(const neurodecode::nn::ParamMap& params, const neurodecode::nn::ParamMap& grads,
                               LossFn&& loss, std::size_t directions, std::uint64_t seed, double rel_step = 1e-5) {
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& [name, t] : params) {
    for (float v : t.data()) sq += double(v) * v;
    count += t.size();
  }
  const double h = rel_step * std::sqrt(sq / double(count));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (std::size_t d = 0; d < directions; ++d) {
    neurodecode::nn::ParamMap dir = neurodecode::nn::zeros_like(params);
    for (auto& [name, t] : dir) {
      for (auto& v : t.data()) v = static_cast<float>(n01(rng));
    }
    auto plus = params, minus = params;
    for (auto& [name, t] : dir) {
      auto p = plus.at(name).data();
      auto m = minus.at(name).data();
      for (std::size_t i = 0; i < t.size(); ++i) {
        p[i] = static_cast<float>(double(p[i]) + h * t.data()[i]);
        m[i] = static_cast<float>(double(m[i]) - h * t.data()[i]);
      }
    }
    // Compare against the perturbation that survived f32 rounding.
    double analytic = 0.0;
    for (auto& [name, t] : dir) {
      const auto g = grads.at(name).data();
      const auto p = plus.at(name).data();
      const auto m = minus.at(name).data();
      for (std::size_t i = 0; i < t.size(); ++i) analytic += double(g[i]) * (double(p[i]) - double(m[i])) / 2.0;
    }
    const double numeric = (loss(plus) - loss(minus)) / 2.0;
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-12});
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

// Biases start at zero, which parks units fed by all-zero inputs exactly on a
// ReLU kink. Gradient checks run at a generic point instead.
inline neurodecode::nn::ParamMap generic_point(neurodecode::nn::ParamMap params, std::uint64_t seed,
                                               float bias_scale = 0.1f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-bias_scale, bias_scale);
  for (auto& [name, t] : params) {
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) {
      for (auto& v : t.data()) v += u(rng);
    }
  }
  return params;
}

}  // namespace testing
