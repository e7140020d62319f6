#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "neurodecode/tensor_io.hpp"
#include "support.hpp"

using namespace neurodecode;
using testing::TempDir;

namespace {

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode succeeded");
  return ErrorCode::kIo;
}

ErrorCode load_error(const std::filesystem::path& p) {
  try {
    load_image(p);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load succeeded");
  return ErrorCode::kIo;
}

// Reference bilinear resize written straight from the coordinate rule.
Tensor reference_resize(const Tensor& img, std::size_t oh, std::size_t ow) {
  const std::size_t ih = img.dim(0), iw = img.dim(1), c = img.dim(2);
  Tensor out({oh, ow, c});
  auto src = [&](double d, std::size_t in, std::size_t out_n) {
    return std::clamp((d + 0.5) * double(in) / double(out_n) - 0.5, 0.0, double(in - 1));
  };
  for (std::size_t y = 0; y < oh; ++y) {
    const double sy = src(double(y), ih, oh);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, ih - 1);
    const double fy = sy - double(y0);
    for (std::size_t x = 0; x < ow; ++x) {
      const double sx = src(double(x), iw, ow);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, iw - 1);
      const double fx = sx - double(x0);
      for (std::size_t k = 0; k < c; ++k) {
        auto at = [&](std::size_t yy, std::size_t xx) { return double(img[(yy * iw + xx) * c + k]); };
        const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
        out[(y * ow + x) * c + k] = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("DCTF golden bytes for a one-element tensor") {
  const std::vector<std::uint8_t> golden = {0x44, 0x43, 0x54, 0x46, 0x01, 0x01, 0x00, 0x00, 0x01, 0x00,
                                            0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F};
  CHECK(encode_tensor(Tensor::vector({1.0f})) == golden);
  TempDir dir("golden");
  write_tensor(Tensor::vector({1.0f}), dir / "one.dctf");
  CHECK(testing::read_bytes(dir / "one.dctf") == golden);
  const Tensor back = decode_tensor(golden);
  CHECK(back.dims() == Dims{1});
  CHECK(back[0] == 1.0f);
}

TEST_CASE("DCTF roundtrip of a 2x3 tensor is bit-exact") {
  const Tensor t({2, 3}, {0.5f, -0.0f, 3.25e-20f, std::numeric_limits<float>::infinity(), -7.0f, 1e30f});
  TempDir dir("rt");
  write_tensor(t, dir / "t.dctf");
  CHECK(read_tensor(dir / "t.dctf").bit_equal(t));
}

TEST_CASE("DCTF roundtrip over random tensors") {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> nd(1, 4);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int trial = 0; trial < 200; ++trial) {
    Dims dims(static_cast<std::size_t>(nd(rng)));
    std::size_t budget = 10000;
    for (auto& d : dims) {
      d = std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, std::min<std::size_t>(budget, 40)))(rng);
      budget = std::max<std::size_t>(1, budget / d);
    }
    Tensor t(dims);
    for (auto& v : t.data()) {
      float f;
      do {
        f = std::bit_cast<float>(bits(rng));
      } while (std::isnan(f));
      v = f;
    }
    CHECK(decode_tensor(encode_tensor(t)).bit_equal(t));
  }
}

TEST_CASE("DCTF decode errors are distinct") {
  auto good = encode_tensor(Tensor({2, 2}, 1.0f));

  auto bad_magic = good;
  std::memcpy(bad_magic.data(), "XXXX", 4);
  CHECK(decode_error(bad_magic) == ErrorCode::kBadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(decode_error(bad_version) == ErrorCode::kUnsupportedVersion);

  auto bad_dtype = good;
  bad_dtype[5] = 7;
  CHECK(decode_error(bad_dtype) == ErrorCode::kUnsupportedDtype);

  auto truncated = good;
  truncated.pop_back();
  CHECK(decode_error(truncated) == ErrorCode::kTruncated);
  CHECK(decode_error({0x44, 0x43}) == ErrorCode::kTruncated);

  auto trailing = good;
  trailing.insert(trailing.end(), {0, 0, 0, 0});
  CHECK(decode_error(trailing) == ErrorCode::kShapeMismatch);

  auto zero_dim = good;
  zero_dim[12] = 0;
  CHECK(decode_error(zero_dim) == ErrorCode::kShapeMismatch);
}

TEST_CASE("load_image matches an independent PNG writer") {
  TempDir dir("png");
  SUBCASE("single red pixel") {
    testing::write_bytes(dir / "red.png", testing::encode_png(1, 1, 2, 8, {255, 0, 0}));
    const ImageRGB img = load_image(dir / "red.png");
    CHECK(img.dims() == Dims{1, 1, 3});
    CHECK(img[0] == 1.0f);
    CHECK(img[1] == 0.0f);
    CHECK(img[2] == 0.0f);
  }
  SUBCASE("black 2x2") {
    testing::write_bytes(dir / "black.png", testing::encode_png(2, 2, 2, 8, std::vector<std::uint8_t>(12, 0)));
    const ImageRGB img = load_image(dir / "black.png");
    CHECK(img.dims() == Dims{2, 2, 3});
    for (float v : img.data()) CHECK(v == 0.0f);
  }
  SUBCASE("grayscale is replicated") {
    testing::write_bytes(dir / "gray.png", testing::encode_png(2, 1, 0, 8, {51, 204}));
    const ImageRGB img = load_image(dir / "gray.png");
    CHECK(img.dims() == Dims{1, 2, 3});
    for (int c = 0; c < 3; ++c) {
      CHECK(img[std::size_t(c)] == doctest::Approx(0.2).epsilon(1e-6));
      CHECK(img[std::size_t(3 + c)] == doctest::Approx(0.8).epsilon(1e-6));
    }
  }
  SUBCASE("random RGB recovers within 1/255") {
    std::mt19937 rng(7);
    std::vector<std::uint8_t> px(13 * 9 * 3);
    for (auto& p : px) p = static_cast<std::uint8_t>(rng() & 0xFF);
    testing::write_bytes(dir / "rand.png", testing::encode_png(13, 9, 2, 8, px));
    const ImageRGB img = load_image(dir / "rand.png");
    REQUIRE(img.dims() == Dims{9, 13, 3});
    for (std::size_t i = 0; i < px.size(); ++i) CHECK(std::abs(img[i] - px[i] / 255.0f) <= 1.0f / 255.0f);
  }
  SUBCASE("write_png then load_image") {
    const Tensor img = testing::random_tensor({5, 6, 3}, 3, 0.0f, 1.0f);
    write_png(img, dir / "w.png");
    const ImageRGB back = load_image(dir / "w.png");
    CHECK(max_abs_diff(img, back) <= 0.5 / 255.0 + 1e-6);
  }
}

TEST_CASE("load_image failures") {
  TempDir dir("pngbad");
  auto bytes = testing::encode_png(4, 4, 2, 8, std::vector<std::uint8_t>(48, 9));
  bytes.resize(bytes.size() / 2);
  testing::write_bytes(dir / "cut.png", bytes);
  CHECK(load_error(dir / "cut.png") == ErrorCode::kDecode);

  testing::write_bytes(dir / "junk.png", {1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(load_error(dir / "junk.png") == ErrorCode::kDecode);

  testing::write_bytes(dir / "deep.png", testing::encode_png(2, 2, 2, 16, std::vector<std::uint8_t>(12, 200)));
  CHECK(load_error(dir / "deep.png") == ErrorCode::kUnsupportedBitDepth);

  CHECK(load_error(dir / "missing.png") == ErrorCode::kIo);
}

TEST_CASE("resize_bilinear") {
  SUBCASE("2x2 to 1x1 averages to 0.5") {
    Tensor img({2, 2, 3});
    const float v[4] = {0.0f, 1.0f / 3.0f, 2.0f / 3.0f, 1.0f};
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t c = 0; c < 3; ++c) img[p * 3 + c] = v[p];
    const Tensor out = resize_bilinear(img, 1, 1);
    CHECK(out.dims() == Dims{1, 1, 3});
    for (float x : out.data()) CHECK(x == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("identity on equal dims") {
    const Tensor img = testing::random_tensor({7, 5, 3}, 11, 0.0f, 1.0f);
    CHECK(resize_bilinear(img, 7, 5).bit_equal(img));
  }
  SUBCASE("constant image upscaled 4x stays constant") {
    const Tensor out = resize_bilinear(testing::constant_image(3, 4, 0.3f), 12, 16);
    CHECK(out.dims() == Dims{12, 16, 3});
    for (float x : out.data()) CHECK(x == doctest::Approx(0.3f).epsilon(1e-6));
  }
  SUBCASE("matches the reference and stays within source range") {
    const Tensor img = testing::random_tensor({9, 6, 3}, 5, 0.2f, 0.7f);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {16, 11}, {9, 13}, {1, 20}}) {
      const Tensor out = resize_bilinear(img, h, w);
      CHECK(max_abs_diff(out, reference_resize(img, h, w)) < 1e-6);
      for (float x : out.data()) {
        CHECK(x >= 0.2f - 1e-6f);
        CHECK(x <= 0.7f + 1e-6f);
      }
    }
  }
  SUBCASE("non-positive target dims") {
    CHECK_THROWS_AS(resize_bilinear(testing::constant_image(2, 2, 0.f), 0, 3), Error);
  }
}

TEST_CASE("load_manifest") {
  TempDir dir("manifest");
  write_png(testing::constant_image(2, 2, 0.5f), dir / "a.png");
  write_png(testing::constant_image(2, 2, 0.1f), dir / "b.png");
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.json") << text;
    return dir / "m.json";
  };
  auto code_of = [&](const std::string& text, std::optional<int> k = std::nullopt) {
    try {
      load_manifest(write(text), k);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };

  SUBCASE("empty list") { CHECK(load_manifest(write("[]")).records.empty()); }
  SUBCASE("train and test counts") {
    const auto m = load_manifest(write(R"([
      {"image": "a.png", "category": 0, "voxels": null, "features": null, "split": "train"},
      {"image": "b.png", "category": 1, "split": "test"}])"));
    CHECK(m.count(Split::kTrain) == 1);
    CHECK(m.count(Split::kTest) == 1);
    CHECK(m.num_categories() == 2);
    CHECK(m.records[0].image == dir / "a.png");
  }
  SUBCASE("bad split") {
    CHECK(code_of(R"([{"image": "a.png", "category": 0, "split": "validation"}])") == ErrorCode::kMalformedEntry);
  }
  SUBCASE("unknown key") {
    CHECK(code_of(R"([{"image": "a.png", "category": 0, "split": "train", "x": 1}])") == ErrorCode::kMalformedEntry);
  }
  SUBCASE("negative category") {
    CHECK(code_of(R"([{"image": "a.png", "category": -1, "split": "train"}])") == ErrorCode::kMalformedEntry);
  }
  SUBCASE("dangling path") {
    CHECK(code_of(R"([{"image": "nope.png", "category": 0, "split": "train"}])") == ErrorCode::kDanglingPath);
    CHECK(code_of(R"([{"image": "a.png", "category": 0, "split": "train", "voxels": "v.dctf"}])") ==
          ErrorCode::kDanglingPath);
  }
  SUBCASE("category out of range") {
    CHECK(code_of(R"([{"image": "a.png", "category": 2, "split": "train"}])", 2) == ErrorCode::kCategoryOutOfRange);
  }
  SUBCASE("save and reload") {
    DatasetManifest m;
    m.records.push_back({dir / "a.png", 0, std::nullopt, std::nullopt, Split::kTrain});
    m.records.push_back({dir / "b.png", 1, std::nullopt, std::nullopt, Split::kTest});
    save_manifest(m, dir / "saved.json");
    const auto back = load_manifest(dir / "saved.json", 2);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[1].image == dir / "b.png");
    CHECK(back.records[1].split == Split::kTest);
  }
}
