#include "neurodecode/tensor_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) | (std::uint32_t(b[off + 2]) << 16) |
         (std::uint32_t(b[off + 3]) << 24);
}

constexpr std::uint8_t kMagic[4] = {0x44, 0x43, 0x54, 0x46};
constexpr std::size_t kHeaderBytes = 12;

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * t.ndim() + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kDctfVersion);
  out.push_back(kDctfDtypeF32);
  out.push_back(0);
  out.push_back(0);
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  const std::size_t magic_len = std::min<std::size_t>(bytes.size(), 4);
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_len), std::begin(kMagic))) {
    throw Error(ErrorCode::kBadMagic, "not a DCTF tensor file");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::kTruncated, "header is incomplete");
  if (bytes[4] != kDctfVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "DCTF version " + std::to_string(bytes[4]));
  }
  if (bytes[5] != kDctfDtypeF32) {
    throw Error(ErrorCode::kUnsupportedDtype, "DCTF dtype " + std::to_string(bytes[5]));
  }
  const std::uint32_t ndim = get_u32(bytes, 8);
  if (ndim == 0) throw Error(ErrorCode::kShapeMismatch, "ndim must be >= 1");
  const std::size_t dims_end = kHeaderBytes + 4 * std::size_t(ndim);
  if (bytes.size() < dims_end) throw Error(ErrorCode::kTruncated, "dims are incomplete");
  Dims dims(ndim);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes, kHeaderBytes + 4 * i);
    if (dims[i] == 0) throw Error(ErrorCode::kShapeMismatch, "zero-sized dim");
    count *= dims[i];
  }
  const std::size_t payload = bytes.size() - dims_end;
  if (payload < 4 * count) {
    throw Error(ErrorCode::kTruncated, "payload has " + std::to_string(payload) + " bytes, expected " +
                                           std::to_string(4 * count));
  }
  if (payload > 4 * count) {
    throw Error(ErrorCode::kShapeMismatch, "payload has " + std::to_string(payload - 4 * count) +
                                               " trailing bytes beyond dims " + dims_string(dims));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(get_u32(bytes, dims_end + 4 * i));
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const Tensor& t, const fs::path& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Tensor read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

// --- PNG -------------------------------------------------------------------

namespace {
struct PngImageGuard {
  png_image image{};
  PngImageGuard() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImageGuard() { png_image_free(&image); }
};
}  // namespace

ImageRGB load_image(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  PngImageGuard g;
  if (!png_image_begin_read_from_file(&g.image, path.string().c_str())) {
    throw Error(ErrorCode::kDecode, path.string() + ": " + g.image.message);
  }
  if (g.image.format & PNG_FORMAT_FLAG_LINEAR) {
    throw Error(ErrorCode::kUnsupportedBitDepth, path.string() + ": only 8-bit PNGs are supported");
  }
  g.image.format = PNG_FORMAT_RGB;
  const std::size_t h = g.image.height;
  const std::size_t w = g.image.width;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(g.image));
  if (!png_image_finish_read(&g.image, nullptr, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::kDecode, path.string() + ": " + g.image.message);
  }
  std::vector<float> data(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) data[i] = float(buf[i]) / 255.0f;
  return Tensor({h, w, 3}, std::move(data));
}

void write_png(const ImageRGB& img, const fs::path& path) {
  check_image(img);
  PngImageGuard g;
  g.image.width = static_cast<png_uint_32>(img.dim(1));
  g.image.height = static_cast<png_uint_32>(img.dim(0));
  g.image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img[i], 0.0f, 1.0f);
    buf[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  if (!png_image_write_to_file(&g.image, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, path.string() + ": " + g.image.message);
  }
}

// --- resize ----------------------------------------------------------------

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
  if (img.ndim() != 3) throw Error(ErrorCode::kShapeMismatch, "resize expects [H,W,C]");
  if (out_h == 0 || out_w == 0) throw Error(ErrorCode::kInvalidArgument, "target dims must be >= 1");
  const std::size_t in_h = img.dim(0), in_w = img.dim(1), ch = img.dim(2);
  if (in_h == out_h && in_w == out_w) return img;

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = double(in) / double(out);
    for (std::size_t d = 0; d < out; ++d) {
      double s = (double(d) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, double(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[d] = {i0, i1, s - double(i0)};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);

  Tensor out({out_h, out_w, ch});
  const float* src = img.raw();
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& b = tx[x];
      for (std::size_t c = 0; c < ch; ++c) {
        const double v00 = src[(a.i0 * in_w + b.i0) * ch + c];
        const double v01 = src[(a.i0 * in_w + b.i1) * ch + c];
        const double v10 = src[(a.i1 * in_w + b.i0) * ch + c];
        const double v11 = src[(a.i1 * in_w + b.i1) * ch + c];
        const double top = v00 + (v01 - v00) * b.frac;
        const double bot = v10 + (v11 - v10) * b.frac;
        out[(y * out_w + x) * ch + c] = static_cast<float>(top + (bot - top) * a.frac);
      }
    }
  }
  return out;
}

// --- manifest --------------------------------------------------------------

const char* to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.split == split; }));
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

int DatasetManifest::num_categories() const {
  int k = 0;
  for (const auto& r : records) k = std::max(k, r.category + 1);
  return k;
}

namespace {

fs::path resolve_existing(const fs::path& base, const std::string& rel, std::size_t index) {
  fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kDanglingPath, "record " + std::to_string(index) + ": " + p.string());
  }
  return p;
}

std::optional<fs::path> optional_path(const json& entry, const char* key, const fs::path& base,
                                      std::size_t index) {
  if (!entry.contains(key) || entry[key].is_null()) return std::nullopt;
  if (!entry[key].is_string()) {
    throw Error(ErrorCode::kMalformedEntry,
                "record " + std::to_string(index) + ": '" + key + "' must be a string or null");
  }
  return resolve_existing(base, entry[key].get<std::string>(), index);
}

std::string relative_string(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  auto rel = fs::relative(p, base, ec);
  return (ec || rel.empty()) ? p.generic_string() : rel.generic_string();
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path, std::optional<int> category_count) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedEntry, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::kMalformedEntry, "manifest must be a JSON array");

  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  static const char* kKeys[] = {"image", "category", "voxels", "features", "split"};
  DatasetManifest m;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& e = doc[i];
    const auto where = "record " + std::to_string(i);
    if (!e.is_object()) throw Error(ErrorCode::kMalformedEntry, where + " is not an object");
    for (const auto& [key, _] : e.items()) {
      if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
          std::end(kKeys)) {
        throw Error(ErrorCode::kMalformedEntry, where + ": unknown key '" + key + "'");
      }
    }
    if (!e.contains("image") || !e["image"].is_string()) {
      throw Error(ErrorCode::kMalformedEntry, where + ": 'image' must be a string");
    }
    if (!e.contains("category") || !e["category"].is_number_integer() || e["category"].get<long long>() < 0) {
      throw Error(ErrorCode::kMalformedEntry, where + ": 'category' must be a non-negative integer");
    }
    if (!e.contains("split") || !e["split"].is_string()) {
      throw Error(ErrorCode::kMalformedEntry, where + ": 'split' must be a string");
    }
    SampleRecord r;
    const auto split = e["split"].get<std::string>();
    if (split == "train") {
      r.split = Split::kTrain;
    } else if (split == "test") {
      r.split = Split::kTest;
    } else {
      throw Error(ErrorCode::kMalformedEntry, where + ": split must be train|test, got '" + split + "'");
    }
    r.category = static_cast<int>(e["category"].get<long long>());
    if (category_count && r.category >= *category_count) {
      throw Error(ErrorCode::kCategoryOutOfRange, where + ": category " + std::to_string(r.category) +
                                                      " >= " + std::to_string(*category_count));
    }
    r.image = resolve_existing(base, e["image"].get<std::string>(), i);
    r.voxels = optional_path(e, "voxels", base, i);
    r.features = optional_path(e, "features", base, i);
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json doc = json::array();
  for (const auto& r : manifest.records) {
    json e;
    e["image"] = relative_string(r.image, base);
    e["category"] = r.category;
    e["voxels"] = r.voxels ? json(relative_string(*r.voxels, base)) : json(nullptr);
    e["features"] = r.features ? json(relative_string(*r.features, base)) : json(nullptr);
    e["split"] = to_string(r.split);
    doc.push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace neurodecode
