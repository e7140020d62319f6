#include "neurodecode/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace neurodecode {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kUnsupportedDtype: return "unsupported-dtype";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kUnsupportedBitDepth: return "unsupported-bit-depth";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMalformedEntry: return "malformed-entry";
    case ErrorCode::kDanglingPath: return "dangling-path";
    case ErrorCode::kCategoryOutOfRange: return "category-out-of-range";
    case ErrorCode::kSingularSystem: return "singular-system";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kUnknownCategory: return "unknown-category";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::size_t product(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

namespace detail {
void validate_shape(const Dims& dims, std::size_t values) {
  if (dims.empty()) throw Error(ErrorCode::kShapeMismatch, "tensor must have ndim >= 1");
  for (auto d : dims) {
    if (d == 0) throw Error(ErrorCode::kShapeMismatch, "zero-sized dim in " + dims_string(dims));
  }
  if (product(dims) != values) {
    throw Error(ErrorCode::kShapeMismatch,
                "dims " + dims_string(dims) + " do not match " + std::to_string(values) + " values");
  }
}
}  // namespace detail

TensorD widen(const Tensor& t) { return TensorD(t.dims(), std::vector<double>(t.values().begin(), t.values().end())); }

Tensor narrow(const TensorD& t) {
  std::vector<float> out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(t[i]);
  return Tensor(t.dims(), std::move(out));
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot stack zero tensors");
  Dims dims{rows.size()};
  dims.insert(dims.end(), rows[0].dims().begin(), rows[0].dims().end());
  std::vector<float> data;
  data.reserve(product(dims));
  for (const auto& r : rows) {
    if (r.dims() != rows[0].dims()) throw Error(ErrorCode::kShapeMismatch, "stack_rows: unequal shapes");
    data.insert(data.end(), r.values().begin(), r.values().end());
  }
  return Tensor(std::move(dims), std::move(data));
}

void check_image(const Tensor& img, const char* what) {
  if (img.ndim() != 3 || img.dim(2) != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + " must be [H,W,3], got " + dims_string(img.dims()));
  }
}

void require_dims(const Tensor& t, const Dims& expected, const char* what) {
  if (t.dims() != expected) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": expected " + dims_string(expected) +
                                               ", got " + dims_string(t.dims()));
  }
}

namespace {
void same_shape(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::kShapeMismatch,
                "shape " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
  }
}
}  // namespace

double max_abs_diff(const Tensor& a, const Tensor& b) {
  same_shape(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

double mean_squared_diff(const Tensor& a, const Tensor& b) {
  same_shape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s / double(a.size());
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  same_shape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a[i]) - double(b[i]));
  return s / double(a.size());
}

}  // namespace neurodecode
