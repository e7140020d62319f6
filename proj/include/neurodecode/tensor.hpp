#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace neurodecode {

enum class ErrorCode {
  kBadMagic,
  kUnsupportedVersion,
  kUnsupportedDtype,
  kTruncated,
  kShapeMismatch,
  kIo,
  kDecode,
  kUnsupportedBitDepth,
  kInvalidArgument,
  kMalformedEntry,
  kDanglingPath,
  kCategoryOutOfRange,
  kSingularSystem,
  kUndefinedMetric,
  kNonFinite,
  kConfig,
  kUnknownCategory,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch on the kind of error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using Dims = std::vector<std::size_t>;

std::size_t product(const Dims& dims);
std::string dims_string(const Dims& dims);

namespace detail {
// Throws kShapeMismatch unless ndim >= 1, every dim >= 1 and the payload
// length matches.
void validate_shape(const Dims& dims, std::size_t values);
}  // namespace detail

// Dense row-major array. Always has ndim >= 1 and every dim >= 1. Stored
// data, parameters and images use float; network activations use double.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : dims_{1}, data_(1, T(0)) {}
  explicit BasicTensor(Dims dims, T fill = T(0)) : dims_(std::move(dims)) {
    detail::validate_shape(dims_, product(dims_));
    data_.assign(product(dims_), fill);
  }
  BasicTensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    detail::validate_shape(dims_, data_.size());
  }

  static BasicTensor zeros(Dims dims) { return BasicTensor(std::move(dims), T(0)); }
  static BasicTensor vector(std::initializer_list<T> values) {
    return BasicTensor({values.size()}, std::vector<T>(values));
  }
  static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    std::vector<T> data;
    const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw Error(ErrorCode::kShapeMismatch, "ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    return BasicTensor({rows.size(), cols}, std::move(data));
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t ndim() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors; the tensor must be a matrix.
  T& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  T at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  BasicTensor reshaped(Dims dims) const { return BasicTensor(std::move(dims), data_); }

  // Row `r` of a tensor with ndim >= 2, as a tensor of the trailing dims.
  BasicTensor row(std::size_t r) const {
    if (ndim() < 2) throw Error(ErrorCode::kShapeMismatch, "row() needs ndim >= 2");
    if (r >= dims_[0]) throw Error(ErrorCode::kInvalidArgument, "row index out of range");
    Dims rest(dims_.begin() + 1, dims_.end());
    const std::size_t stride = product(rest);
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * stride);
    return BasicTensor(std::move(rest), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(stride)));
  }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  // Bitwise comparison of dims and payload (distinguishes -0.0/+0.0 and NaN payloads).
  bool bit_equal(const BasicTensor& other) const noexcept {
    return dims_ == other.dims_ && std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(T)) == 0;
  }
  friend bool operator==(const BasicTensor& a, const BasicTensor& b) noexcept {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Dims dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

TensorD widen(const Tensor& t);
// Rounds to the nearest float.
Tensor narrow(const TensorD& t);

// Stack equally shaped tensors along a new leading axis.
Tensor stack_rows(std::span<const Tensor> rows);

// Images are [H, W, 3] tensors with values in [0, 1].
using ImageRGB = Tensor;

void check_image(const Tensor& img, const char* what = "image");
void require_dims(const Tensor& t, const Dims& expected, const char* what);

double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_squared_diff(const Tensor& a, const Tensor& b);
double mean_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace neurodecode
