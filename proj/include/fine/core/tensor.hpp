#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "fine/core/error.hpp"

namespace fine {

using Shape = std::vector<std::size_t>;
using cfloat = std::complex<float>;
using cdouble = std::complex<double>;

inline std::size_t element_count(const Shape &shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape &shape);

template <typename T> struct is_complex : std::false_type {};
template <typename R> struct is_complex<std::complex<R>> : std::true_type {};
template <typename T> inline constexpr bool is_complex_v = is_complex<T>::value;

template <typename T> struct real_of { using type = T; };
template <typename R> struct real_of<std::complex<R>> { using type = R; };
template <typename T> using real_t = typename real_of<T>::type;

enum class DType : std::uint8_t { Real32 = 0, Real64 = 1, Complex64 = 2, Complex128 = 3 };

template <typename T> constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::Real32; }
template <> constexpr DType dtype_of<double>() { return DType::Real64; }
template <> constexpr DType dtype_of<cfloat>() { return DType::Complex64; }
template <> constexpr DType dtype_of<cdouble>() { return DType::Complex128; }

const char *dtype_name(DType d);

// Dense row-major n-dimensional array. The shape is fixed at construction;
// element values are freely mutable.
template <typename T>
class Tensor
{
public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{})
    : shape_(std::move(shape))
    , data_(element_count(shape_), fill)
  {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape))
    , data_(std::move(data))
  {
    check_extents();
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data has " + std::to_string(data_.size()) + " elements, shape " +
                       shape_string(shape_) + " needs " + std::to_string(element_count(shape_)));
    }
  }

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T *raw() noexcept { return data_.data(); }
  const T *raw() const noexcept { return data_.data(); }
  const std::vector<T> &values() const noexcept { return data_; }

  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  // Row-major stride of an axis.
  std::size_t stride(std::size_t axis) const
  {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < shape_.size(); ++a) {
      s *= shape_[a];
    }
    return s;
  }

  template <typename... I>
  T &at(I... idx)
  {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T &at(I... idx) const
  {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Same elements under a different shape of equal element count.
  Tensor reshaped(Shape shape) const
  {
    if (element_count(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor &other) const = default;

private:
  void check_extents() const
  {
    for (auto e : shape_) {
      if (e == 0) {
        throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
      }
    }
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const
  {
    if (idx.size() != shape_.size()) {
      throw ShapeError("index rank mismatch");
    }
    std::size_t off = 0;
    std::size_t a = 0;
    for (auto i : idx) {
      off = off * shape_[a++] + i;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using AnyTensor = std::variant<Tensor<float>, Tensor<double>, Tensor<cfloat>, Tensor<cdouble>>;

inline DType dtype_of(const AnyTensor &t)
{
  return static_cast<DType>(t.index());
}

inline const Shape &shape_of(const AnyTensor &t)
{
  return std::visit([](const auto &x) -> const Shape & { return x.shape(); }, t);
}

inline void require_same_shape(const Shape &a, const Shape &b, const char *where)
{
  if (a != b) {
    throw ShapeError(std::string(where) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

template <typename T>
void require_same_shape(const Tensor<T> &a, const Tensor<T> &b, const char *where)
{
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(where) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

} // namespace fine
