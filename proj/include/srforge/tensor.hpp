#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

#include "srforge/error.hpp"

namespace srforge {

/// Extents of an NCHW tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr Eigen::Index size() const noexcept {
    return static_cast<Eigen::Index>(n) * c * h * w;
  }
  constexpr Eigen::Index plane() const noexcept { return static_cast<Eigen::Index>(h) * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense 4-D (batch, channel, height, width) array, row-major, contiguous.
///
/// Storage is an Eigen column vector so whole-tensor arithmetic can be written
/// as Eigen expressions on `values()`; `plane()` exposes one (n, c) slice as a
/// row-major H x W matrix map.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstPlaneMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;
  explicit Tensor(const Shape& shape, Scalar fill = Scalar(0)) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw InvalidArgument("negative tensor extent " + to_string(shape));
    }
    values_.setConstant(shape.size(), fill);
  }
  Tensor(const Shape& shape, Vector values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape.size()) {
      throw InvalidArgument("tensor data length does not match shape " + to_string(shape));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }

  Vector& values() noexcept { return values_; }
  const Vector& values() const noexcept { return values_; }
  Scalar* data() noexcept { return values_.data(); }
  const Scalar* data() const noexcept { return values_.data(); }

  Eigen::Index offset(int n, int c, int y, int x) const noexcept {
    return ((static_cast<Eigen::Index>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  Scalar& operator()(int n, int c, int y, int x) noexcept { return values_[offset(n, c, y, x)]; }
  Scalar operator()(int n, int c, int y, int x) const noexcept {
    return values_[offset(n, c, y, x)];
  }

  Scalar* plane_data(int n, int c) noexcept { return data() + offset(n, c, 0, 0); }
  const Scalar* plane_data(int n, int c) const noexcept { return data() + offset(n, c, 0, 0); }
  PlaneMap plane(int n, int c) noexcept { return PlaneMap(plane_data(n, c), shape_.h, shape_.w); }
  ConstPlaneMap plane(int n, int c) const noexcept {
    return ConstPlaneMap(plane_data(n, c), shape_.h, shape_.w);
  }

  void set_zero() { values_.setZero(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>());
  }

 private:
  Shape shape_{};
  Vector values_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// Learnable tensor with its accumulated gradient.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;

  Parameter() = default;
  Parameter(std::string name_, Tensor<Scalar> value_)
      : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor<Scalar>(value.shape()); }
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.values().allFinite();
}

}  // namespace srforge
