#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace inflect::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major tensor. A plain value type; graph bookkeeping lives in Var.
template <class Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<Real> values);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  // Negative axes count from the back.
  std::size_t dim(int axis) const;

  Real& operator[](std::size_t i) { return data[i]; }
  const Real& operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const noexcept;

  template <class Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace inflect::nn
