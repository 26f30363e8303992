#include "inflect/tensor.hpp"

#include <cmath>

#include "inflect/errors.hpp"

namespace inflect::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

template <class Real>
Tensor<Real>::Tensor(Shape s, std::vector<Real> values) : shape(std::move(s)), data(std::move(values)) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + to_string(shape) + " does not match " + std::to_string(data.size()) +
                     " values");
  }
}

template <class Real>
std::size_t Tensor<Real>::dim(int axis) const {
  const int r = static_cast<int>(shape.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  return shape[static_cast<std::size_t>(a)];
}

template <class Real>
bool Tensor<Real>::all_finite() const noexcept {
  for (Real v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template struct Tensor<float>;
template struct Tensor<double>;

}  // namespace inflect::nn
