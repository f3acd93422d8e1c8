#include "vda/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vda/error.hpp"

namespace vda {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("tensor: item() on shape " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("tensor: cannot reshape " + shape_string(shape_) + " to " +
                     shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

std::vector<double> Tensor::row(std::size_t r) const {
  if (rank() != 2) throw ShapeError("tensor: row() needs rank 2");
  const std::size_t cols = shape_[1];
  return {data_.begin() + static_cast<std::ptrdiff_t>(r * cols),
          data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)};
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor(Shape{0, 0});
  const std::size_t dim = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw ShapeError("stack_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), dim}, std::move(data));
}

}  // namespace vda
