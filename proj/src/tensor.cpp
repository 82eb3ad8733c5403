#include "sgdeblur/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InvalidInput("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw InvalidInput("tensor data size does not match shape " + shape_string(shape_));
  }
}

float Tensor::item() const {
  if (data_.size() != 1) throw InvalidInput("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

}  // namespace sgdeblur
