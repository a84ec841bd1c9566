#include "diffpush/numerics/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "diffpush/errors.hpp"

namespace diffpush::numerics {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw ConfigError("tensor shape " + shape_string() + " does not match " +
                      std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::from(std::span<const double> values) {
  return Tensor({values.size()},
                std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

std::size_t Tensor::rows() const {
  return shape_.size() < 2 ? 1 : shape_.front();
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) {
    return data_.size();
  }
  return shape_.front() == 0 ? 0 : data_.size() / shape_.front();
}

std::span<double> Tensor::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * cols(), cols());
}

std::span<const double> Tensor::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * cols(), cols());
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i > 0) {
      s += "x";
    }
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(what) + ": shape mismatch " +
                      a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace diffpush::numerics
