#include "cran/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace cran::ad {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape, std::size_t length) {
  if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
  for (auto d : shape) {
    if (d == 0) {
      throw std::invalid_argument("tensor: zero dimension in shape " +
                                  shape_str(shape));
    }
  }
  if (shape_numel(shape) != length) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match " + std::to_string(length) +
                                " values");
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  check_shape(shape, data.size());
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor make_result(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::column(std::vector<double> values) {
  auto n = values.size();
  return Tensor({n, 1}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("tensor: undefined");
  return impl_->shape;
}

std::size_t Tensor::size() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const { return shape()[0]; }

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.size() >= 2 ? s[1] : 1;
}

std::span<const double> Tensor::data() const {
  if (!impl_) throw std::logic_error("tensor: undefined");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("tensor: undefined");
  return impl_->data;
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("tensor: item() on shape " +
                                shape_str(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!impl_) throw std::logic_error("tensor: undefined");
  impl_->requires_grad = on;
}

bool Tensor::is_leaf() const { return impl_ && impl_->is_leaf; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor: no gradient");
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!impl_) throw std::logic_error("tensor: undefined");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }
}

void Tensor::drop_grad() {
  if (impl_) {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }
}

Tensor Tensor::clone() const {
  if (!impl_) return {};
  return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
}

}  // namespace cran::ad
