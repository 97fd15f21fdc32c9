#include "mutor/tensor.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mutor {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  BasicTensor t;
  t.storage_ = std::make_shared<TensorStorage<T>>();
  t.storage_->data.assign(shape_numel(shape), value);
  t.storage_->requires_grad = requires_grad;
  t.shape_ = std::move(shape);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(shape));
  }
  BasicTensor t;
  t.storage_ = std::make_shared<TensorStorage<T>>();
  t.storage_->data = std::move(values);
  t.storage_->requires_grad = requires_grad;
  t.shape_ = std::move(shape);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return full(Shape{}, value, requires_grad);
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
  }
  return shape_[axis];
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  return storage_->data[0];
}

template <typename T>
std::span<T> BasicTensor<T>::grad() {
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), T(0));
  return storage_->grad;
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), T(0));
  return storage_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (storage_) std::fill(storage_->grad.begin(), storage_->grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(shape));
  }
  BasicTensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  return from(shape_, storage_->data, false);
}

template <typename T>
void BasicTape<T>::record(const char* op, std::function<void()> backward_fn) {
  if (!recording_) return;
  if (consumed_) throw std::logic_error("tape: recording onto a consumed tape; call reset()");
  entries_.push_back({op, std::move(backward_fn)});
}

template <typename T>
void BasicTape<T>::backward(BasicTensor<T>& root) {
  if (consumed_) throw std::logic_error("tape: backward called twice without reset");
  if (root.numel() != 1) throw DimensionError("tape: backward root must be a scalar");
  consumed_ = true;
  root.grad()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward_fn();
}

template <typename T>
void BasicTape<T>::reset() {
  entries_.clear();
  consumed_ = false;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace mutor
