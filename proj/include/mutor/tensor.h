#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mutor/errors.h"

namespace mutor {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorStorage {
  std::vector<T> data;
  std::vector<T> grad;  // empty until first requested
  bool requires_grad = false;
};

// Dense row-major tensor. Copies are shallow: handles share storage, so a
// reshaped view and its source see the same data and gradient buffers.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return storage_ ? storage_->data.size() : 0; }

  std::span<T> data() { return storage_->data; }
  std::span<const T> data() const { return storage_->data; }
  T item() const;

  bool requires_grad() const { return storage_ && storage_->requires_grad; }
  void set_requires_grad(bool flag) { storage_->requires_grad = flag; }

  bool has_grad() const { return storage_ && !storage_->grad.empty(); }
  // Gradient buffer, allocated and zero-filled on first access.
  std::span<T> grad();
  std::span<const T> grad() const;
  void zero_grad();

  // View with a different shape over the same storage.
  BasicTensor reshaped(Shape shape) const;
  // Deep copy of the values; the copy carries no gradient.
  BasicTensor clone() const;

  bool same_storage(const BasicTensor& other) const { return storage_ == other.storage_; }

 private:
  Shape shape_;
  std::shared_ptr<TensorStorage<T>> storage_;
};

// Ordered record of executed operations. backward() replays the recorded
// closures in exact reverse order; a tape can be consumed only once before
// reset(). A non-recording tape drops everything (inference mode).
template <typename T>
class BasicTape {
 public:
  explicit BasicTape(bool recording = true) : recording_(recording) {}

  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }

  void record(const char* op, std::function<void()> backward_fn);

  // Seeds d(root)/d(root) = 1 and propagates. Throws std::logic_error when
  // the tape was already consumed or root is not a scalar.
  void backward(BasicTensor<T>& root);

  void reset();

 private:
  struct Entry {
    const char* op;
    std::function<void()> backward_fn;
  };
  std::vector<Entry> entries_;
  bool recording_;
  bool consumed_ = false;
};

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

using Tensor = BasicTensor<float>;
using Tape = BasicTape<float>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace mutor
