// Dense tensors (rank 1..4, row-major) with reverse-mode automatic
// differentiation driven by an explicit Tape.  Axis order for feature maps
// is (time, frequency, channel); a leading batch axis is not used, batching
// is done by looping over samples.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msa {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

// Toggle for the NaN/Inf scan after every forward op.
inline std::atomic<bool>& finite_checks() {
  static std::atomic<bool> on{true};
  return on;
}

template <typename T>
struct TensorStorage {
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : shape_(std::move(shape)), st_(std::make_shared<TensorStorage<T>>()) {
    if (shape_.empty() || shape_.size() > 4)
      throw std::invalid_argument("Tensor: rank must be 1..4, got " +
                                  shape_str(shape_));
    for (auto d : shape_)
      if (d == 0) throw std::invalid_argument("Tensor: zero extent in " +
                                              shape_str(shape_));
    st_->value.assign(shape_numel(shape_), fill);
    st_->requires_grad = requires_grad;
  }

  static Tensor from_data(Shape shape, std::vector<T> data,
                          bool requires_grad = false) {
    Tensor t(shape, T(0), requires_grad);
    if (data.size() != t.size())
      throw std::invalid_argument("Tensor::from_data: " + shape_str(shape) +
                                  " needs " + std::to_string(t.size()) +
                                  " values, got " + std::to_string(data.size()));
    t.st_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return st_ ? st_->value.size() : 0; }

  // A Tensor is a shared handle: const propagates to the handle, not the
  // underlying buffers (same semantics as a smart pointer).
  std::vector<T>& data() const { return st_->value; }

  bool requires_grad() const { return st_ && st_->requires_grad; }
  void set_requires_grad(bool b) const { st_->requires_grad = b; }

  bool has_grad() const { return st_ && !st_->grad.empty(); }
  std::vector<T>& grad() const {
    if (st_->grad.empty()) st_->grad.assign(st_->value.size(), T(0));
    return st_->grad;
  }
  void zero_grad() const {
    if (st_ && !st_->grad.empty())
      std::fill(st_->grad.begin(), st_->grad.end(), T(0));
  }

  T item() const {
    if (size() != 1) throw std::logic_error("Tensor::item: not a scalar");
    return st_->value[0];
  }

  // Flat element access.
  T& operator[](std::size_t i) const { return st_->value[i]; }

  // 3D access for (T,F,C) maps.
  T& at(std::size_t t, std::size_t f, std::size_t c) const {
    return st_->value[(t * shape_[1] + f) * shape_[2] + c];
  }

  // Identity of the underlying buffer; used by the tape to accumulate into
  // the right place when the same tensor appears twice in a graph.
  const void* id() const { return st_.get(); }

  void check_finite(const char* op) const {
    if (!finite_checks().load(std::memory_order_relaxed)) return;
    for (const T& v : st_->value)
      if (!std::isfinite(v))
        throw std::runtime_error(std::string("non-finite value after op '") +
                                 op + "'");
  }

 private:
  Shape shape_;
  std::shared_ptr<TensorStorage<T>> st_;
};

// Ordered record of executed ops.  Ops are appended in execution order, so
// the record is topologically sorted by construction; backward() walks it
// once in reverse.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return ops_.size(); }

  void record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
  }

  void backward(Tensor<T>& loss) {
    if (loss.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.requires_grad() || ops_.empty())
      throw std::invalid_argument(
          "backward: loss is not connected to any tracked tensor");
    loss.grad()[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  void clear() { ops_.clear(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> ops_;
};

}  // namespace msa
