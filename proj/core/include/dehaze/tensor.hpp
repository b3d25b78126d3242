#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dehaze/error.hpp"

namespace dehaze::ad {

inline std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    ensure(d >= 0, "tensor dimension must be non-negative");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// Dense row-major value array. Values are immutable once handed to a Tape;
// the optional grad buffer is filled in by Tape::backward for leaves.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty or same length as data

  Tensor() = default;

  explicit Tensor(std::vector<int> s, T fill = T(0))
      : shape(std::move(s)), data(static_cast<std::size_t>(shape_size(shape)), fill) {}

  static Tensor from(std::vector<int> s, std::vector<T> d) {
    Tensor t;
    t.shape = std::move(s);
    ensure(shape_size(t.shape) == static_cast<std::int64_t>(d.size()),
           "tensor data length does not match shape " + shape_str(t.shape));
    t.data = std::move(d);
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

  int dim(int i) const {
    ensure(i >= 0 && i < static_cast<int>(shape.size()), "tensor dim index out of range");
    return shape[static_cast<std::size_t>(i)];
  }

  int ndim() const { return static_cast<int>(shape.size()); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <typename T>
void ensure_finite(const Tensor<T>& t, const char* who) {
  ensure(all_finite(t), std::string(who) + ": non-finite value in tensor");
}

template <typename T, typename U>
Tensor<U> tensor_cast(const Tensor<T>& t) {
  Tensor<U> out;
  out.shape = t.shape;
  out.requires_grad = t.requires_grad;
  out.data.reserve(t.data.size());
  for (T v : t.data) out.data.push_back(static_cast<U>(v));
  return out;
}

}  // namespace dehaze::ad
