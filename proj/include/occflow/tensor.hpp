// Copyright 2026 The OccFlow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OCCFLOW_TENSOR_HPP_
#define OCCFLOW_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <new>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "occflow/common.hpp"

namespace occflow {

using Shape = std::vector<int64_t>;

// All tensor buffers share one alignment so that SIMD kernels peel loops the
// same way regardless of heap state; this is what makes repeated forwards on
// identical values bit-identical.
template <typename T, size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) {}
  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, size_t) noexcept {
    ::operator delete(p, std::align_val_t(Align));
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U, Align>&) const {
    return true;
  }
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Deliberately minimal: the dense kernels in nn.hpp
// wrap the raw buffer with Eigen maps.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  template <typename... Idx>
  T& operator()(Idx... idx) {
    return data_[static_cast<size_t>(offset(idx...))];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const {
    return data_[static_cast<size_t>(offset(idx...))];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(Shape shape) {
    if (numel_of(shape) != numel()) {
      throw Error("reshape: numel mismatch " + shape_str(shape_) + " -> " +
                  shape_str(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  void add_(const Tensor& o) {
    for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += o[i];
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  static int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  template <typename... Idx>
  int64_t offset(Idx... idx) const {
    const int64_t ids[] = {static_cast<int64_t>(idx)...};
    constexpr size_t k = sizeof...(Idx);
    int64_t off = 0;
    for (size_t i = 0; i < k; ++i) off = off * shape_[i] + ids[i];
    return off;
  }

  Shape shape_;
  std::vector<T, AlignedAllocator<T>> data_;
};

// Throws on mismatch; used by ops that take caller-supplied grids.
template <typename T>
void check_shape(const Tensor<T>& t, const Shape& want, const char* what) {
  if (t.shape() != want) {
    throw Error(std::string(what) + ": expected shape " + shape_str(want) +
                ", got " + shape_str(t.shape()));
  }
}

}  // namespace occflow

#endif  // OCCFLOW_TENSOR_HPP_
