//
// Copyright 2026 The Privex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef PRIVEX_TENSOR_H_
#define PRIVEX_TENSOR_H_

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace privex {

using Shape = std::vector<int>;

size_t ShapeSize(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Dense row-major array. The network code is instantiated for float (the
// production precision) and double (gradient verification).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {}
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != ShapeSize(shape_)) {
      throw std::invalid_argument("tensor data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " +
                                  ShapeString(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  T operator[](size_t i) const { return data_[i]; }

  BasicTensor Reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  void Fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool AllFinite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  BasicTensor<U> Cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

// Named tensors, iterated in name order.
template <typename T>
class BasicParameterSet {
 public:
  using Map = std::map<std::string, BasicTensor<T>>;

  void Set(const std::string& name, BasicTensor<T> tensor) {
    tensors_[name] = std::move(tensor);
  }
  bool Contains(const std::string& name) const {
    return tensors_.count(name) > 0;
  }
  const BasicTensor<T>& at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      throw std::out_of_range("no parameter named '" + name + "'");
    }
    return it->second;
  }
  BasicTensor<T>& at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      throw std::out_of_range("no parameter named '" + name + "'");
    }
    return it->second;
  }

  size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  size_t ParameterCount() const {
    size_t n = 0;
    for (const auto& [name, t] : tensors_) n += t.size();
    return n;
  }

  // Adds the tensors of `other`; names must not collide.
  void Merge(const BasicParameterSet& other) {
    for (const auto& [name, t] : other.tensors_) {
      if (!tensors_.emplace(name, t).second) {
        throw std::invalid_argument("duplicate parameter '" + name + "'");
      }
    }
  }

  // Elementwise this += scale * other for every tensor present in `other`.
  void Accumulate(const BasicParameterSet& other, T scale = T(1)) {
    for (const auto& [name, t] : other.tensors_) {
      auto it = tensors_.find(name);
      if (it == tensors_.end()) {
        tensors_.emplace(name, t);
        if (scale != T(1)) {
          for (T& v : tensors_.at(name).storage()) v *= scale;
        }
        continue;
      }
      if (it->second.shape() != t.shape()) {
        throw std::invalid_argument("shape mismatch accumulating '" + name +
                                    "'");
      }
      auto dst = it->second.data();
      auto src = t.data();
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    }
  }

  void Scale(T factor) {
    for (auto& [name, t] : tensors_) {
      for (T& v : t.storage()) v *= factor;
    }
  }

  BasicParameterSet ZerosLike() const {
    BasicParameterSet out;
    for (const auto& [name, t] : tensors_) out.Set(name, BasicTensor<T>(t.shape()));
    return out;
  }

  template <typename U>
  BasicParameterSet<U> Cast() const {
    BasicParameterSet<U> out;
    for (const auto& [name, t] : tensors_) out.Set(name, t.template Cast<U>());
    return out;
  }

  bool operator==(const BasicParameterSet&) const = default;

 private:
  Map tensors_;
};

using ParameterSet = BasicParameterSet<float>;

}  // namespace privex

#endif  // PRIVEX_TENSOR_H_
