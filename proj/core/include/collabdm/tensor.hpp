#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "collabdm/errors.hpp"

namespace collabdm {

/// Dense row-major tensor of rank <= 4. Images use N x C x H x W.
template <typename S>
class BasicTensor {
public:
  BasicTensor() = default;

  explicit BasicTensor(std::vector<int> shape, S fill = S(0))
      : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 4) {
      throw DimensionError("tensor rank must be 1..4, got " +
                           std::to_string(shape_.size()));
    }
    int64_t n = 1;
    for (int d : shape_) {
      if (d < 0) {
        throw DimensionError("negative tensor extent");
      }
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), fill);
  }

  BasicTensor(std::initializer_list<int> shape, S fill = S(0))
      : BasicTensor(std::vector<int>(shape), fill) {}

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const S& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Rank-4 accessors (N,C,H,W).
  S& at(int n, int c, int h, int w) {
    return data_[idx4(n, c, h, w)];
  }
  const S& at(int n, int c, int h, int w) const {
    return data_[idx4(n, c, h, w)];
  }
  // Rank-2 accessors (N,D).
  S& at(int n, int d) {
    return data_[static_cast<size_t>(n) * shape_[1] + d];
  }
  const S& at(int n, int d) const {
    return data_[static_cast<size_t>(n) * shape_[1] + d];
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const BasicTensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape_.size(); ++i) {
      os << (i ? "," : "") << shape_[i];
    }
    os << ']';
    return os.str();
  }

  bool all_finite() const {
    for (S v : data_) {
      if (!std::isfinite(static_cast<double>(v))) {
        return false;
      }
    }
    return true;
  }

  template <typename T>
  BasicTensor<T> cast() const {
    BasicTensor<T> out(shape_);
    for (int64_t i = 0; i < size(); ++i) {
      out[i] = static_cast<T>(data_[static_cast<size_t>(i)]);
    }
    return out;
  }

private:
  size_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) *
               shape_[3] + w;
  }

  std::vector<int> shape_;
  std::vector<S> data_;
};

using Tensor = BasicTensor<float>;
using DTensor = BasicTensor<double>;

template <typename S>
void require_rank(const BasicTensor<S>& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " +
                         std::to_string(rank) + ", got " + t.shape_str());
  }
}

/// Copies row n of a rank-4 tensor into a [1,C,H,W] view-like tensor slot
/// of `dst` at row m. Shapes must agree on C,H,W.
template <typename S>
void copy_image(const BasicTensor<S>& src, int n, BasicTensor<S>& dst, int m) {
  const int64_t stride = src.size() / src.dim(0);
  for (int64_t i = 0; i < stride; ++i) {
    dst[m * stride + i] = src[n * stride + i];
  }
}

} // namespace collabdm
