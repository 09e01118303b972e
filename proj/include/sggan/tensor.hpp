#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sggan {

// Shape of a dense row-major tensor, rank <= 4.
class Shape {
public:
  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) {
    if (dims.size() > 4) throw std::invalid_argument("Shape: rank > 4");
    for (int64_t d : dims) d_[rank_++] = d;
  }

  int rank() const { return rank_; }
  int64_t operator[](int i) const { return d_[i]; }
  int64_t dim(int i) const { return d_[i]; }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= d_[i];
    return rank_ == 0 ? 0 : n;
  }

  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (d_[i] != o.d_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank_; ++i) {
      if (i) s += "x";
      s += std::to_string(d_[i]);
    }
    return s + "]";
  }

private:
  int rank_ = 0;
  std::array<int64_t, 4> d_{{0, 0, 0, 0}};
};

// Dense double tensor with value (deep-copy) semantics. Ops that overwrite
// every element allocate with uninit() to skip the zero fill.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(const Shape& s, double fill = 0.0) : Tensor(uninit(s)) {
    std::fill(data_.get(), data_.get() + n_, fill);
  }

  static Tensor uninit(const Shape& s) {
    Tensor t;
    t.shape_ = s;
    t.n_ = s.numel();
    t.data_ = std::unique_ptr<double[]>(new double[static_cast<size_t>(t.n_)]);
    return t;
  }
  static Tensor zeros(const Shape& s) { return Tensor(s); }
  static Tensor full(const Shape& s, double v) { return Tensor(s, v); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }
  static Tensor from(const Shape& s, const std::vector<double>& data) {
    if (static_cast<int64_t>(data.size()) != s.numel())
      throw std::invalid_argument("Tensor::from: data size does not match shape " + s.str());
    Tensor t = uninit(s);
    std::copy(data.begin(), data.end(), t.data_.get());
    return t;
  }

  Tensor(const Tensor& o) : shape_(o.shape_), n_(o.n_) {
    if (o.data_) {
      data_ = std::unique_ptr<double[]>(new double[static_cast<size_t>(n_)]);
      std::memcpy(data_.get(), o.data_.get(), sizeof(double) * static_cast<size_t>(n_));
    }
  }
  Tensor& operator=(const Tensor& o) {
    if (this != &o) *this = Tensor(o);
    return *this;
  }
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return n_; }
  bool defined() const { return shape_.rank() > 0; }

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }
  double& operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }

  double item() const {
    if (n_ != 1) throw std::logic_error("Tensor::item on shape " + shape_.str());
    return data_[0];
  }

  bool operator==(const Tensor& o) const {
    if (shape_ != o.shape_) return false;
    for (int64_t i = 0; i < n_; ++i)
      if (data_[i] != o.data_[i]) return false;
    return true;
  }

private:
  Shape shape_;
  int64_t n_ = 0;
  std::unique_ptr<double[]> data_;
};

}  // namespace sggan
