#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthlab {

/// Dense row-major tensor of doubles with dynamic rank (0..4).
/// Rank-0 tensors hold a single scalar. Shapes use the conventions
///   images      [N, C, H, W]
///   disparities [N, H, W]
///   features    [N, F]
class Tensor {
 public:
  using Shape = std::vector<int64_t>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }
  Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), fill);
  }
  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != count(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor scalar(double v) {
    Tensor t{Shape{}};
    t.data_[0] = v;
    return t;
  }
  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor ones(Shape s) { return Tensor(std::move(s), 1.0); }
  static Tensor full(Shape s, double v) { return Tensor(std::move(s), v); }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double item() const {
    if (size() != 1) throw std::logic_error("Tensor::item on non-scalar tensor");
    return data_[0];
  }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Indexed access; caller is responsible for matching the tensor's rank.
  double& at(int64_t a) { return data_[static_cast<size_t>(a)]; }
  double& at(int64_t a, int64_t b) { return data_[static_cast<size_t>(a * shape_[1] + b)]; }
  double& at(int64_t a, int64_t b, int64_t c) {
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  double& at(int64_t a, int64_t b, int64_t c, int64_t d) {
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
  double at(int64_t a) const { return data_[static_cast<size_t>(a)]; }
  double at(int64_t a, int64_t b) const { return data_[static_cast<size_t>(a * shape_[1] + b)]; }
  double at(int64_t a, int64_t b, int64_t c) const {
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  double at(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(Shape s) const {
    if (count(s) != size()) throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    return Tensor(std::move(s), data_);
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  static int64_t count(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static std::string shape_str(const Shape& s);
  std::string shape_str() const { return shape_str(shape_); }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws std::invalid_argument with a contextual message unless cond holds.
void check(bool cond, const std::string& msg);

}  // namespace depthlab
