#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace muwarm {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixMap = Eigen::Map<Matrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const Matrix<Scalar>>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline Index numel(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  Index n = 1;
  for (Index extent : shape) {
    if (extent <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    n *= extent;
  }
  return n;
}

/// Dense row-major tensor. The last extent is the column dimension of
/// `matrix()`; all leading extents are flattened into rows.
template <typename Scalar>
class Tensor {
 public:
  using scalar_type = Scalar;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector<Scalar>::Zero(numel(shape_))) {}
  Tensor(Shape shape, Vector<Scalar> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != numel(shape_))
      throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " + to_string(shape_));
  }
  Tensor(Shape shape, std::initializer_list<Scalar> values) : shape_(std::move(shape)) {
    if (static_cast<Index>(values.size()) != numel(shape_))
      throw DimensionError("data length does not match shape " + to_string(shape_));
    data_.resize(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) data_[i++] = v;
  }

  static Tensor filled(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  Index cols() const { return shape_.empty() ? 0 : shape_.back(); }
  Index rows() const { return cols() == 0 ? 0 : size() / cols(); }

  MatrixMap<Scalar> matrix() { return MatrixMap<Scalar>(data_.data(), rows(), cols()); }
  ConstMatrixMap<Scalar> matrix() const { return ConstMatrixMap<Scalar>(data_.data(), rows(), cols()); }

  Vector<Scalar>& flat() { return data_; }
  const Vector<Scalar>& flat() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }
  Scalar& operator()(Index r, Index c) { return data_[r * cols() + c]; }
  Scalar operator()(Index r, Index c) const { return data_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return grad_.size() == data_.size() && data_.size() > 0; }
  /// Gradient buffer with the tensor's shape; allocated as zeros on first use.
  Vector<Scalar>& grad() {
    if (!has_grad()) grad_ = Vector<Scalar>::Zero(data_.size());
    return grad_;
  }
  const Vector<Scalar>& grad() const { return grad_; }
  void zero_grad() {
    if (has_grad()) grad_.setZero();
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Shape shape_;
  Vector<Scalar> data_;
  Vector<Scalar> grad_;
  bool requires_grad_ = false;
};

}  // namespace muwarm
