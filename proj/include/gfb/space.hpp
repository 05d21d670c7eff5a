#pragma once

// Weighted product space H^n over dense real blocks.
//
// A Block is a rows x cols array stored row-major (a vector of length d is a
// d x 1 block). A ProductPoint holds n blocks of one shape and is measured in
// the inner product <<x, y>> = sum_i w_i <x_i, y_i>, with weights w_i in ]0, 1]
// summing to one. All reductions use pairwise summation so results do not
// depend on how a caller chunks its data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gfb/errors.hpp"

namespace gfb {

namespace detail {

inline constexpr std::size_t kPairwiseLeaf = 16;

inline double pairwise_dot(const double* a, const double* b, std::size_t n) {
  if (n <= kPairwiseLeaf) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_dot(a, b, half) + pairwise_dot(a + half, b + half, n - half);
}

inline double pairwise_sum(const double* a, std::size_t n) {
  if (n <= kPairwiseLeaf) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(a, half) + pairwise_sum(a + half, n - half);
}

inline double pairwise_abs_sum(const double* a, std::size_t n) {
  if (n <= kPairwiseLeaf) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i]);
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_abs_sum(a, half) + pairwise_abs_sum(a + half, n - half);
}

}  // namespace detail

/// Sum of `values` by pairwise (tree) reduction.
inline double pairwise_sum(std::span<const double> values) {
  return detail::pairwise_sum(values.data(), values.size());
}

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(Shape s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

/// Dense real array of fixed shape, row-major.
class Block {
 public:
  Block() = default;
  Block(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  explicit Block(Shape shape, double fill = 0.0) : Block(shape.rows, shape.cols, fill) {}

  /// Takes ownership of `values` (row-major); throws on size mismatch or non-finite entries.
  Block(std::size_t rows, std::size_t cols, std::vector<double> values)
      : shape_{rows, cols}, data_(std::move(values)) {
    if (data_.size() != rows * cols)
      throw DimensionError("block data has " + std::to_string(data_.size()) +
                           " entries, shape " + to_string(shape_) + " needs " +
                           std::to_string(rows * cols));
    for (double v : data_)
      if (!std::isfinite(v)) throw ParameterError("block entries must be finite");
  }

  /// Column vector from a list of values.
  static Block vector(std::initializer_list<double> values) {
    return Block(values.size(), 1, std::vector<double>(values));
  }
  static Block vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Block(n, 1, std::move(values));
  }
  static Block matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Block(rows, cols, std::vector<double>(values));
  }
  static Block identity(std::size_t n) {
    Block b(n, n);
    for (std::size_t i = 0; i < n; ++i) b(i, i) = 1.0;
    return b;
  }

  Shape shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Block& operator+=(const Block& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Block& operator-=(const Block& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Block& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  /// this += s * o
  Block& add_scaled(double s, const Block& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    return *this;
  }

  friend Block operator+(Block a, const Block& b) { return a += b; }
  friend Block operator-(Block a, const Block& b) { return a -= b; }
  friend Block operator*(double s, Block a) { return a *= s; }
  friend Block operator-(Block a) { return a *= -1.0; }

  friend bool operator==(const Block&, const Block&) = default;

  void require_same_shape(const Block& o) const {
    if (shape_ != o.shape_)
      throw DimensionError("block shape mismatch: " + to_string(shape_) + " vs " +
                           to_string(o.shape_));
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Frobenius inner product.
inline double dot(const Block& a, const Block& b) {
  a.require_same_shape(b);
  return detail::pairwise_dot(a.data().data(), b.data().data(), a.size());
}

inline double norm(const Block& a) {
  return std::sqrt(detail::pairwise_dot(a.data().data(), a.data().data(), a.size()));
}

inline double norm_l1(const Block& a) { return detail::pairwise_abs_sum(a.data().data(), a.size()); }

inline double max_abs(const Block& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline Block transpose(const Block& a) {
  Block t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

/// Dense product a * b.
inline Block matmul(const Block& a, const Block& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + to_string(a.shape()) + " times " + to_string(b.shape()));
  Block out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

/// Positive weights in ]0, 1] summing to one (absolute tolerance 1e-12).
class Weights {
 public:
  static constexpr double kSumTolerance = 1e-12;

  Weights() : w_{1.0} {}
  explicit Weights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw ParameterError("weights: need at least one weight");
    for (double v : w_)
      if (!(v > 0.0 && v <= 1.0))
        throw ParameterError("weights: every weight must lie in ]0, 1], got " + std::to_string(v));
    const double s = pairwise_sum(w_);
    if (std::abs(s - 1.0) > kSumTolerance)
      throw ParameterError("weights: must sum to 1 within 1e-12, sum is " + std::to_string(s));
  }
  Weights(std::initializer_list<double> w) : Weights(std::vector<double>(w)) {}

  /// Equal weights 1/n.
  static Weights uniform(std::size_t n) {
    if (n == 0) throw ParameterError("weights: need at least one weight");
    return Weights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

/// Element of H^n: n blocks sharing one shape.
class ProductPoint {
 public:
  ProductPoint() = default;

  explicit ProductPoint(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw DimensionError("product point needs at least one block");
    for (const auto& b : blocks_) blocks_.front().require_same_shape(b);
  }

  static ProductPoint zeros(std::size_t n, Shape shape) {
    if (n == 0) throw DimensionError("product point needs at least one block");
    return ProductPoint(std::vector<Block>(n, Block(shape)));
  }

  std::size_t size() const noexcept { return blocks_.size(); }
  Shape shape() const { return blocks_.empty() ? Shape{} : blocks_.front().shape(); }

  const Block& operator[](std::size_t i) const { return blocks_[i]; }
  Block& operator[](std::size_t i) { return blocks_[i]; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  bool all_finite() const noexcept {
    return std::all_of(blocks_.begin(), blocks_.end(), [](const Block& b) { return b.all_finite(); });
  }

  ProductPoint& operator+=(const ProductPoint& o) {
    require_compatible(o);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += o.blocks_[i];
    return *this;
  }
  ProductPoint& operator-=(const ProductPoint& o) {
    require_compatible(o);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] -= o.blocks_[i];
    return *this;
  }
  ProductPoint& operator*=(double s) {
    for (auto& b : blocks_) b *= s;
    return *this;
  }
  ProductPoint& add_scaled(double s, const ProductPoint& o) {
    require_compatible(o);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].add_scaled(s, o.blocks_[i]);
    return *this;
  }

  friend ProductPoint operator+(ProductPoint a, const ProductPoint& b) { return a += b; }
  friend ProductPoint operator-(ProductPoint a, const ProductPoint& b) { return a -= b; }
  friend ProductPoint operator*(double s, ProductPoint a) { return a *= s; }

  friend bool operator==(const ProductPoint&, const ProductPoint&) = default;

  void require_compatible(const ProductPoint& o) const {
    if (blocks_.size() != o.blocks_.size())
      throw DimensionError("product point arity mismatch: " + std::to_string(blocks_.size()) +
                           " vs " + std::to_string(o.blocks_.size()));
    if (!blocks_.empty()) blocks_.front().require_same_shape(o.blocks_.front());
  }

 private:
  std::vector<Block> blocks_;
};

namespace detail {

inline void require_arity(const ProductPoint& x, const Weights& w) {
  if (x.size() != w.size())
    throw DimensionError("product point has " + std::to_string(x.size()) + " blocks but " +
                         std::to_string(w.size()) + " weights were given");
}

}  // namespace detail

/// <<x, y>> = sum_i w_i <x_i, y_i>.
inline double weighted_inner(const ProductPoint& x, const ProductPoint& y, const Weights& w) {
  x.require_compatible(y);
  detail::require_arity(x, w);
  std::vector<double> terms(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) terms[i] = w[i] * dot(x[i], y[i]);
  return pairwise_sum(terms);
}

inline double weighted_norm(const ProductPoint& x, const Weights& w) {
  return std::sqrt(std::max(0.0, weighted_inner(x, x, w)));
}

/// sum_i w_i z_i, the block that P_S replicates.
inline Block weighted_average(const ProductPoint& z, const Weights& w) {
  detail::require_arity(z, w);
  Block out(z.shape());
  std::vector<double> terms(z.size());
  const std::size_t m = out.size();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < z.size(); ++i) terms[i] = w[i] * z[i][j];
    out[j] = pairwise_sum(terms);
  }
  return out;
}

/// Canonical isometry x -> (x, ..., x).
inline ProductPoint lift(const Block& x, std::size_t n) {
  if (n == 0) throw DimensionError("lift: arity must be at least 1");
  return ProductPoint(std::vector<Block>(n, x));
}

/// Orthogonal projection onto the diagonal subspace {x_1 = ... = x_n}.
inline ProductPoint project_diagonal(const ProductPoint& z, const Weights& w) {
  return lift(weighted_average(z, w), z.size());
}

/// 2 P_S - Id.
inline ProductPoint reflect_diagonal(const ProductPoint& z, const Weights& w) {
  ProductPoint out = project_diagonal(z, w);
  out *= 2.0;
  out -= z;
  return out;
}

}  // namespace gfb
