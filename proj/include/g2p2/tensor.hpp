#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "g2p2/errors.hpp"

namespace g2p2 {

// Dense row-major float32 tensor. Rank 1 and 2 are what the rest of the
// library uses; scalars are shape {1}.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::size_t rows, std::size_t cols);

  static Tensor scalar(float v);
  static Tensor row(std::initializer_list<float> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);
  static Tensor zeros_like(const Tensor& other);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // rows()/cols() view rank-1 tensors as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float* row_ptr(std::size_t i) { return data_.data() + i * cols(); }
  const float* row_ptr(std::size_t i) const { return data_.data() + i * cols(); }

  float& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(float v);

  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  std::string shape_str() const;

private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

// C = A * B (or C += with accumulate). A is [m x k], B is [k x n].
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
// C = A * B^T. A is [m x k], B is [n x k].
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
// C = A^T * B. A is [m x k], B is [m x n], C is [k x n].
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);

// Compressed sparse row matrix with float values. Used for the normalized
// adjacency; values are fixed once built.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // size rows + 1
  std::vector<int> col;
  std::vector<float> val;

  // y = A * x, x dense [cols x d], y dense [rows x d].
  void apply(const Tensor& x, Tensor& y) const;
  // y += A^T * x, x dense [rows x d], y dense [cols x d].
  void apply_transpose_add(const Tensor& x, Tensor& y) const;
  float entry(std::size_t i, int j) const;
};

}  // namespace g2p2
