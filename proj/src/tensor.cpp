#include "g2p2/tensor.hpp"

#include <cstring>
#include <sstream>

namespace g2p2 {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str());
  }
  data_.assign(product(shape_), 0.0f);
}

Tensor::Tensor(std::size_t rows, std::size_t cols) : Tensor(std::vector<std::size_t>{rows, cols}) {}

Tensor Tensor::scalar(float v) {
  Tensor t(std::vector<std::size_t>{1});
  t.data_[0] = v;
  return t;
}

Tensor Tensor::row(std::initializer_list<float> values) {
  Tensor t(1, values.size());
  std::size_t i = 0;
  for (float v : values) t.data_[i++] = v;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix initializer");
    for (float v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor Tensor::zeros_like(const Tensor& other) { return Tensor(other.shape_); }

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() == 1) return 1;
  throw ShapeError("rows() on tensor of rank " + std::to_string(shape_.size()));
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  throw ShapeError("cols() on tensor of rank " + std::to_string(shape_.size()));
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (product(shape) != numel()) {
    throw ShapeError("reshape from " + shape_str() + " changes element count");
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

namespace {

// Dot product with four independent accumulators combined in a fixed order.
float dot(const float* a, const float* b, std::size_t n) {
  float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3));
}

void check_2d(const Tensor& t, const char* who) {
  if (t.ndim() != 2) throw ShapeError(std::string(who) + ": expected rank-2 tensor, got " + t.shape_str());
}

}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  check_2d(a, "gemm_nn");
  check_2d(b, "gemm_nn");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeError("gemm_nn: inner extents differ: " + a.shape_str() + " vs " + b.shape_str());
  if (c.rows() != m || c.cols() != n) throw ShapeError("gemm_nn: bad output shape " + c.shape_str());
  if (!accumulate) c.fill(0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c.row_ptr(i);
    const float* arow = a.row_ptr(i);
    for (std::size_t l = 0; l < k; ++l) {
      const float av = arow[l];
      if (av == 0.0f) continue;
      const float* brow = b.row_ptr(l);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  check_2d(a, "gemm_nt");
  check_2d(b, "gemm_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw ShapeError("gemm_nt: inner extents differ: " + a.shape_str() + " vs " + b.shape_str());
  if (c.rows() != m || c.cols() != n) throw ShapeError("gemm_nt: bad output shape " + c.shape_str());
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a.row_ptr(i);
    float* crow = c.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      const float d = dot(arow, b.row_ptr(j), k);
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  check_2d(a, "gemm_tn");
  check_2d(b, "gemm_tn");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != m) throw ShapeError("gemm_tn: outer extents differ: " + a.shape_str() + " vs " + b.shape_str());
  if (c.rows() != k || c.cols() != n) throw ShapeError("gemm_tn: bad output shape " + c.shape_str());
  if (!accumulate) c.fill(0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a.row_ptr(i);
    const float* brow = b.row_ptr(i);
    for (std::size_t l = 0; l < k; ++l) {
      const float av = arow[l];
      if (av == 0.0f) continue;
      float* crow = c.row_ptr(l);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void CsrMatrix::apply(const Tensor& x, Tensor& y) const {
  const std::size_t d = x.cols();
  if (x.rows() != cols) throw ShapeError("CsrMatrix::apply: input rows " + x.shape_str());
  if (y.rows() != rows || y.cols() != d) throw ShapeError("CsrMatrix::apply: output shape " + y.shape_str());
  y.fill(0.0f);
  for (std::size_t i = 0; i < rows; ++i) {
    float* yrow = y.row_ptr(i);
    for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
      const float v = val[e];
      const float* xrow = x.row_ptr(static_cast<std::size_t>(col[e]));
      for (std::size_t j = 0; j < d; ++j) yrow[j] += v * xrow[j];
    }
  }
}

void CsrMatrix::apply_transpose_add(const Tensor& x, Tensor& y) const {
  const std::size_t d = x.cols();
  if (x.rows() != rows) throw ShapeError("CsrMatrix::apply_transpose_add: input rows " + x.shape_str());
  if (y.rows() != cols || y.cols() != d) throw ShapeError("CsrMatrix::apply_transpose_add: output shape " + y.shape_str());
  for (std::size_t i = 0; i < rows; ++i) {
    const float* xrow = x.row_ptr(i);
    for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
      const float v = val[e];
      float* yrow = y.row_ptr(static_cast<std::size_t>(col[e]));
      for (std::size_t j = 0; j < d; ++j) yrow[j] += v * xrow[j];
    }
  }
}

float CsrMatrix::entry(std::size_t i, int j) const {
  for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
    if (col[e] == j) return val[e];
  }
  return 0.0f;
}

}  // namespace g2p2
