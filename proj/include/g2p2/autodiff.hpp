#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "g2p2/rng.hpp"
#include "g2p2/tensor.hpp"

namespace g2p2 {

// A trainable weight with its gradient and Adam state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor::zeros_like(value)),
        adam_m(Tensor::zeros_like(value)),
        adam_v(Tensor::zeros_like(value)) {}

  std::size_t numel() const { return value.numel(); }
  void zero_grad() { grad.fill(0.0f); }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
class Var {
public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t index() const { return idx_; }

private:
  friend class Tape;
  Var(Tape* t, std::size_t i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  std::size_t idx_ = 0;
};

// Counters for soft numeric fallbacks. Read and reset from tests and logs.
struct NumericWarnings {
  static std::atomic<std::uint64_t> zero_row_normalizations;
};

// Recording context for one forward/backward pass. Operations append nodes;
// backward() walks them in reverse. A tape and the parameters bound to it are
// confined to a single thread; values are immutable once produced.
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor v);
  // Leaf whose gradient is accumulated into p.grad during backward().
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // a is [m x n], bias is [1 x n], added to every row.
  Var add_rowvec(Var a, Var bias);
  Var scale(Var a, float c);
  // Elementwise a * s where s is a scalar node.
  Var scale_by(Var a, Var s);
  Var vexp(Var a);
  Var row_softmax(Var a);
  // Mean over rows of -log softmax(logits)[row, target].
  Var row_cross_entropy(Var logits, std::vector<int> targets);
  Var l2_normalize_rows(Var a);
  Var leaky_relu(Var a, float negative_slope);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);
  Var slice_rows(Var a, std::size_t row0, std::size_t nrows);
  Var slice_cols(Var a, std::size_t col0, std::size_t ncols);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var transpose(Var a);
  // out[i] = a[indices[i]]; backward scatter-adds, so repeats accumulate.
  Var gather_rows(Var a, std::vector<int> indices);
  Var mean_rows(Var a);
  Var sum_all(Var a);
  Var mean_all(Var a);
  // Inverted dropout; identity when p == 0.
  Var dropout(Var a, float p, Rng& rng);
  // adj is held by pointer and must outlive the tape.
  Var spmm(const CsrMatrix* adj, Var x);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;  // distributes this node's grad to parents
  };

  Node& node(std::size_t i) { return nodes_[i]; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  Var emplace(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
  void check_same_tape(Var v) const;
  bool req(Var v) const { return nodes_[v.idx_].requires_grad; }

  friend class Var;
  std::deque<Node> nodes_;
};

}  // namespace g2p2
