#include "g2p2/autodiff.hpp"

#include <cmath>
#include <utility>

#include "g2p2/errors.hpp"

namespace g2p2 {

std::atomic<std::uint64_t> NumericWarnings::zero_row_normalizations{0};

const Tensor& Var::value() const { return tape_->node(idx_).value; }
const Tensor& Var::grad() const { return tape_->node(idx_).grad; }

Var Tape::emplace(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop) {
  Node n;
  n.grad = Tensor::zeros_like(value);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_same_tape(Var v) const {
  if (v.tape() != this) throw Error("operands recorded on different tapes");
}

Var Tape::constant(Tensor v) { return emplace(std::move(v), false, nullptr); }

Var Tape::param(Parameter& p) {
  Parameter* pp = &p;
  Var out = emplace(p.value, true, nullptr);
  const std::size_t self = out.index();
  nodes_[self].backprop = [self, pp](Tape& t) {
    const Tensor& g = t.node(self).grad;
    if (!pp->grad.same_shape(g)) throw ShapeError("parameter gradient shape drifted: " + pp->name);
    float* dst = pp->grad.data();
    const float* src = g.data();
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner extents differ: " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.rows(), bv.cols());
  gemm_nn(av, bv, out, false);
  const std::size_t ia = a.index(), ib = b.index();
  Var res = emplace(std::move(out), req(a) || req(b), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, ib](Tape& t) {
    const Tensor& g = t.node(self).grad;
    Node& na = t.node(ia);
    Node& nb = t.node(ib);
    if (na.requires_grad) gemm_nt(g, nb.value, na.grad, true);  // dA += g * B^T
    if (nb.requires_grad) gemm_tn(na.value, g, nb.grad, true);  // dB += A^T * g
  };
  return res;
}

Var Tape::add(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("add: shape mismatch " + a.value().shape_str() + " vs " + b.value().shape_str());
  }
  Tensor out = a.value();
  const float* bp = b.value().data();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) op[i] += bp[i];
  const std::size_t ia = a.index(), ib = b.index();
  Var res = emplace(std::move(out), req(a) || req(b), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, ib](Tape& t) {
    const Tensor& g = t.node(self).grad;
    for (std::size_t which : {ia, ib}) {
      Node& n = t.node(which);
      if (!n.requires_grad) continue;
      float* dst = n.grad.data();
      const float* src = g.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
    }
  };
  return res;
}

Var Tape::sub(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("sub: shape mismatch " + a.value().shape_str() + " vs " + b.value().shape_str());
  }
  Tensor out = a.value();
  const float* bp = b.value().data();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) op[i] -= bp[i];
  const std::size_t ia = a.index(), ib = b.index();
  Var res = emplace(std::move(out), req(a) || req(b), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, ib](Tape& t) {
    const Tensor& g = t.node(self).grad;
    Node& na = t.node(ia);
    Node& nb = t.node(ib);
    if (na.requires_grad) {
      float* dst = na.grad.data();
      const float* src = g.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
    }
    if (nb.requires_grad) {
      float* dst = nb.grad.data();
      const float* src = g.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] -= src[i];
    }
  };
  return res;
}

Var Tape::mul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("mul: shape mismatch " + a.value().shape_str() + " vs " + b.value().shape_str());
  }
  Tensor out = a.value();
  const float* bp = b.value().data();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) op[i] *= bp[i];
  const std::size_t ia = a.index(), ib = b.index();
  Var res = emplace(std::move(out), req(a) || req(b), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, ib](Tape& t) {
    const Tensor& g = t.node(self).grad;
    Node& na = t.node(ia);
    Node& nb = t.node(ib);
    if (na.requires_grad) {
      float* dst = na.grad.data();
      const float* src = g.data();
      const float* other = nb.value.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i] * other[i];
    }
    if (nb.requires_grad) {
      float* dst = nb.grad.data();
      const float* src = g.data();
      const float* other = na.value.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i] * other[i];
    }
  };
  return res;
}

Var Tape::add_rowvec(Var a, Var bias) {
  check_same_tape(a);
  check_same_tape(bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_rowvec: bias " + bv.shape_str() + " does not match " + av.shape_str());
  }
  Tensor out = av;
  const std::size_t m = out.rows(), n = out.cols();
  for (std::size_t i = 0; i < m; ++i) {
    float* orow = out.row_ptr(i);
    const float* brow = bv.data();
    for (std::size_t j = 0; j < n; ++j) orow[j] += brow[j];
  }
  const std::size_t ia = a.index(), ib = bias.index();
  Var res = emplace(std::move(out), req(a) || req(bias), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, ib](Tape& t) {
    const Tensor& g = t.node(self).grad;
    Node& na = t.node(ia);
    Node& nb = t.node(ib);
    const std::size_t m = g.rows(), n = g.cols();
    if (na.requires_grad) {
      float* dst = na.grad.data();
      const float* src = g.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
    }
    if (nb.requires_grad) {
      float* dst = nb.grad.data();
      for (std::size_t i = 0; i < m; ++i) {
        const float* grow = g.row_ptr(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] += grow[j];
      }
    }
  };
  return res;
}

Var Tape::scale(Var a, float c) {
  check_same_tape(a);
  Tensor out = a.value();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) op[i] *= c;
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, c](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    float* dst = na.grad.data();
    const float* src = g.data();
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += c * src[i];
  };
  return res;
}

Var Tape::scale_by(Var a, Var s) {
  check_same_tape(a);
  check_same_tape(s);
  if (s.value().numel() != 1) throw ShapeError("scale_by: scale must be a scalar, got " + s.value().shape_str());
  const float sv = s.value()[0];
  Tensor out = a.value();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) op[i] *= sv;
  const std::size_t ia = a.index(), is = s.index();
  Var res = emplace(std::move(out), req(a) || req(s), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, is, sv](Tape& t) {
    const Tensor& g = t.node(self).grad;
    Node& na = t.node(ia);
    Node& ns = t.node(is);
    if (na.requires_grad) {
      float* dst = na.grad.data();
      const float* src = g.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += sv * src[i];
    }
    if (ns.requires_grad) {
      const float* src = g.data();
      const float* av = na.value.data();
      float acc = 0.0f;
      for (std::size_t i = 0; i < g.numel(); ++i) acc += src[i] * av[i];
      ns.grad[0] += acc;
    }
  };
  return res;
}

Var Tape::vexp(Var a) {
  check_same_tape(a);
  Tensor out = a.value();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) op[i] = std::exp(op[i]);
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const Tensor& y = t.node(self).value;
    float* dst = na.grad.data();
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i] * y[i];
  };
  return res;
}

Var Tape::row_softmax(Var a) {
  check_same_tape(a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const float* x = av.row_ptr(i);
    float* y = out.row_ptr(i);
    float mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    float sum = 0.0f;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const float inv = 1.0f / sum;
    for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const Tensor& y = t.node(self).value;
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const float* grow = g.row_ptr(i);
      const float* yrow = y.row_ptr(i);
      float* drow = na.grad.row_ptr(i);
      float inner = 0.0f;
      for (std::size_t j = 0; j < n; ++j) inner += grow[j] * yrow[j];
      for (std::size_t j = 0; j < n; ++j) drow[j] += yrow[j] * (grow[j] - inner);
    }
  };
  return res;
}

Var Tape::row_cross_entropy(Var logits, std::vector<int> targets) {
  check_same_tape(logits);
  const Tensor& lv = logits.value();
  const std::size_t m = lv.rows(), n = lv.cols();
  if (targets.size() != m) {
    throw ShapeError("row_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(m) + " rows");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= n) {
      throw ValidationError("row_cross_entropy: target " + std::to_string(targets[i]) + " out of range for " +
                            std::to_string(n) + " columns (row " + std::to_string(i) + ")");
    }
  }
  // Softmax rows are cached for the backward pass.
  Tensor probs(m, n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const float* x = lv.row_ptr(i);
    float* p = probs.row_ptr(i);
    float mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    float sum = 0.0f;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    const float inv = 1.0f / sum;
    for (std::size_t j = 0; j < n; ++j) p[j] *= inv;
    total += std::log(static_cast<double>(sum)) + static_cast<double>(mx) - static_cast<double>(x[targets[i]]);
  }
  Tensor out = Tensor::scalar(static_cast<float>(total / static_cast<double>(m)));
  const std::size_t ia = logits.index();
  Var res = emplace(std::move(out), req(logits), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, probs = std::move(probs), targets = std::move(targets)](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const float gscale = t.node(self).grad[0] / static_cast<float>(probs.rows());
    const std::size_t m = probs.rows(), n = probs.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const float* p = probs.row_ptr(i);
      float* drow = na.grad.row_ptr(i);
      for (std::size_t j = 0; j < n; ++j) drow[j] += gscale * p[j];
      drow[targets[i]] -= gscale;
    }
  };
  return res;
}

Var Tape::l2_normalize_rows(Var a) {
  check_same_tape(a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  constexpr float kEps = 1e-12f;
  Tensor out(m, n);
  std::vector<float> norms(m), denoms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const float* x = av.row_ptr(i);
    float ss = 0.0f;
    for (std::size_t j = 0; j < n; ++j) ss += x[j] * x[j];
    const float norm = std::sqrt(ss);
    if (norm < kEps) NumericWarnings::zero_row_normalizations.fetch_add(1, std::memory_order_relaxed);
    const float denom = norm + kEps;
    norms[i] = norm;
    denoms[i] = denom;
    float* y = out.row_ptr(i);
    const float inv = 1.0f / denom;
    for (std::size_t j = 0; j < n; ++j) y[j] = x[j] * inv;
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, norms = std::move(norms), denoms = std::move(denoms)](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const std::size_t m = g.rows(), n = g.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const float* grow = g.row_ptr(i);
      const float* x = na.value.row_ptr(i);
      float* drow = na.grad.row_ptr(i);
      const float denom = denoms[i];
      const float inv = 1.0f / denom;
      float xg = 0.0f;
      for (std::size_t j = 0; j < n; ++j) xg += grow[j] * x[j];
      // d/dx_j of x/(|x| + eps); the radial term vanishes as |x| -> 0.
      const float radial = norms[i] < 1e-12f ? 0.0f : xg / (denom * denom * norms[i]);
      for (std::size_t j = 0; j < n; ++j) drow[j] += grow[j] * inv - radial * x[j];
    }
  };
  return res;
}

Var Tape::leaky_relu(Var a, float negative_slope) {
  check_same_tape(a);
  Tensor out = a.value();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (op[i] < 0.0f) op[i] *= negative_slope;
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, negative_slope](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const float* x = na.value.data();
    float* dst = na.grad.data();
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i] * (x[i] > 0.0f ? 1.0f : negative_slope);
  };
  return res;
}

Var Tape::gelu(Var a) {
  check_same_tape(a);
  constexpr float kInvSqrt2 = 0.70710678118654752440f;
  Tensor out = a.value();
  float* op = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const float x = op[i];
    op[i] = 0.5f * x * (1.0f + std::erf(x * kInvSqrt2));
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    constexpr float kInvSqrt2 = 0.70710678118654752440f;
    constexpr float kInvSqrt2Pi = 0.39894228040143267794f;
    const Tensor& g = t.node(self).grad;
    const float* x = na.value.data();
    float* dst = na.grad.data();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const float xi = x[i];
      const float cdf = 0.5f * (1.0f + std::erf(xi * kInvSqrt2));
      const float pdf = kInvSqrt2Pi * std::exp(-0.5f * xi * xi);
      dst[i] += g[i] * (cdf + xi * pdf);
    }
  };
  return res;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, float eps) {
  check_same_tape(x);
  check_same_tape(gamma);
  check_same_tape(beta);
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gamma.value().rows() != 1 || gamma.value().cols() != n || !gamma.value().same_shape(beta.value())) {
    throw ShapeError("layer_norm: affine params must be [1x" + std::to_string(n) + "]");
  }
  Tensor out(m, n);
  Tensor xhat(m, n);
  std::vector<float> inv_std(m);
  const float* gam = gamma.value().data();
  const float* bet = beta.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    const float* xr = xv.row_ptr(i);
    float mean = 0.0f;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<float>(n);
    float var = 0.0f;
    for (std::size_t j = 0; j < n; ++j) {
      const float d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<float>(n);
    const float is = 1.0f / std::sqrt(var + eps);
    inv_std[i] = is;
    float* hr = xhat.row_ptr(i);
    float* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      hr[j] = (xr[j] - mean) * is;
      orow[j] = gam[j] * hr[j] + bet[j];
    }
  }
  const std::size_t ix = x.index(), ig = gamma.index(), ib = beta.index();
  Var res = emplace(std::move(out), req(x) || req(gamma) || req(beta), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t) {
    const Tensor& g = t.node(self).grad;
    Node& nx = t.node(ix);
    Node& ng = t.node(ig);
    Node& nb = t.node(ib);
    const std::size_t m = g.rows(), n = g.cols();
    const float* gam = ng.value.data();
    for (std::size_t i = 0; i < m; ++i) {
      const float* grow = g.row_ptr(i);
      const float* hr = xhat.row_ptr(i);
      if (ng.requires_grad) {
        float* dg = ng.grad.data();
        for (std::size_t j = 0; j < n; ++j) dg[j] += grow[j] * hr[j];
      }
      if (nb.requires_grad) {
        float* db = nb.grad.data();
        for (std::size_t j = 0; j < n; ++j) db[j] += grow[j];
      }
      if (nx.requires_grad) {
        float mean_dh = 0.0f, mean_dh_h = 0.0f;
        for (std::size_t j = 0; j < n; ++j) {
          const float dh = grow[j] * gam[j];
          mean_dh += dh;
          mean_dh_h += dh * hr[j];
        }
        mean_dh /= static_cast<float>(n);
        mean_dh_h /= static_cast<float>(n);
        float* dx = nx.grad.row_ptr(i);
        const float is = inv_std[i];
        for (std::size_t j = 0; j < n; ++j) {
          const float dh = grow[j] * gam[j];
          dx[j] += is * (dh - mean_dh - hr[j] * mean_dh_h);
        }
      }
    }
  };
  return res;
}

Var Tape::slice_rows(Var a, std::size_t row0, std::size_t nrows) {
  check_same_tape(a);
  const Tensor& av = a.value();
  if (row0 + nrows > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(row0) + ", " + std::to_string(row0 + nrows) + ") out of " +
                     av.shape_str());
  }
  const std::size_t n = av.cols();
  Tensor out(nrows, n);
  for (std::size_t i = 0; i < nrows; ++i) {
    const float* src = av.row_ptr(row0 + i);
    float* dst = out.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) dst[j] = src[j];
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, row0](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const std::size_t n = g.cols();
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const float* src = g.row_ptr(i);
      float* dst = na.grad.row_ptr(row0 + i);
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  };
  return res;
}

Var Tape::slice_cols(Var a, std::size_t col0, std::size_t ncols) {
  check_same_tape(a);
  const Tensor& av = a.value();
  if (col0 + ncols > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(col0) + ", " + std::to_string(col0 + ncols) + ") out of " +
                     av.shape_str());
  }
  const std::size_t m = av.rows();
  Tensor out(m, ncols);
  for (std::size_t i = 0; i < m; ++i) {
    const float* src = av.row_ptr(i) + col0;
    float* dst = out.row_ptr(i);
    for (std::size_t j = 0; j < ncols; ++j) dst[j] = src[j];
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, col0](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const float* src = g.row_ptr(i);
      float* dst = na.grad.row_ptr(i) + col0;
      for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j];
    }
  };
  return res;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  std::size_t total = 0;
  const std::size_t n = parts[0].value().cols();
  bool any_req = false;
  for (Var p : parts) {
    check_same_tape(p);
    if (p.value().cols() != n) throw ShapeError("concat_rows: column mismatch");
    total += p.value().rows();
    any_req = any_req || req(p);
  }
  Tensor out(total, n);
  std::size_t r = 0;
  std::vector<std::size_t> idxs, offsets;
  for (Var p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < pv.rows(); ++i) {
      const float* src = pv.row_ptr(i);
      float* dst = out.row_ptr(r + i);
      for (std::size_t j = 0; j < n; ++j) dst[j] = src[j];
    }
    idxs.push_back(p.index());
    offsets.push_back(r);
    r += pv.rows();
  }
  Var res = emplace(std::move(out), any_req, nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, idxs = std::move(idxs), offsets = std::move(offsets)](Tape& t) {
    const Tensor& g = t.node(self).grad;
    const std::size_t n = g.cols();
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      Node& np = t.node(idxs[k]);
      if (!np.requires_grad) continue;
      for (std::size_t i = 0; i < np.value.rows(); ++i) {
        const float* src = g.row_ptr(offsets[k] + i);
        float* dst = np.grad.row_ptr(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
      }
    }
  };
  return res;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  bool any_req = false;
  for (Var p : parts) {
    check_same_tape(p);
    if (p.value().rows() != m) throw ShapeError("concat_cols: row mismatch");
    total += p.value().cols();
    any_req = any_req || req(p);
  }
  Tensor out(m, total);
  std::size_t c = 0;
  std::vector<std::size_t> idxs, offsets;
  for (Var p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < m; ++i) {
      const float* src = pv.row_ptr(i);
      float* dst = out.row_ptr(i) + c;
      for (std::size_t j = 0; j < pv.cols(); ++j) dst[j] = src[j];
    }
    idxs.push_back(p.index());
    offsets.push_back(c);
    c += pv.cols();
  }
  Var res = emplace(std::move(out), any_req, nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, idxs = std::move(idxs), offsets = std::move(offsets)](Tape& t) {
    const Tensor& g = t.node(self).grad;
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      Node& np = t.node(idxs[k]);
      if (!np.requires_grad) continue;
      const std::size_t pc = np.value.cols();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const float* src = g.row_ptr(i) + offsets[k];
        float* dst = np.grad.row_ptr(i);
        for (std::size_t j = 0; j < pc; ++j) dst[j] += src[j];
      }
    }
  };
  return res;
}

Var Tape::transpose(Var a) {
  check_same_tape(a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    const float* src = av.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = src[j];
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const float* src = g.row_ptr(i);
      for (std::size_t j = 0; j < g.cols(); ++j) na.grad.at(j, i) += src[j];
    }
  };
  return res;
}

Var Tape::gather_rows(Var a, std::vector<int> indices) {
  check_same_tape(a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  for (int id : indices) {
    if (id < 0 || static_cast<std::size_t>(id) >= m) {
      throw ValidationError("gather_rows: index " + std::to_string(id) + " out of range for " +
                            std::to_string(m) + " rows");
    }
  }
  Tensor out(indices.size(), n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const float* src = av.row_ptr(static_cast<std::size_t>(indices[i]));
    float* dst = out.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) dst[j] = src[j];
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, indices = std::move(indices)](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const std::size_t n = g.cols();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const float* src = g.row_ptr(i);
      float* dst = na.grad.row_ptr(static_cast<std::size_t>(indices[i]));
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  };
  return res;
}

Var Tape::mean_rows(Var a) {
  check_same_tape(a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(1, n);
  float* op = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const float* src = av.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) op[j] += src[j];
  }
  const float inv = 1.0f / static_cast<float>(m);
  for (std::size_t j = 0; j < n; ++j) op[j] *= inv;
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, inv](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const std::size_t n = g.cols();
    for (std::size_t i = 0; i < na.value.rows(); ++i) {
      float* dst = na.grad.row_ptr(i);
      const float* src = g.data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += inv * src[j];
    }
  };
  return res;
}

Var Tape::sum_all(Var a) {
  check_same_tape(a);
  const Tensor& av = a.value();
  float s = 0.0f;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
  const std::size_t ia = a.index();
  Var res = emplace(Tensor::scalar(s), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const float g = t.node(self).grad[0];
    float* dst = na.grad.data();
    for (std::size_t i = 0; i < na.grad.numel(); ++i) dst[i] += g;
  };
  return res;
}

Var Tape::mean_all(Var a) {
  Var s = sum_all(a);
  return scale(s, 1.0f / static_cast<float>(a.value().numel()));
}

Var Tape::dropout(Var a, float p, Rng& rng) {
  check_same_tape(a);
  if (p < 0.0f || p >= 1.0f) throw ValidationError("dropout: p must be in [0, 1)");
  if (p == 0.0f) return a;
  const Tensor& av = a.value();
  const float keep = 1.0f - p;
  const float inv_keep = 1.0f / keep;
  std::vector<float> mask(av.numel());
  Tensor out = av;
  float* op = out.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.bernoulli(keep) ? inv_keep : 0.0f;
    op[i] *= mask[i];
  }
  const std::size_t ia = a.index();
  Var res = emplace(std::move(out), req(a), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ia, mask = std::move(mask)](Tape& t) {
    Node& na = t.node(ia);
    if (!na.requires_grad) return;
    const Tensor& g = t.node(self).grad;
    float* dst = na.grad.data();
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i] * mask[i];
  };
  return res;
}

Var Tape::spmm(const CsrMatrix* adj, Var x) {
  check_same_tape(x);
  const Tensor& xv = x.value();
  Tensor out(adj->rows, xv.cols());
  adj->apply(xv, out);
  const std::size_t ix = x.index();
  Var res = emplace(std::move(out), req(x), nullptr);
  const std::size_t self = res.index();
  nodes_[self].backprop = [self, ix, adj](Tape& t) {
    Node& nx = t.node(ix);
    if (!nx.requires_grad) return;
    adj->apply_transpose_add(t.node(self).grad, nx.grad);
  };
  return res;
}

void Tape::backward(Var loss) {
  check_same_tape(loss);
  if (loss.value().numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + loss.value().shape_str());
  }
  Node& ln = node(loss.index());
  ln.grad.fill(1.0f);
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backprop) n.backprop(*this);
  }
}

}  // namespace g2p2
