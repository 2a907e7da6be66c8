#include "g2p2/contrastive.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "g2p2/errors.hpp"

namespace g2p2 {

float temperature_init() { return std::log(1.0f / 0.07f); }

void clamp_temperature(Parameter& tau) {
  if (tau.value.numel() != 1) throw ShapeError("temperature must be a scalar parameter");
  const float max_tau = std::log(100.0f);
  if (tau.value[0] > max_tau) tau.value[0] = max_tau;
}

SimilarityBatch similarity_matrix(Tape& tape, Var a, Var b, Var tau, SimilarityKind kind) {
  const std::size_t n = a.value().rows();
  if (n == 0) throw ValidationError("similarity_matrix: empty batch");
  if (b.value().rows() != n || b.value().cols() != a.value().cols()) {
    throw ShapeError("similarity_matrix: shape mismatch " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  }
  if (tau.value().numel() != 1) throw ShapeError("similarity_matrix: tau must be a scalar");
  Var an = tape.l2_normalize_rows(a);
  Var bn = tape.l2_normalize_rows(b);
  Var cos = tape.matmul(an, tape.transpose(bn));
  SimilarityBatch batch;
  batch.matrix = tape.scale_by(cos, tape.vexp(tau));
  batch.kind = kind;
  batch.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) batch.targets[i] = static_cast<int>(i);
  return batch;
}

Var npair_loss(Tape& tape, const SimilarityBatch& batch) {
  const Tensor& m = batch.matrix.value();
  if (m.rows() != m.cols()) throw ShapeError("npair_loss: matrix must be square, got " + m.shape_str());
  if (batch.targets.size() != m.rows()) throw ShapeError("npair_loss: target count mismatch");
  Var row_ce = tape.row_cross_entropy(batch.matrix, batch.targets);
  Var col_ce = tape.row_cross_entropy(tape.transpose(batch.matrix), batch.targets);
  return tape.scale(tape.add(row_ce, col_ce), 0.5f);
}

LossMask LossMask::parse(const std::string& text) {
  LossMask mask{false, false, false};
  std::string token;
  auto flush = [&]() {
    if (token.empty()) return;
    std::string low;
    for (char c : token) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (low == "l1") {
      mask.l1 = true;
    } else if (low == "l2") {
      mask.l2 = true;
    } else if (low == "l3") {
      mask.l3 = true;
    } else {
      throw ValidationError("loss mask: unknown term '" + token + "' (expected subset of L1,L2,L3)");
    }
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '+') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  if (!mask.any()) throw ValidationError("loss mask: no terms selected");
  return mask;
}

std::string LossMask::str() const {
  std::string out;
  for (auto [on, name] : {std::pair{l1, "L1"}, {l2, "L2"}, {l3, "L3"}}) {
    if (!on) continue;
    if (!out.empty()) out.push_back(',');
    out += name;
  }
  return out.empty() ? "none" : out;
}

Var total_loss(Tape& tape, Var l1, Var l2, Var l3, float lambda, const LossMask& mask) {
  if (!(lambda > 0.0f)) throw ValidationError("total_loss: lambda must be positive");
  if (!mask.any()) throw ValidationError("total_loss: loss mask selects no terms");
  for (Var v : {l1, l2, l3}) {
    if (v.value().numel() != 1) throw ShapeError("total_loss: loss terms must be scalars");
  }
  bool have = false;
  Var acc;
  auto accumulate = [&](Var term) {
    acc = have ? tape.add(acc, term) : term;
    have = true;
  };
  if (mask.l2) accumulate(l2);
  if (mask.l3) accumulate(l3);
  if (have) acc = tape.scale(acc, lambda);
  if (mask.l1) accumulate(l1);
  return acc;
}

}  // namespace g2p2
