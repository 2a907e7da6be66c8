#pragma once

#include <string>
#include <vector>

#include "g2p2/autodiff.hpp"

namespace g2p2 {

enum class SimilarityKind { kTextNode, kTextSummary, kNodeSummary };

// Square in-batch similarity matrix with diagonal targets.
struct SimilarityBatch {
  Var matrix;                // [n x n]
  std::vector<int> targets;  // 0..n-1 (the diagonal)
  SimilarityKind kind = SimilarityKind::kTextNode;
};

// exp(tau) with tau at the standard contrastive initialization ln(1/0.07).
float temperature_init();

// Largest allowed tau so that exp(tau) <= 100; applied after each update.
void clamp_temperature(Parameter& tau);

// L2-normalizes the rows of a and b and records (a_n b_n^T) * exp(tau).
SimilarityBatch similarity_matrix(Tape& tape, Var a, Var b, Var tau, SimilarityKind kind);

// Symmetric multi-class N-pair loss: mean row-wise cross entropy against the
// diagonal, averaged with the same on the transpose.
Var npair_loss(Tape& tape, const SimilarityBatch& batch);

// Which loss terms participate (ablation switch).
struct LossMask {
  bool l1 = true;
  bool l2 = true;
  bool l3 = true;

  // Parses subsets like "L1", "L1,L3", "L1,L2,L3" (case-insensitive).
  static LossMask parse(const std::string& text);
  std::string str() const;
  bool any() const { return l1 || l2 || l3; }
};

// Masked combination l1 + lambda * (l2 + l3). lambda must be positive; the
// mask must select at least one term.
Var total_loss(Tape& tape, Var l1, Var l2, Var l3, float lambda, const LossMask& mask = {});

}  // namespace g2p2
