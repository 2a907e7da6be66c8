#pragma once

#include <vector>

#include "g2p2/autodiff.hpp"
#include "g2p2/corpus.hpp"
#include "g2p2/rng.hpp"

namespace g2p2 {

struct GraphEncoderConfig {
  std::size_t in_dim = 128;   // matches the node-feature width f
  std::size_t hidden = 128;
  std::size_t out_dim = 128;  // matches the text-encoder output dim d
  float leaky_slope = 0.01f;

  void validate() const;
};

// Two-layer GCN: Z = A_hat * LeakyReLU(A_hat * X * W1) * W2, second layer
// linear so embeddings are unconstrained in sign before normalization.
struct GraphEncoderParams {
  GraphEncoderConfig config;
  Parameter w1;  // [in_dim x hidden]
  Parameter w2;  // [hidden x out_dim]

  // Glorot-uniform weights.
  static GraphEncoderParams init(const GraphEncoderConfig& cfg, Rng& rng);
  std::vector<Parameter*> trainable();
};

// A_hat = D~^{-1/2} (A + I) D~^{-1/2} in CSR form; row i's nonzero columns
// are exactly {i} union N_i.
CsrMatrix build_normalized_adjacency(const GraphTextCorpus& corpus);

// Tape-recorded full-graph forward (adjacency must outlive the tape).
class BoundGraphEncoder {
 public:
  BoundGraphEncoder(Tape& tape, GraphEncoderParams& params, const CsrMatrix* adjacency, bool trainable);
  Var encode_all(Var features) const;

 private:
  Tape* tape_;
  GraphEncoderParams* params_;
  const CsrMatrix* adjacency_;
  Var w1_, w2_;
};

// Eager full-graph forward for inference.
Tensor encode_nodes(const GraphEncoderParams& params, const CsrMatrix& adjacency, const Tensor& features);

// Mean of text embeddings over up to eta sampled neighbors of `node`
// (rows of text_embeddings are indexed by node id). A degree-0 node falls
// back to its own text embedding and bumps CorpusWarnings.
Tensor summary_embedding(const Tensor& text_embeddings, const GraphTextCorpus& corpus, int node, std::size_t eta,
                         Rng& rng);

}  // namespace g2p2
