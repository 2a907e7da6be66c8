#include "g2p2/graph_encoder.hpp"

#include <cmath>

#include "g2p2/errors.hpp"

namespace g2p2 {

void GraphEncoderConfig::validate() const {
  if (in_dim < 1 || hidden < 1 || out_dim < 1) {
    throw ValidationError("graph encoder: all dimensions must be >= 1");
  }
  if (leaky_slope < 0.0f || leaky_slope >= 1.0f) {
    throw ValidationError("graph encoder: leaky_slope must be in [0, 1)");
  }
}

GraphEncoderParams GraphEncoderParams::init(const GraphEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  GraphEncoderParams p;
  p.config = cfg;
  auto glorot = [&rng](Parameter& w, const std::string& name, std::size_t fan_in, std::size_t fan_out) {
    w.name = name;
    w.value = Tensor(fan_in, fan_out);
    w.grad = Tensor::zeros_like(w.value);
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.value.numel(); ++i) {
      w.value[i] = static_cast<float>(rng.uniform(-limit, limit));
    }
  };
  glorot(p.w1, "graph.w1", cfg.in_dim, cfg.hidden);
  glorot(p.w2, "graph.w2", cfg.hidden, cfg.out_dim);
  return p;
}

std::vector<Parameter*> GraphEncoderParams::trainable() { return {&w1, &w2}; }

CsrMatrix build_normalized_adjacency(const GraphTextCorpus& corpus) {
  const std::size_t n = corpus.num_nodes();
  std::vector<float> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt_deg[i] = 1.0f / std::sqrt(static_cast<float>(corpus.adjacency[i].size() + 1));
  }
  CsrMatrix m;
  m.rows = n;
  m.cols = n;
  m.row_ptr.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    m.row_ptr[i + 1] = m.row_ptr[i] + corpus.adjacency[i].size() + 1;
  }
  m.col.resize(m.row_ptr[n]);
  m.val.resize(m.row_ptr[n]);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = m.row_ptr[i];
    bool self_done = false;
    auto push = [&](std::size_t j) {
      m.col[k] = j;
      m.val[k] = inv_sqrt_deg[i] * inv_sqrt_deg[j];
      ++k;
    };
    for (int nbr : corpus.adjacency[i]) {
      const auto j = static_cast<std::size_t>(nbr);
      if (!self_done && j > i) {
        push(i);
        self_done = true;
      }
      push(j);
    }
    if (!self_done) push(i);
  }
  return m;
}

BoundGraphEncoder::BoundGraphEncoder(Tape& tape, GraphEncoderParams& params, const CsrMatrix* adjacency,
                                     bool trainable)
    : tape_(&tape), params_(&params), adjacency_(adjacency) {
  params.config.validate();
  w1_ = trainable ? tape.param(params.w1) : tape.constant(params.w1.value);
  w2_ = trainable ? tape.param(params.w2) : tape.constant(params.w2.value);
}

Var BoundGraphEncoder::encode_all(Var features) const {
  const GraphEncoderConfig& cfg = params_->config;
  if (features.value().cols() != cfg.in_dim) {
    throw ShapeError("graph encoder: feature width " + std::to_string(features.value().cols()) + " != in_dim " +
                     std::to_string(cfg.in_dim));
  }
  if (features.value().rows() != adjacency_->rows) {
    throw ShapeError("graph encoder: feature rows " + std::to_string(features.value().rows()) +
                     " != graph nodes " + std::to_string(adjacency_->rows));
  }
  Tape& t = *tape_;
  Var h = t.leaky_relu(t.spmm(adjacency_, t.matmul(features, w1_)), cfg.leaky_slope);
  return t.spmm(adjacency_, t.matmul(h, w2_));
}

Tensor encode_nodes(const GraphEncoderParams& params, const CsrMatrix& adjacency, const Tensor& features) {
  Tape tape;
  GraphEncoderParams& mut = const_cast<GraphEncoderParams&>(params);
  BoundGraphEncoder enc(tape, mut, &adjacency, /*trainable=*/false);
  return enc.encode_all(tape.constant(features)).value();
}

Tensor summary_embedding(const Tensor& text_embeddings, const GraphTextCorpus& corpus, int node, std::size_t eta,
                         Rng& rng) {
  if (text_embeddings.rows() != corpus.num_nodes()) {
    throw ShapeError("summary_embedding: one text embedding row per node required");
  }
  const std::vector<int> picked = sample_neighbors(corpus, node, eta, rng);
  const std::size_t d = text_embeddings.cols();
  Tensor out(1, d);
  if (picked.empty()) {
    CorpusWarnings::degree_zero_summaries.fetch_add(1, std::memory_order_relaxed);
    const float* src = text_embeddings.row_ptr(static_cast<std::size_t>(node));
    for (std::size_t j = 0; j < d; ++j) out[j] = src[j];
    return out;
  }
  for (int nbr : picked) {
    const float* src = text_embeddings.row_ptr(static_cast<std::size_t>(nbr));
    for (std::size_t j = 0; j < d; ++j) out[j] += src[j];
  }
  const float inv = 1.0f / static_cast<float>(picked.size());
  for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
  return out;
}

}  // namespace g2p2
