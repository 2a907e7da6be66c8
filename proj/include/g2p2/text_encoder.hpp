#pragma once

#include <string>
#include <vector>

#include "g2p2/autodiff.hpp"
#include "g2p2/rng.hpp"

namespace g2p2 {

enum class Pooling { kMean, kLastToken };

struct TextEncoderConfig {
  std::size_t layers = 2;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t max_len = 128;
  std::size_t vocab_size = 0;  // set from the corpus vocabulary
  std::size_t output_dim = 128;
  float dropout = 0.0f;
  Pooling pooling = Pooling::kMean;

  std::size_t head_dim() const { return width / heads; }
  void validate() const;
};

// Transformer parameters: token + learned positional embeddings, pre-LN
// attention/feed-forward blocks, a final layer norm, and a width->output_dim
// projection. Parameter names are stable and used as checkpoint blob keys.
struct TextEncoderParams {
  struct Layer {
    Parameter ln1_gamma, ln1_beta;
    Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter ln2_gamma, ln2_beta;
    Parameter w_ff1, b_ff1, w_ff2, b_ff2;
  };

  TextEncoderConfig config;
  Parameter token_embedding;     // [vocab_size x width]
  Parameter position_embedding;  // [max_len x width]
  std::vector<Layer> layers;
  Parameter final_ln_gamma, final_ln_beta;
  Parameter projection;  // [width x output_dim], no bias

  // Truncated normal (std 0.02) weights, zero biases, unit layer-norm gains.
  static TextEncoderParams init(const TextEncoderConfig& cfg, Rng& rng);
  std::vector<Parameter*> trainable();
};

// Records the encoder forward on a tape. With trainable=false the parameters
// enter the tape as constants: gradients still flow through the encoder to
// its inputs (the continuous-prompt pathway) but never into the weights.
class BoundTextEncoder {
 public:
  BoundTextEncoder(Tape& tape, TextEncoderParams& params, bool trainable, Rng* dropout_rng = nullptr);

  const TextEncoderConfig& config() const { return params_->config; }
  Var token_table() const { return tok_emb_; }

  // Token + positional embedding rows for a full padded sequence
  // (ids.size() == max_len required; every id < vocab_size).
  Var embed_tokens(const std::vector<int>& ids) const;

  // Runs the transformer over the first true_length rows of `input`
  // ([L x width], L >= true_length) and returns a [1 x output_dim] embedding.
  // Positions past true_length never influence the result.
  Var encode_input(Var input, std::size_t true_length) const;

  // embed_tokens + encode_input, touching only the first true_length rows.
  Var encode_tokens(const std::vector<int>& ids, std::size_t true_length) const;

  // Continuous-prompt pathway: the given rows ([L x width], L <= max_len) are
  // used as input embeddings directly; positional embeddings for positions
  // 0..L-1 are added before encoding.
  Var encode_continuous(Var rows) const;

 private:
  Tape* tape_;
  TextEncoderParams* params_;
  Rng* dropout_rng_;
  Var tok_emb_, pos_emb_;
  struct BoundLayer {
    Var ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::vector<BoundLayer> layers_;
  Var fin_g, fin_b, proj_;

  Var bind(Parameter& p, bool trainable) const;
};

// Convenience for inference: encodes token ids through a scratch tape.
Tensor encode_text_eager(TextEncoderParams& params, const std::vector<int>& ids, std::size_t true_length);

}  // namespace g2p2
