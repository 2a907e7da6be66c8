#include "g2p2/text_encoder.hpp"

#include <cmath>

#include "g2p2/errors.hpp"

namespace g2p2 {

void TextEncoderConfig::validate() const {
  if (layers < 1) throw ValidationError("text encoder: layers must be >= 1");
  if (width < 1 || heads < 1 || width % heads != 0) {
    throw ValidationError("text encoder: width must be a positive multiple of heads");
  }
  if (max_len < 1) throw ValidationError("text encoder: max_len must be >= 1");
  if (vocab_size < 2) throw ValidationError("text encoder: vocab_size must be >= 2");
  if (output_dim < 1) throw ValidationError("text encoder: output_dim must be >= 1");
  if (dropout < 0.0f || dropout >= 1.0f) throw ValidationError("text encoder: dropout must be in [0, 1)");
}

namespace {

Parameter make_param(std::string name, std::size_t rows, std::size_t cols) {
  Parameter p;
  p.name = std::move(name);
  p.value = Tensor(rows, cols);
  p.grad = Tensor::zeros_like(p.value);
  return p;
}

void fill_trunc_normal(Parameter& p, Rng& rng, float std) {
  for (std::size_t i = 0; i < p.value.numel(); ++i) {
    p.value[i] = static_cast<float>(rng.truncated_normal(0.0, std));
  }
}

}  // namespace

TextEncoderParams TextEncoderParams::init(const TextEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  constexpr float kStd = 0.02f;
  TextEncoderParams p;
  p.config = cfg;
  p.token_embedding = make_param("text.tok_emb", cfg.vocab_size, cfg.width);
  p.position_embedding = make_param("text.pos_emb", cfg.max_len, cfg.width);
  fill_trunc_normal(p.token_embedding, rng, kStd);
  fill_trunc_normal(p.position_embedding, rng, kStd);
  const std::size_t ff = 4 * cfg.width;
  p.layers.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string base = "text.layer" + std::to_string(l) + ".";
    Layer& lay = p.layers[l];
    lay.ln1_gamma = make_param(base + "ln1.gamma", 1, cfg.width);
    lay.ln1_beta = make_param(base + "ln1.beta", 1, cfg.width);
    lay.ln1_gamma.value.fill(1.0f);
    lay.wq = make_param(base + "attn.wq", cfg.width, cfg.width);
    lay.bq = make_param(base + "attn.bq", 1, cfg.width);
    lay.wk = make_param(base + "attn.wk", cfg.width, cfg.width);
    lay.bk = make_param(base + "attn.bk", 1, cfg.width);
    lay.wv = make_param(base + "attn.wv", cfg.width, cfg.width);
    lay.bv = make_param(base + "attn.bv", 1, cfg.width);
    lay.wo = make_param(base + "attn.wo", cfg.width, cfg.width);
    lay.bo = make_param(base + "attn.bo", 1, cfg.width);
    lay.ln2_gamma = make_param(base + "ln2.gamma", 1, cfg.width);
    lay.ln2_beta = make_param(base + "ln2.beta", 1, cfg.width);
    lay.ln2_gamma.value.fill(1.0f);
    lay.w_ff1 = make_param(base + "ff.w1", cfg.width, ff);
    lay.b_ff1 = make_param(base + "ff.b1", 1, ff);
    lay.w_ff2 = make_param(base + "ff.w2", ff, cfg.width);
    lay.b_ff2 = make_param(base + "ff.b2", 1, cfg.width);
    for (Parameter* w : {&lay.wq, &lay.wk, &lay.wv, &lay.wo, &lay.w_ff1, &lay.w_ff2}) {
      fill_trunc_normal(*w, rng, kStd);
    }
  }
  p.final_ln_gamma = make_param("text.final_ln.gamma", 1, cfg.width);
  p.final_ln_beta = make_param("text.final_ln.beta", 1, cfg.width);
  p.final_ln_gamma.value.fill(1.0f);
  p.projection = make_param("text.proj", cfg.width, cfg.output_dim);
  fill_trunc_normal(p.projection, rng, kStd);
  return p;
}

std::vector<Parameter*> TextEncoderParams::trainable() {
  std::vector<Parameter*> out{&token_embedding, &position_embedding};
  for (Layer& l : layers) {
    for (Parameter* p : {&l.ln1_gamma, &l.ln1_beta, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                         &l.ln2_gamma, &l.ln2_beta, &l.w_ff1, &l.b_ff1, &l.w_ff2, &l.b_ff2}) {
      out.push_back(p);
    }
  }
  out.push_back(&final_ln_gamma);
  out.push_back(&final_ln_beta);
  out.push_back(&projection);
  return out;
}

Var BoundTextEncoder::bind(Parameter& p, bool trainable) const {
  return trainable ? tape_->param(p) : tape_->constant(p.value);
}

BoundTextEncoder::BoundTextEncoder(Tape& tape, TextEncoderParams& params, bool trainable, Rng* dropout_rng)
    : tape_(&tape), params_(&params), dropout_rng_(dropout_rng) {
  params.config.validate();
  tok_emb_ = bind(params.token_embedding, trainable);
  pos_emb_ = bind(params.position_embedding, trainable);
  layers_.reserve(params.layers.size());
  for (TextEncoderParams::Layer& l : params.layers) {
    layers_.push_back({bind(l.ln1_gamma, trainable), bind(l.ln1_beta, trainable), bind(l.wq, trainable),
                       bind(l.bq, trainable), bind(l.wk, trainable), bind(l.bk, trainable), bind(l.wv, trainable),
                       bind(l.bv, trainable), bind(l.wo, trainable), bind(l.bo, trainable),
                       bind(l.ln2_gamma, trainable), bind(l.ln2_beta, trainable), bind(l.w_ff1, trainable),
                       bind(l.b_ff1, trainable), bind(l.w_ff2, trainable), bind(l.b_ff2, trainable)});
  }
  fin_g = bind(params.final_ln_gamma, trainable);
  fin_b = bind(params.final_ln_beta, trainable);
  proj_ = bind(params.projection, trainable);
}

Var BoundTextEncoder::embed_tokens(const std::vector<int>& ids) const {
  const TextEncoderConfig& cfg = params_->config;
  if (ids.size() != cfg.max_len) {
    throw ShapeError("embed_tokens: sequence length " + std::to_string(ids.size()) + " != max_len " +
                     std::to_string(cfg.max_len));
  }
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw ValidationError("embed_tokens: token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(cfg.vocab_size));
    }
  }
  Var tok = tape_->gather_rows(tok_emb_, ids);
  return tape_->add(tok, pos_emb_);
}

Var BoundTextEncoder::encode_input(Var input, std::size_t true_length) const {
  const TextEncoderConfig& cfg = params_->config;
  if (true_length == 0) throw ValidationError("encode_input: true_length must be >= 1");
  if (true_length > input.value().rows()) {
    throw ShapeError("encode_input: true_length " + std::to_string(true_length) + " exceeds input rows " +
                     std::to_string(input.value().rows()));
  }
  if (input.value().cols() != cfg.width) {
    throw ShapeError("encode_input: input width " + std::to_string(input.value().cols()) + " != " +
                     std::to_string(cfg.width));
  }
  Tape& t = *tape_;
  // Working only on the true-length prefix makes padding invariance
  // structural: padded positions never enter any computation.
  Var x = true_length == input.value().rows() ? input : t.slice_rows(input, 0, true_length);
  const std::size_t hd = cfg.head_dim();
  const float attn_scale = 1.0f / std::sqrt(static_cast<float>(hd));
  for (const BoundLayer& l : layers_) {
    Var h = t.layer_norm(x, l.ln1_g, l.ln1_b);
    Var q = t.add_rowvec(t.matmul(h, l.wq), l.bq);
    Var k = t.add_rowvec(t.matmul(h, l.wk), l.bk);
    Var v = t.add_rowvec(t.matmul(h, l.wv), l.bv);
    std::vector<Var> head_outputs;
    head_outputs.reserve(cfg.heads);
    for (std::size_t hidx = 0; hidx < cfg.heads; ++hidx) {
      Var qi = t.slice_cols(q, hidx * hd, hd);
      Var ki = t.slice_cols(k, hidx * hd, hd);
      Var vi = t.slice_cols(v, hidx * hd, hd);
      Var scores = t.scale(t.matmul(qi, t.transpose(ki)), attn_scale);
      Var attn = t.row_softmax(scores);
      head_outputs.push_back(t.matmul(attn, vi));
    }
    Var o = t.add_rowvec(t.matmul(t.concat_cols(head_outputs), l.wo), l.bo);
    if (cfg.dropout > 0.0f && dropout_rng_ != nullptr) o = t.dropout(o, cfg.dropout, *dropout_rng_);
    x = t.add(x, o);
    Var h2 = t.layer_norm(x, l.ln2_g, l.ln2_b);
    Var f = t.add_rowvec(t.matmul(t.gelu(t.add_rowvec(t.matmul(h2, l.w1), l.b1)), l.w2), l.b2);
    if (cfg.dropout > 0.0f && dropout_rng_ != nullptr) f = t.dropout(f, cfg.dropout, *dropout_rng_);
    x = t.add(x, f);
  }
  Var xn = t.layer_norm(x, fin_g, fin_b);
  Var pooled = cfg.pooling == Pooling::kMean ? t.mean_rows(xn) : t.slice_rows(xn, true_length - 1, 1);
  return t.matmul(pooled, proj_);
}

Var BoundTextEncoder::encode_tokens(const std::vector<int>& ids, std::size_t true_length) const {
  const TextEncoderConfig& cfg = params_->config;
  if (true_length == 0) throw ValidationError("encode_tokens: true_length must be >= 1");
  if (true_length > ids.size()) {
    throw ShapeError("encode_tokens: true_length exceeds sequence length");
  }
  // Equivalent to embed_tokens + encode_input but skips gathering padded
  // positions that the encoder would immediately slice away.
  std::vector<int> prefix(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(true_length, cfg.max_len)));
  if (prefix.size() > cfg.max_len) prefix.resize(cfg.max_len);
  for (int id : prefix) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw ValidationError("encode_tokens: token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(cfg.vocab_size));
    }
  }
  Var tok = tape_->gather_rows(tok_emb_, prefix);
  Var pos = tape_->slice_rows(pos_emb_, 0, prefix.size());
  return encode_input(tape_->add(tok, pos), prefix.size());
}

Var BoundTextEncoder::encode_continuous(Var rows) const {
  const TextEncoderConfig& cfg = params_->config;
  const std::size_t len = rows.value().rows();
  if (len == 0) throw ValidationError("encode_continuous: empty input sequence");
  if (len > cfg.max_len) {
    throw ShapeError("encode_continuous: sequence length " + std::to_string(len) + " exceeds max_len " +
                     std::to_string(cfg.max_len));
  }
  Var pos = tape_->slice_rows(pos_emb_, 0, len);
  return encode_input(tape_->add(rows, pos), len);
}

Tensor encode_text_eager(TextEncoderParams& params, const std::vector<int>& ids, std::size_t true_length) {
  Tape tape;
  BoundTextEncoder enc(tape, params, /*trainable=*/false);
  return enc.encode_tokens(ids, true_length).value();
}

}  // namespace g2p2
