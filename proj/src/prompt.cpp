#include "g2p2/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "g2p2/errors.hpp"
#include "g2p2/optim.hpp"

namespace g2p2 {

DiscretePrompt DiscretePrompt::parse(const std::string& raw) {
  DiscretePrompt p;
  p.text = raw;
  if (raw.empty()) return p;
  std::size_t count = 0;
  for (std::size_t pos = raw.find("[CLASS]"); pos != std::string::npos; pos = raw.find("[CLASS]", pos + 7)) {
    ++count;
  }
  if (count == 0) {
    throw ValidationError("prompt template must contain [CLASS] (or be empty for label-text-only)");
  }
  if (count > 1) throw ValidationError("prompt template must contain exactly one [CLASS]");
  return p;
}

std::string DiscretePrompt::substitute(const std::string& label_text) const {
  if (text.empty()) return label_text;
  std::string out = text;
  out.replace(out.find("[CLASS]"), 7, label_text);
  return out;
}

ClassWeights ClassWeights::subset(const std::vector<int>& ids) const {
  ClassWeights out;
  out.class_ids = ids;
  out.matrix = Tensor(ids.size(), matrix.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = std::lower_bound(class_ids.begin(), class_ids.end(), ids[i]);
    if (it == class_ids.end() || *it != ids[i]) {
      throw ValidationError("class weights: no row for class " + std::to_string(ids[i]));
    }
    const auto row = static_cast<std::size_t>(it - class_ids.begin());
    const float* src = matrix.row_ptr(row);
    float* dst = out.matrix.row_ptr(i);
    for (std::size_t j = 0; j < matrix.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

ClassWeights zero_shot_weights(Model& model, const std::map<int, std::string>& class_label_raw,
                               const DiscretePrompt& tmpl) {
  if (class_label_raw.empty()) throw ValidationError("zero_shot_weights: no class label texts");
  const TextEncoderConfig& cfg = model.config.text;
  Tape tape;
  BoundTextEncoder enc(tape, model.text, /*trainable=*/false);
  std::vector<Var> rows;
  ClassWeights out;
  for (const auto& [cid, label] : class_label_raw) {
    const TokenizedText tok = tokenize(tmpl.substitute(label), model.vocab, cfg.max_len);
    if (tok.true_length == 0) {
      throw ValidationError("zero_shot_weights: class " + std::to_string(cid) + " yields an empty token sequence");
    }
    if (tok.truncated) CorpusWarnings::truncated_prompts.fetch_add(1, std::memory_order_relaxed);
    rows.push_back(enc.encode_tokens(tok.ids, tok.true_length));
    out.class_ids.push_back(cid);
  }
  out.matrix = tape.l2_normalize_rows(tape.concat_rows(rows)).value();
  return out;
}

Classification classify(const Tensor& z, const ClassWeights& weights) {
  const std::size_t d = weights.matrix.cols();
  if (z.numel() != d) {
    throw ShapeError("classify: embedding has " + std::to_string(z.numel()) + " values, weights expect " +
                     std::to_string(d));
  }
  if (weights.class_ids.empty()) throw ValidationError("classify: no classes");
  float norm = 0.0f;
  for (std::size_t j = 0; j < d; ++j) norm += z[j] * z[j];
  norm = std::sqrt(norm) + 1e-12f;

  const std::size_t n = weights.class_ids.size();
  Classification res;
  res.probabilities.resize(n);
  float max_logit = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const float* w = weights.matrix.row_ptr(i);
    float dot = 0.0f;
    for (std::size_t j = 0; j < d; ++j) dot += z[j] * w[j];
    res.probabilities[i] = dot / norm;  // cosine logit for now
    max_logit = std::max(max_logit, res.probabilities[i]);
  }
  float sum = 0.0f;
  for (float& p : res.probabilities) {
    p = std::exp(p - max_logit);
    sum += p;
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    res.probabilities[i] /= sum;
    if (res.probabilities[i] > res.probabilities[best]) best = i;  // strict: lowest id wins ties
  }
  res.predicted_class = weights.class_ids[best];
  return res;
}

Tensor init_prompt_from_context(const GraphTextCorpus& corpus, const Tensor& token_embedding,
                                const std::vector<int>& support_nodes, std::size_t prompt_len, std::size_t eta,
                                Rng& rng) {
  if (prompt_len < 1) throw ValidationError("init_prompt_from_context: prompt length must be >= 1");
  if (support_nodes.empty()) throw ValidationError("init_prompt_from_context: empty support set");
  const std::size_t width = token_embedding.cols();
  Tensor sum(prompt_len, width);
  std::size_t sequences = 0;
  auto add_sequence = [&](int node) {
    const TokenizedText& doc = corpus.documents[static_cast<std::size_t>(node)];
    for (std::size_t m = 0; m < prompt_len; ++m) {
      const int token = m < doc.true_length ? doc.ids[m] : Vocabulary::kPad;
      const float* src = token_embedding.row_ptr(static_cast<std::size_t>(token));
      float* dst = sum.row_ptr(m);
      for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
    }
    ++sequences;
  };
  for (int node : support_nodes) {
    add_sequence(node);
    for (int ctx : sample_neighbors(corpus, node, eta, rng)) add_sequence(ctx);
  }
  const float inv = 1.0f / static_cast<float>(sequences);
  for (std::size_t i = 0; i < sum.numel(); ++i) sum[i] *= inv;
  return sum;
}

Var few_shot_weights(Tape& tape, const BoundTextEncoder& encoder, std::optional<Var> prompt,
                     const std::vector<std::pair<int, TokenizedText>>& class_tokens) {
  if (class_tokens.empty()) throw ValidationError("few_shot_weights: no classes");
  const TextEncoderConfig& cfg = encoder.config();
  const std::size_t m = prompt ? prompt->value().rows() : 0;
  if (prompt && prompt->value().cols() != cfg.width) {
    throw ShapeError("few_shot_weights: prompt width " + std::to_string(prompt->value().cols()) +
                     " != encoder width " + std::to_string(cfg.width));
  }
  if (m >= cfg.max_len) {
    throw ValidationError("few_shot_weights: prompt length " + std::to_string(m) +
                          " leaves no room for label tokens within max_len " + std::to_string(cfg.max_len));
  }
  std::vector<Var> rows;
  rows.reserve(class_tokens.size());
  for (const auto& [cid, tok] : class_tokens) {
    if (tok.true_length == 0) {
      throw ValidationError("few_shot_weights: class " + std::to_string(cid) + " has an empty label text");
    }
    std::size_t label_len = tok.true_length;
    if (m + label_len > cfg.max_len) {
      label_len = cfg.max_len - m;  // tail truncation
      CorpusWarnings::truncated_prompts.fetch_add(1, std::memory_order_relaxed);
    }
    const std::vector<int> label_ids(tok.ids.begin(), tok.ids.begin() + static_cast<std::ptrdiff_t>(label_len));
    Var label_rows = tape.gather_rows(encoder.token_table(), label_ids);
    Var seq = prompt ? tape.concat_rows({*prompt, label_rows}) : label_rows;
    rows.push_back(encoder.encode_continuous(seq));
  }
  return tape.l2_normalize_rows(tape.concat_rows(rows));
}

PromptInit parse_prompt_init(const std::string& text) {
  if (text == "context") return PromptInit::kContext;
  if (text == "random") return PromptInit::kRandom;
  if (text == "label-only") return PromptInit::kLabelOnly;
  throw ValidationError("unknown prompt init '" + text + "' (expected context, random, or label-only)");
}

void PromptTuneConfig::validate(const TextEncoderConfig& text) const {
  if (prompt_len < 1) throw ValidationError("prompt tuning: prompt length must be >= 1");
  if (prompt_len >= text.max_len) {
    throw ValidationError("prompt tuning: prompt length must be smaller than max_len");
  }
  if (iters < 1) throw ValidationError("prompt tuning: iters must be >= 1");
  if (!(lr > 0.0f)) throw ValidationError("prompt tuning: learning rate must be positive");
}

namespace {

std::vector<std::pair<int, TokenizedText>> task_class_tokens(const Model& model, const GraphTextCorpus& corpus,
                                                             const FewShotTask& task) {
  std::vector<std::pair<int, TokenizedText>> out;
  out.reserve(task.class_ids.size());
  for (int cid : task.class_ids) {
    auto it = corpus.class_label_raw.find(cid);
    if (it == corpus.class_label_raw.end()) {
      throw ValidationError("class " + std::to_string(cid) + " has no label text (classes.tsv)");
    }
    out.emplace_back(cid, tokenize(it->second, model.vocab, model.config.text.max_len));
  }
  return out;
}

// Normalized z rows and task-local targets for a support/validation map.
struct LabeledRows {
  Tensor z;  // [count x d], unit rows
  std::vector<int> targets;
  std::vector<int> nodes;
};

LabeledRows gather_labeled_rows(const Tensor& z_all, const FewShotTask& task,
                                const std::map<int, std::vector<int>>& split) {
  LabeledRows out;
  for (int cid : task.class_ids) {
    auto it = split.find(cid);
    if (it == split.end()) continue;
    for (int node : it->second) {
      out.nodes.push_back(node);
      out.targets.push_back(task.class_index(cid));
    }
  }
  const std::size_t d = z_all.cols();
  out.z = Tensor(out.nodes.size(), d);
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    const float* src = z_all.row_ptr(static_cast<std::size_t>(out.nodes[i]));
    float norm = 0.0f;
    for (std::size_t j = 0; j < d; ++j) norm += src[j] * src[j];
    const float inv = 1.0f / (std::sqrt(norm) + 1e-12f);
    float* dst = out.z.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] * inv;
  }
  return out;
}

double validation_accuracy(Model& model, const Tensor& prompt,
                           const std::vector<std::pair<int, TokenizedText>>& class_tokens,
                           const LabeledRows& val) {
  Tape tape;
  BoundTextEncoder enc(tape, model.text, /*trainable=*/false);
  Var w = few_shot_weights(tape, enc, tape.constant(prompt), class_tokens);
  const Tensor& weights = w.value();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < val.nodes.size(); ++i) {
    const float* z = val.z.row_ptr(i);
    std::size_t best = 0;
    float best_score = -std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < weights.rows(); ++c) {
      const float* row = weights.row_ptr(c);
      float dot = 0.0f;
      for (std::size_t j = 0; j < weights.cols(); ++j) dot += z[j] * row[j];
      if (dot > best_score) {
        best_score = dot;
        best = c;
      }
    }
    if (static_cast<int>(best) == val.targets[i]) ++correct;
  }
  return val.nodes.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val.nodes.size());
}

}  // namespace

PromptTuneResult prompt_tune(Model& model, const GraphTextCorpus& corpus, const Tensor& z_all,
                             const FewShotTask& task, const PromptTuneConfig& cfg) {
  cfg.validate(model.config.text);
  if (cfg.init == PromptInit::kLabelOnly) {
    throw ValidationError("prompt_tune: label-only mode skips tuning (handled by the caller)");
  }
  const std::vector<int> support_nodes = task.support_nodes();
  if (support_nodes.empty()) throw ValidationError("prompt_tune: task has an empty support set");

  Rng rng(cfg.seed);
  const std::size_t width = model.config.text.width;
  Tensor init(cfg.prompt_len, width);
  if (cfg.init == PromptInit::kContext) {
    init = init_prompt_from_context(corpus, model.text.token_embedding.value, support_nodes, cfg.prompt_len,
                                    cfg.eta, rng);
  } else {
    for (std::size_t i = 0; i < init.numel(); ++i) {
      init[i] = static_cast<float>(rng.truncated_normal(0.0, 0.02));
    }
  }

  const auto class_tokens = task_class_tokens(model, corpus, task);
  const LabeledRows support = gather_labeled_rows(z_all, task, task.support);
  const LabeledRows val = gather_labeled_rows(z_all, task, task.validation);

  Parameter prompt;
  prompt.name = "prompt";
  prompt.value = init;
  prompt.grad = Tensor::zeros_like(init);
  const std::vector<Parameter*> trainable{&prompt};
  const AdamConfig adam{cfg.lr};

  PromptTuneResult result;
  result.trainable_parameters = prompt.numel();
  result.prompt = prompt.value;
  result.best_iteration = 0;
  result.best_val_accuracy = validation_accuracy(model, prompt.value, class_tokens, val);

  for (std::size_t iter = 1; iter <= cfg.iters; ++iter) {
    Tape tape;
    BoundTextEncoder enc(tape, model.text, /*trainable=*/false);
    Var pv = tape.param(prompt);
    Var weights = few_shot_weights(tape, enc, pv, class_tokens);
    Var logits = tape.matmul(tape.constant(support.z), tape.transpose(weights));
    Var loss = tape.row_cross_entropy(logits, support.targets);
    if (!loss.value().all_finite()) {
      throw NumericError("prompt_tune: non-finite loss at iteration " + std::to_string(iter));
    }
    result.support_losses.push_back(loss.value()[0]);
    tape.backward(loss);
    adam_step(trainable, adam);

    const double acc = validation_accuracy(model, prompt.value, class_tokens, val);
    if (acc > result.best_val_accuracy) {
      result.best_val_accuracy = acc;
      result.best_iteration = iter;
      result.prompt = prompt.value;
    }
  }
  return result;
}

}  // namespace g2p2
