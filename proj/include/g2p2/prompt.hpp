#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "g2p2/model.hpp"
#include "g2p2/tasks_types.hpp"
#include "g2p2/text_encoder.hpp"

namespace g2p2 {

// A natural-language template with one [CLASS] placeholder, or the empty
// template (label text alone).
struct DiscretePrompt {
  std::string text;

  // Validates: empty is fine; otherwise exactly one [CLASS] must appear.
  static DiscretePrompt parse(const std::string& raw);
  std::string substitute(const std::string& label_text) const;
  bool empty() const { return text.empty(); }
};

// One L2-normalized weight row per class, ascending class id.
struct ClassWeights {
  Tensor matrix;  // [N x d]
  std::vector<int> class_ids;

  // Rows for a subset of the classes (each must be present).
  ClassWeights subset(const std::vector<int>& ids) const;
};

// Encodes template-with-label-text per class through the frozen text encoder.
// Substituted sequences longer than max_len are tail-truncated with a warning.
ClassWeights zero_shot_weights(Model& model, const std::map<int, std::string>& class_label_raw,
                               const DiscretePrompt& tmpl);

struct Classification {
  std::vector<float> probabilities;  // aligned with weights.class_ids
  int predicted_class = -1;          // argmax, lowest class id on ties
};

// Softmax over cosine similarities between z and each weight row.
Classification classify(const Tensor& z, const ClassWeights& weights);

// Positionwise average of the first-M-token embedding sequences of every
// support node and up to eta sampled context nodes each (documents shorter
// than M are padded with the <pad> embedding row).
Tensor init_prompt_from_context(const GraphTextCorpus& corpus, const Tensor& token_embedding,
                                const std::vector<int>& support_nodes, std::size_t prompt_len, std::size_t eta,
                                Rng& rng);

// Tape-recorded class weights for a continuous prompt: for each class,
// [prompt rows, label token embeddings] goes through the encoder's
// continuous-input pathway; rows come back L2-normalized, ascending class id.
// Without a prompt this is exactly the empty-template zero-shot computation.
Var few_shot_weights(Tape& tape, const BoundTextEncoder& encoder, std::optional<Var> prompt,
                     const std::vector<std::pair<int, TokenizedText>>& class_tokens);

enum class PromptInit { kContext, kRandom, kLabelOnly };

PromptInit parse_prompt_init(const std::string& text);

struct PromptTuneConfig {
  std::size_t prompt_len = 4;  // M
  std::size_t iters = 50;
  float lr = 0.01f;
  std::size_t eta = 3;  // context nodes sampled per support node at init
  PromptInit init = PromptInit::kContext;
  std::uint64_t seed = 1;

  void validate(const TextEncoderConfig& text) const;
};

struct PromptTuneResult {
  Tensor prompt;                      // best iterate, [M x width]
  std::size_t trainable_parameters = 0;
  std::size_t best_iteration = 0;     // 0 = the initialization itself
  double best_val_accuracy = 0.0;
  std::vector<float> support_losses;  // one per tuning iteration
};

// Optimizes only the M prompt vectors on the task's support set with the
// encoders frozen, returning the iterate with the best validation accuracy
// (earliest on ties; the initialization competes as iterate 0).
// z_all holds the frozen graph-encoder embedding of every node.
PromptTuneResult prompt_tune(Model& model, const GraphTextCorpus& corpus, const Tensor& z_all,
                             const FewShotTask& task, const PromptTuneConfig& cfg);

}  // namespace g2p2
