#pragma once

#include <string>

#include "g2p2/model.hpp"
#include "g2p2/pretrain.hpp"
#include "g2p2/prompt.hpp"
#include "g2p2/synthetic.hpp"
#include "g2p2/tasks.hpp"
#include "g2p2/word_embeddings.hpp"

namespace g2p2 {

// Flat `[section] key = value` configuration. Every field has a default;
// unknown sections or keys are rejected with the offending line number.
struct RunConfig {
  ModelConfig model;
  PretrainConfig pretrain;
  PromptTuneConfig prompt;
  EvalConfig eval;
  SyntheticConfig synth;
  struct CorpusOptions {
    int min_freq = 2;
    WordEmbeddingConfig words;
  } corpus;
};

RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

// Empty path -> all defaults.
RunConfig parse_run_config(const std::string& path);

}  // namespace g2p2
