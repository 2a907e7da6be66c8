#pragma once

#include <cstdint>
#include <vector>

#include "g2p2/corpus.hpp"
#include "g2p2/graph_encoder.hpp"
#include "g2p2/text_encoder.hpp"

namespace g2p2 {

struct ModelConfig {
  TextEncoderConfig text;
  GraphEncoderConfig graph;

  void validate() const;
};

// The jointly pre-trained bundle: dual encoders plus the shared trainable
// temperature. The vocabulary travels with the model so downstream
// classification can tokenize label texts without the original corpus.
struct Model {
  ModelConfig config;
  TextEncoderParams text;
  GraphEncoderParams graph;
  Parameter tau;  // scalar; similarity logits are scaled by exp(tau)
  Vocabulary vocab;

  static Model init(const ModelConfig& cfg, const Vocabulary& vocab, std::uint64_t seed);
  std::vector<Parameter*> trainable();
};

}  // namespace g2p2
