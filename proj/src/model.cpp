#include "g2p2/model.hpp"

#include "g2p2/contrastive.hpp"
#include "g2p2/errors.hpp"

namespace g2p2 {

void ModelConfig::validate() const {
  text.validate();
  graph.validate();
  if (graph.out_dim != text.output_dim) {
    throw ValidationError("model: graph out_dim must equal the text encoder output_dim (shared embedding space)");
  }
}

Model Model::init(const ModelConfig& cfg, const Vocabulary& vocab, std::uint64_t seed) {
  ModelConfig fixed = cfg;
  fixed.text.vocab_size = vocab.size();
  fixed.validate();
  Model m;
  m.config = fixed;
  m.vocab = vocab;
  Rng rng(seed);
  m.text = TextEncoderParams::init(fixed.text, rng);
  m.graph = GraphEncoderParams::init(fixed.graph, rng);
  m.tau.name = "tau";
  m.tau.value = Tensor::scalar(temperature_init());
  m.tau.grad = Tensor::zeros_like(m.tau.value);
  return m;
}

std::vector<Parameter*> Model::trainable() {
  std::vector<Parameter*> out = text.trainable();
  for (Parameter* p : graph.trainable()) out.push_back(p);
  out.push_back(&tau);
  return out;
}

}  // namespace g2p2
