#pragma once

#include <cstdint>

#include "g2p2/corpus.hpp"

namespace g2p2 {

// Stochastic block model with class-correlated node text: each class owns a
// disjoint token vocabulary (Zipf-weighted) plus a shared pool mixed in at
// the noise rate; intra-class edges at p_in, inter-class at p_out.
struct SyntheticConfig {
  std::size_t classes = 10;
  std::size_t docs_per_class = 100;
  std::size_t class_vocab = 30;
  std::size_t shared_vocab = 200;
  double p_in = 0.05;
  double p_out = 0.001;
  double noise = 0.3;
  std::size_t doc_len_min = 20;
  std::size_t doc_len_max = 60;
  std::size_t label_tokens = 3;  // class label text = this many top tokens
  std::uint64_t seed = 1;

  void validate() const;
};

GraphTextCorpus generate_synthetic_corpus(const SyntheticConfig& cfg);

}  // namespace g2p2
