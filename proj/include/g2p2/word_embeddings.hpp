#pragma once

#include <string>

#include "g2p2/corpus.hpp"
#include "g2p2/tensor.hpp"

namespace g2p2 {

// Shallow skip-gram trainer used to produce the node input features: the
// corpus is the only training signal, so features stay self-contained.
struct WordEmbeddingConfig {
  std::size_t dim = 128;
  std::size_t window = 3;
  std::size_t negatives = 5;
  std::size_t epochs = 3;
  float lr = 0.025f;
  std::uint64_t seed = 1;
};

// Trains word vectors over the tokenized documents (pad positions skipped).
// Returns the input-side table, one row per vocabulary entry.
Tensor train_word_embeddings(const GraphTextCorpus& corpus, const WordEmbeddingConfig& cfg);

// embeddings.f32: 16-byte header (four little-endian u32: magic 'G2PE',
// version 1, rows, cols) followed by row-major little-endian f32 data.
void save_embeddings(const Tensor& table, const std::string& path);
Tensor load_embeddings(const std::string& path);

// vocab.tsv: `id<TAB>token`, ids dense from 0.
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

}  // namespace g2p2
