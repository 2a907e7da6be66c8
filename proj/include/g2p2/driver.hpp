#pragma once

#include <string>

#include "g2p2/checkpoint.hpp"
#include "g2p2/config.hpp"
#include "g2p2/corpus.hpp"
#include "g2p2/model.hpp"
#include "g2p2/pretrain.hpp"
#include "g2p2/tensor.hpp"

namespace g2p2 {

// End-to-end flows shared by the command-line tool and the Python module.

// Loads word vectors from <dir>/embeddings.f32 when present, otherwise trains
// them on the corpus (and, if persist, writes embeddings.f32 + vocab.tsv back
// into the corpus directory so later runs reuse them).
Tensor obtain_word_vectors(const GraphTextCorpus& corpus, const std::string& dir,
                           const WordEmbeddingConfig& words, bool persist);

struct PretrainOutcome {
  TrainLog log;
  CheckpointMeta meta;
  std::size_t num_documents = 0;
  std::size_t num_edges = 0;
  std::size_t vocab_size = 0;
};

// Full pre-training flow: load + (re)tokenize the corpus, obtain features,
// initialize the model, train, and write the checkpoint. The word-embedding
// seed is tied to the pre-training seed so evaluation can reproduce features.
PretrainOutcome run_pretrain(const std::string& corpus_dir, const std::string& checkpoint_path,
                             RunConfig cfg);

struct EvalInputs {
  Model model;
  GraphTextCorpus corpus;
  Tensor z_all;  // frozen graph embedding of every node
  bool fingerprint_mismatch = false;
};

// Loads the checkpoint, re-tokenizes the corpus under its vocabulary,
// reconstructs node features (from embeddings.f32 or by deterministic
// retraining) and precomputes the graph embeddings.
EvalInputs prepare_evaluation(const std::string& corpus_dir, const std::string& checkpoint_path);

}  // namespace g2p2
