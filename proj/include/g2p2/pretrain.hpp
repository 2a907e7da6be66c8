#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "g2p2/contrastive.hpp"
#include "g2p2/corpus.hpp"
#include "g2p2/model.hpp"

namespace g2p2 {

struct PretrainConfig {
  std::size_t epochs = 2;
  std::size_t batch_size = 64;
  std::size_t eta = 3;  // neighbors sampled per node for the summary
  float lambda = 0.1f;
  float lr = 2e-5f;
  std::uint64_t seed = 1;
  LossMask mask;

  void validate() const;
};

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  float l1 = 0.0f, l2 = 0.0f, l3 = 0.0f, total = 0.0f;
  float exp_tau = 0.0f;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<BatchRecord> batches;

  double epoch_mean_total(std::size_t epoch) const;
  std::size_t num_epochs() const;
  // One line per batch: `epoch batch L1 L2 L3 total expTau seconds`.
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
};

// Joint pre-training of the dual encoders and temperature. Per epoch the
// document ids are shuffled and partitioned into batches (the last batch may
// be smaller); per batch the text, node, and summary embeddings are built,
// the three similarity matrices scored, and one Adam step taken. Throws
// NumericError with the offending batch ids and temperature if the loss goes
// non-finite. corpus.node_features must be populated.
TrainLog pretrain(Model& model, const GraphTextCorpus& corpus, const CsrMatrix& adjacency,
                  const PretrainConfig& cfg);

struct ScalingRow {
  std::size_t num_documents = 0;
  double seconds_per_epoch = 0.0;
};

// Wall-time of exactly one epoch for each corpus (fresh model each, same
// seed), for checking the linear-in-documents cost claim.
std::vector<ScalingRow> measure_epoch_scaling(const std::vector<const GraphTextCorpus*>& corpora,
                                              const std::vector<const CsrMatrix*>& adjacencies,
                                              const PretrainConfig& cfg, const ModelConfig& model_cfg);

}  // namespace g2p2
