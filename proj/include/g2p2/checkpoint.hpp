#pragma once

#include <cstdint>
#include <string>

#include "g2p2/model.hpp"

namespace g2p2 {

struct CheckpointMeta {
  std::uint64_t seed = 0;               // pre-training seed (also used for the
                                        // word-embedding pass, so features can
                                        // be reproduced at evaluation time)
  std::uint64_t corpus_fingerprint = 0;
  std::string pretrain_summary;         // free-form provenance (json)
};

// Binary, versioned, little-endian. Layout: magic "G2P2CKPT", u32 version,
// json config snapshot, vocabulary, metadata, then named parameter blobs.
// Round-trips are bitwise: load(save(m)) reproduces every parameter exactly.
void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace g2p2
