#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "g2p2/rng.hpp"
#include "g2p2/tensor.hpp"

namespace g2p2 {

// Word-level vocabulary with two reserved ids.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> id_to_token{"<pad>", "<unk>"};
  std::unordered_map<std::string, int> token_to_id;

  // Builds a vocabulary from raw texts. Words occurring fewer than min_freq
  // times map to <unk>. Ids are assigned by descending frequency (ties broken
  // alphabetically) starting at 2.
  static Vocabulary build(const std::vector<std::string>& texts, int min_freq = 2);

  int lookup(const std::string& word) const {
    auto it = token_to_id.find(word);
    return it == token_to_id.end() ? kUnk : it->second;
  }
  std::size_t size() const { return id_to_token.size(); }
};

// Lowercases and splits on whitespace/punctuation. ASCII alphanumerics and
// bytes >= 0x80 (multi-byte UTF-8) count as word characters.
std::vector<std::string> split_words(const std::string& text);

struct TokenizedText {
  std::vector<int> ids;         // padded to max_len with kPad
  std::size_t true_length = 0;  // 0 flags an empty text
  bool truncated = false;
};

TokenizedText tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len);

struct CorpusWarnings {
  static std::atomic<std::uint64_t> empty_feature_documents;
  static std::atomic<std::uint64_t> degree_zero_summaries;
  static std::atomic<std::uint64_t> truncated_prompts;
};

// Immutable-after-load graph-grounded text corpus. Documents and graph nodes
// are in bijection: node ids are 0..num_nodes()-1 in document order.
struct GraphTextCorpus {
  std::vector<std::string> raw_documents;
  std::vector<TokenizedText> documents;
  std::vector<std::pair<int, int>> edges;   // canonical (min,max), deduplicated, sorted
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists, no self-loops
  std::unordered_map<int, int> labels;      // node id -> class id
  std::map<int, std::string> class_label_raw;
  std::map<int, TokenizedText> class_label_texts;
  Vocabulary vocab;
  Tensor node_features;  // num_nodes x f, filled by build_node_features
  std::size_t max_len = 128;

  std::size_t num_nodes() const { return raw_documents.size(); }
  std::size_t degree(int node) const { return adjacency[static_cast<std::size_t>(node)].size(); }

  // Re-tokenizes every document and class label text under `v` (used when an
  // existing checkpoint dictates the vocabulary).
  void retokenize(const Vocabulary& v, std::size_t new_max_len);

  // Sorted distinct class ids present in labels.
  std::vector<int> class_ids() const;
  std::vector<int> labeled_nodes_of_class(int class_id) const;
};

// Loads documents.tsv / edges.tsv / labels.tsv / classes.tsv from `dir`,
// validates, builds a vocabulary (min frequency `min_freq`) and tokenizes.
// Throws ValidationError with file and line on malformed input.
GraphTextCorpus load_corpus(const std::string& dir, std::size_t max_len = 128, int min_freq = 2);

// Writes the four corpus files back to `dir` in canonical order.
void save_corpus(const GraphTextCorpus& corpus, const std::string& dir);

// Row i = mean of word vectors of document i's non-pad tokens; an empty
// document yields a zero row and bumps CorpusWarnings::empty_feature_documents.
Tensor build_node_features(const GraphTextCorpus& corpus, const Tensor& word_vectors);

// Up to eta distinct neighbors of `node`, uniform without replacement. All
// neighbors (stored order, no rng draw) when degree <= eta.
std::vector<int> sample_neighbors(const GraphTextCorpus& corpus, int node, std::size_t eta, Rng& rng);

// FNV-1a hash over documents, edges, labels, and class texts; stored in
// checkpoints so an evaluation run can detect a mismatched corpus.
std::uint64_t corpus_fingerprint(const GraphTextCorpus& corpus);

}  // namespace g2p2
