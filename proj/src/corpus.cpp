#include "g2p2/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "g2p2/errors.hpp"

namespace g2p2 {

std::atomic<std::uint64_t> CorpusWarnings::empty_feature_documents{0};
std::atomic<std::uint64_t> CorpusWarnings::degree_zero_summaries{0};
std::atomic<std::uint64_t> CorpusWarnings::truncated_prompts{0};

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    const bool word_char = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
    const bool upper = c >= 'A' && c <= 'Z';
    if (word_char || upper) {
      cur.push_back(upper ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, int min_freq) {
  if (min_freq < 1) throw ValidationError("vocabulary: min_freq must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const std::string& t : texts) {
    for (std::string& w : split_words(t)) counts[std::move(w)] += 1;
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  kept.reserve(counts.size());
  for (auto& [word, count] : counts) {
    if (count >= min_freq) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.id_to_token.reserve(2 + kept.size());
  for (auto& [word, count] : kept) {
    v.token_to_id.emplace(word, static_cast<int>(v.id_to_token.size()));
    v.id_to_token.push_back(word);
  }
  return v;
}

TokenizedText tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw ValidationError("tokenize: max_len must be >= 1");
  TokenizedText out;
  out.ids.assign(max_len, Vocabulary::kPad);
  const std::vector<std::string> words = split_words(text);
  out.truncated = words.size() > max_len;
  out.true_length = std::min(words.size(), max_len);
  for (std::size_t i = 0; i < out.true_length; ++i) out.ids[i] = vocab.lookup(words[i]);
  return out;
}

namespace {

struct TsvLine {
  std::size_t number;
  std::string first;
  std::string rest;
};

std::vector<TsvLine> read_tsv(const std::string& path, bool required) {
  std::ifstream in(path);
  if (!in) {
    if (required) throw IoError("cannot open " + path);
    return {};
  }
  std::vector<TsvLine> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(number) + ": expected two tab-separated fields");
    }
    lines.push_back({number, line.substr(0, tab), line.substr(tab + 1)});
  }
  return lines;
}

int parse_id(const std::string& s, const std::string& path, std::size_t line) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size() || v < 0) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(path + ":" + std::to_string(line) + ": invalid id '" + s + "'");
  }
}

}  // namespace

void GraphTextCorpus::retokenize(const Vocabulary& v, std::size_t new_max_len) {
  vocab = v;
  max_len = new_max_len;
  documents.resize(raw_documents.size());
  for (std::size_t i = 0; i < raw_documents.size(); ++i) {
    documents[i] = tokenize(raw_documents[i], vocab, max_len);
  }
  class_label_texts.clear();
  for (const auto& [cid, text] : class_label_raw) {
    class_label_texts.emplace(cid, tokenize(text, vocab, max_len));
  }
}

std::vector<int> GraphTextCorpus::class_ids() const {
  std::set<int> ids;
  for (const auto& [node, cid] : labels) ids.insert(cid);
  return {ids.begin(), ids.end()};
}

std::vector<int> GraphTextCorpus::labeled_nodes_of_class(int class_id) const {
  std::vector<int> nodes;
  for (const auto& [node, cid] : labels) {
    if (cid == class_id) nodes.push_back(node);
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

GraphTextCorpus load_corpus(const std::string& dir, std::size_t max_len, int min_freq) {
  namespace fs = std::filesystem;
  GraphTextCorpus c;
  c.max_len = max_len;

  const std::string docs_path = (fs::path(dir) / "documents.tsv").string();
  const auto doc_lines = read_tsv(docs_path, /*required=*/true);
  if (doc_lines.empty()) throw ValidationError(docs_path + ": no documents");
  c.raw_documents.resize(doc_lines.size());
  std::vector<bool> seen(doc_lines.size(), false);
  for (const TsvLine& l : doc_lines) {
    const int id = parse_id(l.first, docs_path, l.number);
    if (static_cast<std::size_t>(id) >= doc_lines.size()) {
      throw ValidationError(docs_path + ":" + std::to_string(l.number) + ": node id " + l.first +
                            " outside 0.." + std::to_string(doc_lines.size() - 1));
    }
    if (seen[static_cast<std::size_t>(id)]) {
      throw ValidationError(docs_path + ":" + std::to_string(l.number) + ": duplicate node id " + l.first);
    }
    if (split_words(l.rest).empty()) {
      throw ValidationError(docs_path + ":" + std::to_string(l.number) + ": empty document for node " + l.first);
    }
    seen[static_cast<std::size_t>(id)] = true;
    c.raw_documents[static_cast<std::size_t>(id)] = l.rest;
  }

  const int n = static_cast<int>(c.raw_documents.size());
  const std::string edges_path = (fs::path(dir) / "edges.tsv").string();
  std::set<std::pair<int, int>> edge_set;
  for (const TsvLine& l : read_tsv(edges_path, /*required=*/true)) {
    const int a = parse_id(l.first, edges_path, l.number);
    const int b = parse_id(l.rest, edges_path, l.number);
    if (a >= n || b >= n) {
      throw ValidationError(edges_path + ":" + std::to_string(l.number) + ": edge endpoint " +
                            std::to_string(std::max(a, b)) + " is not a known node id");
    }
    if (a == b) {
      throw ValidationError(edges_path + ":" + std::to_string(l.number) + ": self-loop on node " + l.first);
    }
    edge_set.emplace(std::min(a, b), std::max(a, b));
  }
  c.edges.assign(edge_set.begin(), edge_set.end());
  c.adjacency.assign(static_cast<std::size_t>(n), {});
  for (auto [a, b] : c.edges) {
    c.adjacency[static_cast<std::size_t>(a)].push_back(b);
    c.adjacency[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nbrs : c.adjacency) std::sort(nbrs.begin(), nbrs.end());

  const std::string labels_path = (fs::path(dir) / "labels.tsv").string();
  for (const TsvLine& l : read_tsv(labels_path, /*required=*/false)) {
    const int node = parse_id(l.first, labels_path, l.number);
    const int cid = parse_id(l.rest, labels_path, l.number);
    if (node >= n) {
      throw ValidationError(labels_path + ":" + std::to_string(l.number) + ": unknown node id " + l.first);
    }
    if (c.labels.count(node)) {
      throw ValidationError(labels_path + ":" + std::to_string(l.number) + ": duplicate label for node " + l.first);
    }
    c.labels.emplace(node, cid);
  }

  const std::string classes_path = (fs::path(dir) / "classes.tsv").string();
  for (const TsvLine& l : read_tsv(classes_path, /*required=*/false)) {
    const int cid = parse_id(l.first, classes_path, l.number);
    if (c.class_label_raw.count(cid)) {
      throw ValidationError(classes_path + ":" + std::to_string(l.number) + ": duplicate class id " + l.first);
    }
    if (split_words(l.rest).empty()) {
      throw ValidationError(classes_path + ":" + std::to_string(l.number) + ": empty label text for class " +
                            l.first);
    }
    c.class_label_raw.emplace(cid, l.rest);
  }

  c.retokenize(Vocabulary::build(c.raw_documents, min_freq), max_len);
  return c;
}

void save_corpus(const GraphTextCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::trunc);
    if (!out) throw IoError(std::string("cannot write ") + name + " in " + dir);
    return out;
  };
  {
    std::ofstream out = open("documents.tsv");
    for (std::size_t i = 0; i < corpus.raw_documents.size(); ++i) {
      out << i << '\t' << corpus.raw_documents[i] << '\n';
    }
  }
  {
    std::ofstream out = open("edges.tsv");
    for (auto [a, b] : corpus.edges) out << a << '\t' << b << '\n';
  }
  {
    std::ofstream out = open("labels.tsv");
    std::vector<std::pair<int, int>> sorted(corpus.labels.begin(), corpus.labels.end());
    std::sort(sorted.begin(), sorted.end());
    for (auto [node, cid] : sorted) out << node << '\t' << cid << '\n';
  }
  {
    std::ofstream out = open("classes.tsv");
    for (const auto& [cid, text] : corpus.class_label_raw) out << cid << '\t' << text << '\n';
  }
}

Tensor build_node_features(const GraphTextCorpus& corpus, const Tensor& word_vectors) {
  if (word_vectors.rows() != corpus.vocab.size()) {
    throw ShapeError("build_node_features: table has " + std::to_string(word_vectors.rows()) +
                     " rows for vocabulary of " + std::to_string(corpus.vocab.size()));
  }
  const std::size_t f = word_vectors.cols();
  Tensor features(corpus.num_nodes(), f);
  for (std::size_t i = 0; i < corpus.num_nodes(); ++i) {
    const TokenizedText& doc = corpus.documents[i];
    float* row = features.row_ptr(i);
    if (doc.true_length == 0) {
      CorpusWarnings::empty_feature_documents.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    for (std::size_t p = 0; p < doc.true_length; ++p) {
      const float* wv = word_vectors.row_ptr(static_cast<std::size_t>(doc.ids[p]));
      for (std::size_t j = 0; j < f; ++j) row[j] += wv[j];
    }
    const float inv = 1.0f / static_cast<float>(doc.true_length);
    for (std::size_t j = 0; j < f; ++j) row[j] *= inv;
  }
  return features;
}

std::vector<int> sample_neighbors(const GraphTextCorpus& corpus, int node, std::size_t eta, Rng& rng) {
  if (node < 0 || static_cast<std::size_t>(node) >= corpus.num_nodes()) {
    throw ValidationError("sample_neighbors: node " + std::to_string(node) + " out of range");
  }
  const std::vector<int>& nbrs = corpus.adjacency[static_cast<std::size_t>(node)];
  if (nbrs.size() <= eta) return nbrs;
  return rng.sample_without_replacement(nbrs, eta);
}

std::uint64_t corpus_fingerprint(const GraphTextCorpus& corpus) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_int = [&](std::int64_t v) { mix(&v, sizeof v); };
  mix_int(static_cast<std::int64_t>(corpus.raw_documents.size()));
  for (const std::string& d : corpus.raw_documents) {
    mix_int(static_cast<std::int64_t>(d.size()));
    mix(d.data(), d.size());
  }
  for (auto [a, b] : corpus.edges) {
    mix_int(a);
    mix_int(b);
  }
  std::vector<std::pair<int, int>> sorted(corpus.labels.begin(), corpus.labels.end());
  std::sort(sorted.begin(), sorted.end());
  for (auto [node, cid] : sorted) {
    mix_int(node);
    mix_int(cid);
  }
  for (const auto& [cid, text] : corpus.class_label_raw) {
    mix_int(cid);
    mix_int(static_cast<std::int64_t>(text.size()));
    mix(text.data(), text.size());
  }
  return h;
}

}  // namespace g2p2
