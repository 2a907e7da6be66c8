// Shared fixtures and glue for the test binaries.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "g2p2/corpus.hpp"
#include "g2p2/model.hpp"
#include "g2p2/rng.hpp"
#include "ref_model.hpp"

namespace testutil {

// Self-deleting temporary directory.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("g2p2_test_" + std::to_string(std::random_device{}()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this) & 0xffff));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
}

// A tiny hand-built corpus: three documents on a path graph 0-1-2, two
// classes. Degrees are [1, 2, 1].
inline void write_tiny_corpus(const TempDir& dir) {
  write_file(dir.file("documents.tsv"),
             "0\tgraph neural nets study graphs\n"
             "1\tlanguage models study text tokens graph\n"
             "2\tcontrastive pairs align text and graphs\n");
  write_file(dir.file("edges.tsv"), "0\t1\n1\t2\n");
  write_file(dir.file("labels.tsv"), "0\t0\n1\t1\n2\t1\n");
  write_file(dir.file("classes.tsv"), "0\tgraph learning\n1\ttext learning\n");
}

// Builds an in-memory corpus from document texts and an edge list. Node i
// holds docs[i]; label and class files are written only when labels are given.
inline g2p2::GraphTextCorpus make_corpus(const std::vector<std::string>& docs,
                                         const std::vector<std::pair<int, int>>& edges,
                                         std::size_t max_len = 16,
                                         const std::vector<std::pair<int, int>>& labels = {},
                                         const std::vector<std::pair<int, std::string>>& classes = {}) {
  TempDir dir;
  std::string doc_body;
  for (std::size_t i = 0; i < docs.size(); ++i) doc_body += std::to_string(i) + "\t" + docs[i] + "\n";
  write_file(dir.file("documents.tsv"), doc_body);
  std::string edge_body;
  for (const auto& [u, v] : edges) edge_body += std::to_string(u) + "\t" + std::to_string(v) + "\n";
  write_file(dir.file("edges.tsv"), edge_body);
  std::string label_body;
  for (const auto& [n, c] : labels) label_body += std::to_string(n) + "\t" + std::to_string(c) + "\n";
  write_file(dir.file("labels.tsv"), label_body);
  std::string class_body;
  for (const auto& [c, text] : classes) class_body += std::to_string(c) + "\t" + text + "\n";
  write_file(dir.file("classes.tsv"), class_body);
  return g2p2::load_corpus(dir.str(), max_len, 1);
}

inline g2p2::ModelConfig tiny_model_config(std::size_t width = 8, std::size_t heads = 2,
                                           std::size_t layers = 2, std::size_t max_len = 6,
                                           std::size_t out_dim = 8, std::size_t feat_dim = 8,
                                           std::size_t hidden = 8) {
  g2p2::ModelConfig cfg;
  cfg.text.layers = layers;
  cfg.text.width = width;
  cfg.text.heads = heads;
  cfg.text.max_len = max_len;
  cfg.text.output_dim = out_dim;
  cfg.graph.in_dim = feat_dim;
  cfg.graph.hidden = hidden;
  cfg.graph.out_dim = out_dim;
  return cfg;
}

// Vocabulary with ids 2..(2+n) named w0..w{n-1}.
inline g2p2::Vocabulary synthetic_vocab(std::size_t n_words) {
  std::vector<std::string> texts;
  std::string doc;
  for (std::size_t i = 0; i < n_words; ++i) {
    doc += "w" + std::to_string(i) + " w" + std::to_string(i) + " ";
  }
  texts.push_back(doc);
  return g2p2::Vocabulary::build(texts, 2);
}

inline g2p2::Tensor random_tensor(std::size_t rows, std::size_t cols, g2p2::Rng& rng, double scale = 1.0) {
  g2p2::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

// f64 copies of every trainable parameter, keyed by parameter name.
inline refm::RefParams ref_params(g2p2::Model& model) {
  refm::RefParams out;
  for (g2p2::Parameter* p : model.trainable()) {
    out.by_name.emplace(p->name, oracle::from_tensor(p->value));
  }
  return out;
}

// Snapshot of every trainable gradient, keyed by parameter name.
inline std::map<std::string, g2p2::Tensor> grad_snapshot(g2p2::Model& model) {
  std::map<std::string, g2p2::Tensor> out;
  for (g2p2::Parameter* p : model.trainable()) {
    out.emplace(p->name, p->grad);
  }
  return out;
}

inline refm::RefTextConfig ref_text_config(const g2p2::TextEncoderConfig& cfg) {
  refm::RefTextConfig rc;
  rc.layers = cfg.layers;
  rc.width = cfg.width;
  rc.heads = cfg.heads;
  rc.mean_pool = cfg.pooling == g2p2::Pooling::kMean;
  return rc;
}

}  // namespace testutil
