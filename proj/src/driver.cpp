#include "g2p2/driver.hpp"

#include <filesystem>
#include <utility>

#include <json.hpp>

#include "g2p2/errors.hpp"
#include "g2p2/graph_encoder.hpp"
#include "g2p2/word_embeddings.hpp"

namespace g2p2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

WordEmbeddingConfig words_from_summary(const CheckpointMeta& meta, std::size_t fallback_dim) {
  WordEmbeddingConfig words;
  words.dim = fallback_dim;
  words.seed = meta.seed;
  if (meta.pretrain_summary.empty()) return words;
  json j = json::parse(meta.pretrain_summary, nullptr, /*allow_exceptions=*/false);
  if (!j.is_object() || !j.contains("words") || !j["words"].is_object()) return words;
  const json& w = j["words"];
  words.dim = w.value("dim", words.dim);
  words.window = w.value("window", words.window);
  words.negatives = w.value("negatives", words.negatives);
  words.epochs = w.value("epochs", words.epochs);
  words.lr = w.value("lr", words.lr);
  words.seed = w.value("seed", words.seed);
  return words;
}

}  // namespace

Tensor obtain_word_vectors(const GraphTextCorpus& corpus, const std::string& dir,
                           const WordEmbeddingConfig& words, bool persist) {
  const fs::path table_path = fs::path(dir) / "embeddings.f32";
  if (fs::exists(table_path)) {
    Tensor table = load_embeddings(table_path.string());
    if (table.rows() != corpus.vocab.size()) {
      throw ValidationError("embeddings.f32 has " + std::to_string(table.rows()) +
                            " rows but the vocabulary has " + std::to_string(corpus.vocab.size()) +
                            " entries");
    }
    return table;
  }
  Tensor table = train_word_embeddings(corpus, words);
  if (persist) {
    save_embeddings(table, table_path.string());
    save_vocab(corpus.vocab, (fs::path(dir) / "vocab.tsv").string());
  }
  return table;
}

PretrainOutcome run_pretrain(const std::string& corpus_dir, const std::string& checkpoint_path,
                             RunConfig cfg) {
  GraphTextCorpus corpus = load_corpus(corpus_dir, cfg.model.text.max_len, cfg.corpus.min_freq);

  // A vocab.tsv shipped with the corpus pins the vocabulary (and hence the
  // feature table) instead of the frequency-built one.
  const fs::path vocab_path = fs::path(corpus_dir) / "vocab.tsv";
  if (fs::exists(vocab_path)) {
    corpus.retokenize(load_vocab(vocab_path.string()), cfg.model.text.max_len);
  }
  cfg.corpus.words.seed = cfg.pretrain.seed;
  const Tensor word_vectors = obtain_word_vectors(corpus, corpus_dir, cfg.corpus.words, true);
  corpus.node_features = build_node_features(corpus, word_vectors);
  cfg.model.graph.in_dim = word_vectors.cols();
  cfg.model.graph.out_dim = cfg.model.text.output_dim;

  Model model = Model::init(cfg.model, corpus.vocab, cfg.pretrain.seed);
  const CsrMatrix adjacency = build_normalized_adjacency(corpus);
  TrainLog log = pretrain(model, corpus, adjacency, cfg.pretrain);

  json summary;
  summary["epochs"] = cfg.pretrain.epochs;
  summary["batch_size"] = cfg.pretrain.batch_size;
  summary["eta"] = cfg.pretrain.eta;
  summary["lambda"] = cfg.pretrain.lambda;
  summary["lr"] = cfg.pretrain.lr;
  summary["loss_mask"] = cfg.pretrain.mask.str();
  summary["documents"] = corpus.num_nodes();
  if (log.num_epochs() > 0) summary["final_epoch_mean_loss"] = log.epoch_mean_total(log.num_epochs() - 1);
  summary["words"] = {{"dim", cfg.corpus.words.dim},
                      {"window", cfg.corpus.words.window},
                      {"negatives", cfg.corpus.words.negatives},
                      {"epochs", cfg.corpus.words.epochs},
                      {"lr", cfg.corpus.words.lr},
                      {"seed", cfg.corpus.words.seed}};

  PretrainOutcome outcome;
  outcome.meta.seed = cfg.pretrain.seed;
  outcome.meta.corpus_fingerprint = corpus_fingerprint(corpus);
  outcome.meta.pretrain_summary = summary.dump();
  save_checkpoint(model, outcome.meta, checkpoint_path);
  outcome.log = std::move(log);
  outcome.num_documents = corpus.num_nodes();
  outcome.num_edges = corpus.edges.size();
  outcome.vocab_size = corpus.vocab.size();
  return outcome;
}

EvalInputs prepare_evaluation(const std::string& corpus_dir, const std::string& checkpoint_path) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  Model& model = loaded.model;

  GraphTextCorpus corpus = load_corpus(corpus_dir, model.config.text.max_len);
  corpus.retokenize(model.vocab, model.config.text.max_len);
  const std::uint64_t fp = corpus_fingerprint(corpus);
  const bool mismatch = loaded.meta.corpus_fingerprint != 0 && fp != loaded.meta.corpus_fingerprint;

  const WordEmbeddingConfig words = words_from_summary(loaded.meta, model.config.graph.in_dim);
  const Tensor word_vectors = obtain_word_vectors(corpus, corpus_dir, words, false);
  if (word_vectors.cols() != model.config.graph.in_dim) {
    throw ValidationError("word vectors have width " + std::to_string(word_vectors.cols()) +
                          " but the checkpoint expects " + std::to_string(model.config.graph.in_dim));
  }
  corpus.node_features = build_node_features(corpus, word_vectors);

  const CsrMatrix adjacency = build_normalized_adjacency(corpus);
  Tensor z_all = encode_nodes(model.graph, adjacency, corpus.node_features);

  EvalInputs inputs{std::move(loaded.model), std::move(corpus), std::move(z_all), mismatch};
  return inputs;
}

}  // namespace g2p2
