#include "g2p2/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "g2p2/errors.hpp"
#include "g2p2/graph_encoder.hpp"
#include "g2p2/optim.hpp"
#include "g2p2/text_encoder.hpp"

namespace g2p2 {

void PretrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("pretrain: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("pretrain: batch_size must be >= 1");
  if (eta < 1) throw ValidationError("pretrain: eta must be >= 1");
  if (!(lambda > 0.0f)) throw ValidationError("pretrain: lambda must be positive");
  if (!(lr > 0.0f)) throw ValidationError("pretrain: learning rate must be positive");
  if (!mask.any()) throw ValidationError("pretrain: loss mask selects no terms");
}

double TrainLog::epoch_mean_total(std::size_t epoch) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const BatchRecord& r : batches) {
    if (r.epoch == epoch) {
      sum += r.total;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::size_t TrainLog::num_epochs() const {
  std::size_t n = 0;
  for (const BatchRecord& r : batches) n = std::max(n, r.epoch + 1);
  return n;
}

void TrainLog::write(std::ostream& out) const {
  for (const BatchRecord& r : batches) {
    out << r.epoch << ' ' << r.batch << ' ' << r.l1 << ' ' << r.l2 << ' ' << r.l3 << ' ' << r.total << ' '
        << r.exp_tau << ' ' << r.seconds << '\n';
  }
}

void TrainLog::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write training log " + path);
  write(out);
}

namespace {

std::string batch_ids_to_string(const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size() && i < 16; ++i) os << (i ? "," : "") << ids[i];
  if (ids.size() > 16) os << ",...";
  return os.str();
}

}  // namespace

TrainLog pretrain(Model& model, const GraphTextCorpus& corpus, const CsrMatrix& adjacency,
                  const PretrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = corpus.num_nodes();
  if (n == 0) throw ValidationError("pretrain: empty corpus");
  if (corpus.node_features.numel() == 0 || corpus.node_features.rows() != n) {
    throw ValidationError("pretrain: corpus.node_features must hold one row per node");
  }
  if (corpus.node_features.cols() != model.config.graph.in_dim) {
    throw ShapeError("pretrain: feature width " + std::to_string(corpus.node_features.cols()) +
                     " != graph encoder in_dim " + std::to_string(model.config.graph.in_dim));
  }

  Rng rng(cfg.seed);
  const AdamConfig adam{cfg.lr};
  const std::vector<Parameter*> params = model.trainable();
  TrainLog log;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(start + count));

      // Fresh neighbor samples each batch (the summaries change every pass).
      std::vector<std::vector<int>> contexts(count);
      for (std::size_t i = 0; i < count; ++i) {
        contexts[i] = sample_neighbors(corpus, batch[i], cfg.eta, rng);
      }

      // Every document needed this step (batch members plus sampled
      // neighbors), encoded once each.
      std::vector<int> unique_docs;
      std::unordered_map<int, int> slot_of;
      auto slot = [&](int node) {
        auto [it, inserted] = slot_of.emplace(node, static_cast<int>(unique_docs.size()));
        if (inserted) unique_docs.push_back(node);
        return it->second;
      };
      for (int node : batch) slot(node);
      for (const std::vector<int>& ctx : contexts) {
        for (int node : ctx) slot(node);
      }

      Tape tape;
      BoundTextEncoder text_enc(tape, model.text, /*trainable=*/true);
      BoundGraphEncoder graph_enc(tape, model.graph, &adjacency, /*trainable=*/true);
      Var tau = tape.param(model.tau);

      std::vector<Var> doc_vars;
      doc_vars.reserve(unique_docs.size());
      for (int node : unique_docs) {
        const TokenizedText& doc = corpus.documents[static_cast<std::size_t>(node)];
        if (doc.true_length == 0) {
          throw ValidationError("pretrain: document for node " + std::to_string(node) + " is empty");
        }
        doc_vars.push_back(text_enc.encode_tokens(doc.ids, doc.true_length));
      }
      Var t_unique = tape.concat_rows(doc_vars);

      std::vector<int> batch_slots(count);
      for (std::size_t i = 0; i < count; ++i) batch_slots[i] = slot_of.at(batch[i]);
      Var t_batch = tape.gather_rows(t_unique, batch_slots);

      std::vector<Var> summary_rows;
      summary_rows.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (contexts[i].empty()) {
          CorpusWarnings::degree_zero_summaries.fetch_add(1, std::memory_order_relaxed);
          summary_rows.push_back(tape.gather_rows(t_unique, {batch_slots[i]}));
          continue;
        }
        std::vector<int> ctx_slots(contexts[i].size());
        for (std::size_t j = 0; j < contexts[i].size(); ++j) ctx_slots[j] = slot_of.at(contexts[i][j]);
        summary_rows.push_back(tape.mean_rows(tape.gather_rows(t_unique, ctx_slots)));
      }
      Var s_batch = tape.concat_rows(summary_rows);

      Var z_all = graph_enc.encode_all(tape.constant(corpus.node_features));
      Var z_batch = tape.gather_rows(z_all, batch);

      Var l1 = npair_loss(tape, similarity_matrix(tape, t_batch, z_batch, tau, SimilarityKind::kTextNode));
      Var l2 = npair_loss(tape, similarity_matrix(tape, t_batch, s_batch, tau, SimilarityKind::kTextSummary));
      Var l3 = npair_loss(tape, similarity_matrix(tape, z_batch, s_batch, tau, SimilarityKind::kNodeSummary));
      Var total = total_loss(tape, l1, l2, l3, cfg.lambda, cfg.mask);

      if (!total.value().all_finite()) {
        throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + " (ids " + batch_ids_to_string(batch) +
                           ", exp(tau)=" + std::to_string(std::exp(model.tau.value[0])) + ")");
      }

      tape.backward(total);
      adam_step(params, adam);
      clamp_temperature(model.tau);

      const auto t1 = std::chrono::steady_clock::now();
      BatchRecord rec;
      rec.epoch = epoch;
      rec.batch = batch_index;
      rec.l1 = l1.value()[0];
      rec.l2 = l2.value()[0];
      rec.l3 = l3.value()[0];
      rec.total = total.value()[0];
      rec.exp_tau = std::exp(model.tau.value[0]);
      rec.seconds = std::chrono::duration<double>(t1 - t0).count();
      log.batches.push_back(rec);
    }
  }
  return log;
}

std::vector<ScalingRow> measure_epoch_scaling(const std::vector<const GraphTextCorpus*>& corpora,
                                              const std::vector<const CsrMatrix*>& adjacencies,
                                              const PretrainConfig& cfg, const ModelConfig& model_cfg) {
  if (corpora.size() != adjacencies.size()) {
    throw ValidationError("measure_epoch_scaling: one adjacency per corpus required");
  }
  if (corpora.empty()) throw ValidationError("measure_epoch_scaling: no corpora given");
  std::vector<ScalingRow> rows;
  rows.reserve(corpora.size());
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    const GraphTextCorpus& corpus = *corpora[i];
    Model model = Model::init(model_cfg, corpus.vocab, cfg.seed);
    PretrainConfig one_epoch = cfg;
    one_epoch.epochs = 1;
    const auto t0 = std::chrono::steady_clock::now();
    pretrain(model, corpus, *adjacencies[i], one_epoch);
    const auto t1 = std::chrono::steady_clock::now();
    rows.push_back({corpus.num_nodes(), std::chrono::duration<double>(t1 - t0).count()});
  }
  return rows;
}

}  // namespace g2p2
