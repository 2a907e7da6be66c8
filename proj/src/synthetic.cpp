#include "g2p2/synthetic.hpp"

#include <algorithm>
#include <string>

#include "g2p2/errors.hpp"

namespace g2p2 {

void SyntheticConfig::validate() const {
  if (classes < 2) throw ValidationError("synthetic corpus: need at least 2 classes");
  if (docs_per_class < 1) throw ValidationError("synthetic corpus: docs_per_class must be >= 1");
  if (class_vocab < 1 || shared_vocab < 1) {
    throw ValidationError("synthetic corpus: vocabulary sizes must be >= 1");
  }
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0) {
    throw ValidationError("synthetic corpus: edge probabilities must lie in [0, 1]");
  }
  if (!(p_in > p_out)) throw ValidationError("synthetic corpus: p_in must exceed p_out");
  if (noise < 0.0 || noise > 1.0) throw ValidationError("synthetic corpus: noise rate must lie in [0, 1]");
  if (doc_len_min < 1 || doc_len_max < doc_len_min) {
    throw ValidationError("synthetic corpus: document length range is invalid");
  }
  if (label_tokens < 1 || label_tokens > class_vocab) {
    throw ValidationError("synthetic corpus: label_tokens must lie in [1, class_vocab]");
  }
}

namespace {

// Cumulative Zipf distribution over ranks 0..n-1 with weight 1/(rank+1).
std::vector<double> zipf_cdf(std::size_t n) {
  std::vector<double> cdf(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += 1.0 / static_cast<double>(i + 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += 1.0 / (static_cast<double>(i + 1) * total);
    cdf[i] = acc;
  }
  cdf[n - 1] = 1.0;
  return cdf;
}

std::size_t draw(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  return static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

}  // namespace

GraphTextCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.classes * cfg.docs_per_class;

  const std::vector<double> class_cdf = zipf_cdf(cfg.class_vocab);
  const std::vector<double> shared_cdf = zipf_cdf(cfg.shared_vocab);
  auto class_word = [&](std::size_t c, std::size_t k) {
    return "c" + std::to_string(c) + "w" + std::to_string(k);
  };
  auto shared_word = [](std::size_t k) { return "sw" + std::to_string(k); };

  GraphTextCorpus corpus;
  corpus.raw_documents.reserve(n);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t d = 0; d < cfg.docs_per_class; ++d) {
      const std::size_t len = cfg.doc_len_min + rng.uniform_index(cfg.doc_len_max - cfg.doc_len_min + 1);
      std::string doc;
      for (std::size_t t = 0; t < len; ++t) {
        if (!doc.empty()) doc.push_back(' ');
        if (rng.bernoulli(cfg.noise)) {
          doc += shared_word(draw(shared_cdf, rng));
        } else {
          doc += class_word(c, draw(class_cdf, rng));
        }
      }
      corpus.raw_documents.push_back(std::move(doc));
      corpus.labels.emplace(static_cast<int>(corpus.raw_documents.size() - 1), static_cast<int>(c));
    }
  }

  corpus.adjacency.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ci = i / cfg.docs_per_class;
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t cj = j / cfg.docs_per_class;
      const double p = ci == cj ? cfg.p_in : cfg.p_out;
      if (rng.bernoulli(p)) {
        corpus.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        corpus.adjacency[i].push_back(static_cast<int>(j));
        corpus.adjacency[j].push_back(static_cast<int>(i));
      }
    }
  }
  for (auto& nbrs : corpus.adjacency) std::sort(nbrs.begin(), nbrs.end());

  for (std::size_t c = 0; c < cfg.classes; ++c) {
    std::string label;
    for (std::size_t k = 0; k < cfg.label_tokens; ++k) {
      if (!label.empty()) label.push_back(' ');
      label += class_word(c, k);
    }
    corpus.class_label_raw.emplace(static_cast<int>(c), std::move(label));
  }

  corpus.retokenize(Vocabulary::build(corpus.raw_documents, /*min_freq=*/2), /*new_max_len=*/128);
  return corpus;
}

}  // namespace g2p2
