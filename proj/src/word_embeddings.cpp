#include "g2p2/word_embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "g2p2/errors.hpp"

namespace g2p2 {

namespace {

float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// Cumulative unigram^0.75 distribution for negative sampling.
std::vector<double> negative_table(const GraphTextCorpus& corpus, std::size_t vocab_size) {
  std::vector<double> weight(vocab_size, 0.0);
  for (const TokenizedText& doc : corpus.documents) {
    for (std::size_t p = 0; p < doc.true_length; ++p) weight[static_cast<std::size_t>(doc.ids[p])] += 1.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    weight[i] = std::pow(weight[i], 0.75);
    total += weight[i];
  }
  if (total <= 0.0) throw ValidationError("train_word_embeddings: corpus has no tokens");
  double acc = 0.0;
  for (double& w : weight) {
    acc += w / total;
    w = acc;
  }
  weight.back() = 1.0;
  return weight;
}

}  // namespace

Tensor train_word_embeddings(const GraphTextCorpus& corpus, const WordEmbeddingConfig& cfg) {
  if (cfg.dim < 1 || cfg.window < 1 || cfg.epochs < 1) {
    throw ValidationError("train_word_embeddings: dim, window, and epochs must be >= 1");
  }
  const std::size_t v = corpus.vocab.size();
  Rng rng(cfg.seed);
  Tensor w_in(v, cfg.dim);
  Tensor w_out(v, cfg.dim);
  const float span = 0.5f / static_cast<float>(cfg.dim);
  for (std::size_t i = 0; i < w_in.numel(); ++i) w_in[i] = static_cast<float>(rng.uniform(-span, span));

  const std::vector<double> cdf = negative_table(corpus, v);
  auto draw_negative = [&]() {
    const double u = rng.uniform();
    return static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  std::vector<float> grad_center(cfg.dim);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const TokenizedText& doc : corpus.documents) {
      const std::size_t len = doc.true_length;
      for (std::size_t i = 0; i < len; ++i) {
        const auto center = static_cast<std::size_t>(doc.ids[i]);
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(len, i + cfg.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          const auto context = static_cast<std::size_t>(doc.ids[j]);
          float* h = w_in.row_ptr(center);
          std::fill(grad_center.begin(), grad_center.end(), 0.0f);
          for (std::size_t k = 0; k <= cfg.negatives; ++k) {
            std::size_t target;
            float label;
            if (k == 0) {
              target = context;
              label = 1.0f;
            } else {
              target = draw_negative();
              if (target == context) continue;
              label = 0.0f;
            }
            float* u = w_out.row_ptr(target);
            float dot = 0.0f;
            for (std::size_t d = 0; d < cfg.dim; ++d) dot += h[d] * u[d];
            const float g = cfg.lr * (label - sigmoidf(dot));
            for (std::size_t d = 0; d < cfg.dim; ++d) {
              grad_center[d] += g * u[d];
              u[d] += g * h[d];
            }
          }
          for (std::size_t d = 0; d < cfg.dim; ++d) h[d] += grad_center[d];
        }
      }
    }
  }
  if (!w_in.all_finite()) throw NumericError("train_word_embeddings: non-finite embedding values");
  return w_in;
}

namespace {

constexpr std::uint32_t kEmbeddingsMagic = 0x45503247u;  // "G2PE" little-endian
constexpr std::uint32_t kEmbeddingsVersion = 1u;

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError(path + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_embeddings(const Tensor& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  write_u32(out, kEmbeddingsMagic);
  write_u32(out, kEmbeddingsVersion);
  write_u32(out, static_cast<std::uint32_t>(table.rows()));
  write_u32(out, static_cast<std::uint32_t>(table.cols()));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(table.data()), static_cast<std::streamsize>(table.numel() * 4));
  if (!out) throw IoError("short write to " + path);
}

Tensor load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_u32(in, path) != kEmbeddingsMagic) throw ValidationError(path + ": bad magic");
  const std::uint32_t version = read_u32(in, path);
  if (version != kEmbeddingsVersion) {
    throw ValidationError(path + ": unsupported format version " + std::to_string(version));
  }
  const std::uint32_t rows = read_u32(in, path);
  const std::uint32_t cols = read_u32(in, path);
  Tensor t(rows, cols);
  if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4))) {
    throw IoError(path + ": truncated data");
  }
  return t;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
    out << i << '\t' << vocab.id_to_token[i] << '\n';
  }
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Vocabulary v;
  v.id_to_token.clear();
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(number) + ": expected `id<TAB>token`");
    }
    const std::string id_str = line.substr(0, tab);
    const std::string token = line.substr(tab + 1);
    if (id_str != std::to_string(v.id_to_token.size())) {
      throw ValidationError(path + ":" + std::to_string(number) + ": ids must be dense from 0, got " + id_str);
    }
    v.id_to_token.push_back(token);
  }
  if (v.id_to_token.size() < 2 || v.id_to_token[0] != "<pad>" || v.id_to_token[1] != "<unk>") {
    throw ValidationError(path + ": first entries must be <pad> and <unk>");
  }
  for (std::size_t i = 2; i < v.id_to_token.size(); ++i) {
    if (!v.token_to_id.emplace(v.id_to_token[i], static_cast<int>(i)).second) {
      throw ValidationError(path + ": duplicate token '" + v.id_to_token[i] + "'");
    }
  }
  return v;
}

}  // namespace g2p2
