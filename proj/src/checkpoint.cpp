#include "g2p2/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "g2p2/errors.hpp"

namespace g2p2 {

namespace {

constexpr char kMagic[8] = {'G', '2', 'P', '2', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host; add byte swaps before porting");

void write_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void write_str(std::ofstream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IoError(path + ": truncated checkpoint");
  return v;
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw IoError(path + ": truncated checkpoint");
  return v;
}

std::string read_str(std::ifstream& in, const std::string& path) {
  const std::uint64_t len = read_u64(in, path);
  if (len > (1ull << 32)) throw ValidationError(path + ": implausible string length in checkpoint");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len))) {
    throw IoError(path + ": truncated checkpoint");
  }
  return s;
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{
      {"text",
       {{"layers", cfg.text.layers},
        {"width", cfg.text.width},
        {"heads", cfg.text.heads},
        {"max_len", cfg.text.max_len},
        {"vocab_size", cfg.text.vocab_size},
        {"output_dim", cfg.text.output_dim},
        {"dropout", cfg.text.dropout},
        {"pooling", cfg.text.pooling == Pooling::kMean ? "mean" : "last"}}},
      {"graph",
       {{"in_dim", cfg.graph.in_dim},
        {"hidden", cfg.graph.hidden},
        {"out_dim", cfg.graph.out_dim},
        {"leaky_slope", cfg.graph.leaky_slope}}}};
}

ModelConfig config_from_json(const nlohmann::json& j, const std::string& path) {
  try {
    ModelConfig cfg;
    const auto& t = j.at("text");
    cfg.text.layers = t.at("layers").get<std::size_t>();
    cfg.text.width = t.at("width").get<std::size_t>();
    cfg.text.heads = t.at("heads").get<std::size_t>();
    cfg.text.max_len = t.at("max_len").get<std::size_t>();
    cfg.text.vocab_size = t.at("vocab_size").get<std::size_t>();
    cfg.text.output_dim = t.at("output_dim").get<std::size_t>();
    cfg.text.dropout = t.at("dropout").get<float>();
    cfg.text.pooling = t.at("pooling").get<std::string>() == "last" ? Pooling::kLastToken : Pooling::kMean;
    const auto& g = j.at("graph");
    cfg.graph.in_dim = g.at("in_dim").get<std::size_t>();
    cfg.graph.hidden = g.at("hidden").get<std::size_t>();
    cfg.graph.out_dim = g.at("out_dim").get<std::size_t>();
    cfg.graph.leaky_slope = g.at("leaky_slope").get<float>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed config snapshot: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_str(out, config_to_json(model.config).dump());
  write_u64(out, model.vocab.id_to_token.size());
  for (const std::string& token : model.vocab.id_to_token) write_str(out, token);
  write_u64(out, meta.seed);
  write_u64(out, meta.corpus_fingerprint);
  write_str(out, meta.pretrain_summary);

  Model& mut = const_cast<Model&>(model);
  const std::vector<Parameter*> params = mut.trainable();
  write_u64(out, params.size());
  for (const Parameter* p : params) {
    write_str(out, p->name);
    write_u64(out, p->value.rows());
    write_u64(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError(path + ": not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion) {
    throw ValidationError(path + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kVersion) + ")");
  }
  const std::string config_json = read_str(in, path);
  const ModelConfig cfg = config_from_json(nlohmann::json::parse(config_json, nullptr, false), path);

  const std::uint64_t vocab_count = read_u64(in, path);
  if (vocab_count < 2 || vocab_count != cfg.text.vocab_size) {
    throw ValidationError(path + ": vocabulary size disagrees with config snapshot");
  }
  Vocabulary vocab;
  vocab.id_to_token.clear();
  vocab.id_to_token.reserve(vocab_count);
  for (std::uint64_t i = 0; i < vocab_count; ++i) vocab.id_to_token.push_back(read_str(in, path));
  if (vocab.id_to_token[0] != "<pad>" || vocab.id_to_token[1] != "<unk>") {
    throw ValidationError(path + ": vocabulary is missing the reserved <pad>/<unk> entries");
  }
  for (std::size_t i = 2; i < vocab.id_to_token.size(); ++i) {
    vocab.token_to_id.emplace(vocab.id_to_token[i], static_cast<int>(i));
  }

  LoadedCheckpoint loaded;
  loaded.meta.seed = read_u64(in, path);
  loaded.meta.corpus_fingerprint = read_u64(in, path);
  loaded.meta.pretrain_summary = read_str(in, path);
  loaded.model = Model::init(cfg, vocab, /*seed=*/0);

  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : loaded.model.trainable()) by_name.emplace(p->name, p);
  const std::uint64_t param_count = read_u64(in, path);
  if (param_count != by_name.size()) {
    throw ValidationError(path + ": expected " + std::to_string(by_name.size()) + " parameter blobs, found " +
                          std::to_string(param_count));
  }
  for (std::uint64_t i = 0; i < param_count; ++i) {
    const std::string name = read_str(in, path);
    const std::uint64_t rows = read_u64(in, path);
    const std::uint64_t cols = read_u64(in, path);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError(path + ": unknown parameter blob '" + name + "'");
    Parameter* p = it->second;
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw ValidationError(path + ": parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", expected " + p->value.shape_str());
    }
    if (!in.read(reinterpret_cast<char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.numel() * sizeof(float)))) {
      throw IoError(path + ": truncated parameter blob '" + name + "'");
    }
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw ValidationError(path + ": parameter blob '" + by_name.begin()->first + "' missing");
  }
  return loaded;
}

}  // namespace g2p2
