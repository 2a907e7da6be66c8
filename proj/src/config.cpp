#include "g2p2/config.hpp"

#include <fstream>
#include <sstream>

#include "g2p2/errors.hpp"

namespace g2p2 {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

struct Setter {
  RunConfig* cfg;
  std::string origin;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(origin + ":" + std::to_string(line) + ": " + what);
  }

  std::size_t to_size(const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long long parsed = std::stoll(v, &pos);
      if (pos != v.size() || parsed < 0) fail("expected a non-negative integer, got '" + v + "'");
      return static_cast<std::size_t>(parsed);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a non-negative integer, got '" + v + "'");
    }
  }

  double to_double(const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double parsed = std::stod(v, &pos);
      if (pos != v.size()) fail("expected a number, got '" + v + "'");
      return parsed;
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a number, got '" + v + "'");
    }
  }

  std::uint64_t to_seed(const std::string& v) const {
    try {
      std::size_t pos = 0;
      const unsigned long long parsed = std::stoull(v, &pos);
      if (pos != v.size()) fail("expected a seed integer, got '" + v + "'");
      return parsed;
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a seed integer, got '" + v + "'");
    }
  }

  void apply(const std::string& section, const std::string& key, const std::string& value) const {
    RunConfig& c = *cfg;
    if (section == "text") {
      if (key == "layers") c.model.text.layers = to_size(value);
      else if (key == "width") c.model.text.width = to_size(value);
      else if (key == "heads") c.model.text.heads = to_size(value);
      else if (key == "max_len") c.model.text.max_len = to_size(value);
      else if (key == "output_dim") c.model.text.output_dim = to_size(value);
      else if (key == "dropout") c.model.text.dropout = static_cast<float>(to_double(value));
      else if (key == "pooling") {
        if (value == "mean") c.model.text.pooling = Pooling::kMean;
        else if (value == "last") c.model.text.pooling = Pooling::kLastToken;
        else fail("pooling must be 'mean' or 'last'");
      } else fail("unknown key '" + key + "' in [text]");
    } else if (section == "graph") {
      if (key == "hidden") c.model.graph.hidden = to_size(value);
      else if (key == "leaky_slope") c.model.graph.leaky_slope = static_cast<float>(to_double(value));
      else fail("unknown key '" + key + "' in [graph]");
    } else if (section == "corpus") {
      if (key == "min_freq") c.corpus.min_freq = static_cast<int>(to_size(value));
      else if (key == "word_dim") c.corpus.words.dim = to_size(value);
      else if (key == "word_window") c.corpus.words.window = to_size(value);
      else if (key == "word_negatives") c.corpus.words.negatives = to_size(value);
      else if (key == "word_epochs") c.corpus.words.epochs = to_size(value);
      else if (key == "word_lr") c.corpus.words.lr = static_cast<float>(to_double(value));
      else fail("unknown key '" + key + "' in [corpus]");
    } else if (section == "pretrain") {
      if (key == "epochs") c.pretrain.epochs = to_size(value);
      else if (key == "batch_size") c.pretrain.batch_size = to_size(value);
      else if (key == "eta") c.pretrain.eta = to_size(value);
      else if (key == "lambda") c.pretrain.lambda = static_cast<float>(to_double(value));
      else if (key == "lr") c.pretrain.lr = static_cast<float>(to_double(value));
      else if (key == "seed") c.pretrain.seed = to_seed(value);
      else if (key == "loss_mask") {
        try {
          c.pretrain.mask = LossMask::parse(value);
        } catch (const ValidationError& e) {
          fail(e.what());
        }
      } else fail("unknown key '" + key + "' in [pretrain]");
    } else if (section == "prompt") {
      if (key == "length") c.prompt.prompt_len = to_size(value);
      else if (key == "iters") c.prompt.iters = to_size(value);
      else if (key == "lr") c.prompt.lr = static_cast<float>(to_double(value));
      else if (key == "eta") c.prompt.eta = to_size(value);
      else fail("unknown key '" + key + "' in [prompt]");
    } else if (section == "eval") {
      if (key == "ways") c.eval.ways = to_size(value);
      else if (key == "tasks") c.eval.tasks = to_size(value);
      else if (key == "seed") c.eval.seed = to_seed(value);
      else if (key == "query_cap") c.eval.query_cap = to_size(value);
      else fail("unknown key '" + key + "' in [eval]");
    } else if (section == "synth") {
      if (key == "classes") c.synth.classes = to_size(value);
      else if (key == "docs_per_class") c.synth.docs_per_class = to_size(value);
      else if (key == "class_vocab") c.synth.class_vocab = to_size(value);
      else if (key == "shared_vocab") c.synth.shared_vocab = to_size(value);
      else if (key == "p_in") c.synth.p_in = to_double(value);
      else if (key == "p_out") c.synth.p_out = to_double(value);
      else if (key == "noise") c.synth.noise = to_double(value);
      else if (key == "doc_len_min") c.synth.doc_len_min = to_size(value);
      else if (key == "doc_len_max") c.synth.doc_len_max = to_size(value);
      else if (key == "label_tokens") c.synth.label_tokens = to_size(value);
      else if (key == "seed") c.synth.seed = to_seed(value);
      else fail("unknown key '" + key + "' in [synth]");
    } else {
      fail("unknown section [" + section + "]");
    }
  }
};

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  Setter setter{&cfg, origin};
  std::istringstream in(text);
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    ++setter.line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') setter.fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) setter.fail("empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) setter.fail("expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) setter.fail("expected `key = value`");
    if (section.empty()) setter.fail("key '" + key + "' appears before any [section]");
    setter.apply(section, key, value);
  }
  // The graph encoder's outer dimensions follow the feature width and the
  // text output dimension; they are derived, never set directly.
  cfg.model.graph.in_dim = cfg.corpus.words.dim;
  cfg.model.graph.out_dim = cfg.model.text.output_dim;
  // Fail on structurally invalid values at parse time rather than when the
  // model is first built. vocab_size is only known once a corpus is loaded,
  // so stand in the minimum legal value for the shape checks.
  ModelConfig structural = cfg.model;
  structural.text.vocab_size = 2;
  structural.validate();
  cfg.pretrain.validate();
  cfg.prompt.validate(cfg.model.text);
  cfg.synth.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  if (path.empty()) return parse_run_config_text("", "<defaults>");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config_text(buffer.str(), path);
}

}  // namespace g2p2
