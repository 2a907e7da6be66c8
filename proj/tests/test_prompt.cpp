#include <doctest.h>

#include <cmath>
#include <map>

#include "g2p2/graph_encoder.hpp"
#include "g2p2/prompt.hpp"
#include "g2p2/synthetic.hpp"
#include "g2p2/word_embeddings.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using g2p2::ClassWeights;
using g2p2::DiscretePrompt;
using g2p2::GraphTextCorpus;
using g2p2::Model;
using g2p2::Tape;
using g2p2::Tensor;
using g2p2::TokenizedText;
using g2p2::Var;

namespace {

Model labeled_model(const GraphTextCorpus& corpus, std::uint64_t seed = 3) {
  return Model::init(testutil::tiny_model_config(8, 2, 2, corpus.max_len, 8, 8, 8), corpus.vocab, seed);
}

// Corpus whose class labels reuse document words, so label texts tokenize
// without unknowns.
GraphTextCorpus prompt_corpus() {
  return testutil::make_corpus(
      {"apple fruit sweet", "apple tree orchard", "carrot root soil", "carrot garden soil",
       "apple carrot market"},
      {{0, 1}, {2, 3}, {0, 4}, {2, 4}}, /*max_len=*/8,
      {{0, 0}, {1, 0}, {2, 1}, {3, 1}, {4, 0}},
      {{0, "apple fruit"}, {1, "carrot root"}});
}

}  // namespace

TEST_SUITE("discrete prompt") {
  TEST_CASE("parses empty and single-placeholder templates") {
    CHECK(DiscretePrompt::parse("").empty());
    const DiscretePrompt p = DiscretePrompt::parse("a study of [CLASS] research");
    CHECK(p.substitute("biology") == "a study of biology research");
  }

  TEST_CASE("rejects templates without exactly one placeholder") {
    CHECK_THROWS_AS(DiscretePrompt::parse("no placeholder here"), g2p2::ValidationError);
    CHECK_THROWS_AS(DiscretePrompt::parse("[CLASS] and [CLASS]"), g2p2::ValidationError);
  }
}

TEST_SUITE("zero_shot_weights") {
  TEST_CASE("identical label texts give identical rows") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    std::map<int, std::string> labels{{0, "apple fruit"}, {1, "apple fruit"}};
    const ClassWeights w = g2p2::zero_shot_weights(model, labels, DiscretePrompt::parse(""));
    REQUIRE(w.matrix.rows() == 2);
    for (std::size_t j = 0; j < w.matrix.cols(); ++j) CHECK(w.matrix.at(0, j) == w.matrix.at(1, j));
  }

  TEST_CASE("rows are unit-norm") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const ClassWeights w =
        g2p2::zero_shot_weights(model, corpus.class_label_raw, DiscretePrompt::parse(""));
    for (std::size_t i = 0; i < w.matrix.rows(); ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < w.matrix.cols(); ++j) norm += w.matrix.at(i, j) * w.matrix.at(i, j);
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("templates move the weights") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const ClassWeights empty =
        g2p2::zero_shot_weights(model, corpus.class_label_raw, DiscretePrompt::parse(""));
    const ClassWeights wrapped = g2p2::zero_shot_weights(model, corpus.class_label_raw,
                                                         DiscretePrompt::parse("market stand of [CLASS]"));
    double diff = 0.0;
    for (std::size_t i = 0; i < empty.matrix.numel(); ++i)
      diff += std::fabs(empty.matrix[i] - wrapped.matrix[i]);
    CHECK(diff > 1e-6);
  }

  TEST_CASE("weights decompose into encode then normalize") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const ClassWeights w =
        g2p2::zero_shot_weights(model, corpus.class_label_raw, DiscretePrompt::parse(""));
    std::size_t row = 0;
    for (const auto& [cid, label] : corpus.class_label_raw) {
      const TokenizedText tok = g2p2::tokenize(label, model.vocab, model.config.text.max_len);
      const Tensor emb = g2p2::encode_text_eager(model.text, tok.ids, tok.true_length);
      double norm = 0.0;
      for (std::size_t j = 0; j < emb.numel(); ++j) norm += emb[j] * emb[j];
      norm = std::sqrt(norm) + 1e-12;
      for (std::size_t j = 0; j < emb.numel(); ++j) {
        CHECK(std::fabs(w.matrix.at(row, j) - emb[j] / norm) < 1e-6);
      }
      ++row;
    }
  }

  TEST_CASE("overlong substitution truncates with a warning") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const auto before = g2p2::CorpusWarnings::truncated_prompts.load();
    const DiscretePrompt tmpl =
        DiscretePrompt::parse("very long template about many things regarding [CLASS]");
    const ClassWeights w = g2p2::zero_shot_weights(model, corpus.class_label_raw, tmpl);
    CHECK(w.matrix.rows() == 2);
    CHECK(g2p2::CorpusWarnings::truncated_prompts.load() > before);
  }
}

TEST_SUITE("classify") {
  TEST_CASE("embedding equal to one weight row wins") {
    ClassWeights w;
    w.matrix = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    w.class_ids = {2, 5, 9};
    const g2p2::Classification res = g2p2::classify(Tensor::row({0, 0, 2}), w);
    CHECK(res.predicted_class == 9);
    CHECK(res.probabilities[2] > res.probabilities[0]);
    CHECK(res.probabilities[2] > res.probabilities[1]);
  }

  TEST_CASE("orthogonal embedding gives the uniform distribution") {
    ClassWeights w;
    w.matrix = Tensor(5, 8);
    for (std::size_t i = 0; i < 5; ++i) w.matrix.at(i, i) = 1.0f;
    w.class_ids = {0, 1, 2, 3, 4};
    Tensor z(1, 8);
    z.at(0, 7) = 3.0f;  // orthogonal to every weight row
    const g2p2::Classification res = g2p2::classify(z, w);
    for (float p : res.probabilities) CHECK(p == doctest::Approx(0.2f).epsilon(1e-5));
    CHECK(res.predicted_class == 0);  // uniform ties break to the lowest id
  }

  TEST_CASE("scaling the embedding changes nothing") {
    g2p2::Rng rng(3);
    ClassWeights w;
    Tensor m = testutil::random_tensor(4, 6, rng);
    Tape tape;
    w.matrix = tape.l2_normalize_rows(tape.constant(m)).value();
    w.class_ids = {0, 1, 2, 3};
    Tensor z = testutil::random_tensor(1, 6, rng);
    Tensor z7 = z;
    for (std::size_t i = 0; i < z7.numel(); ++i) z7[i] *= 7.0f;
    const auto a = g2p2::classify(z, w);
    const auto b = g2p2::classify(z7, w);
    CHECK(a.predicted_class == b.predicted_class);
    for (std::size_t i = 0; i < a.probabilities.size(); ++i) {
      CHECK(a.probabilities[i] == doctest::Approx(b.probabilities[i]).epsilon(1e-5));
    }
  }

  TEST_CASE("probabilities sum to one") {
    g2p2::Rng rng(5);
    ClassWeights w;
    Tensor m = testutil::random_tensor(3, 4, rng);
    Tape tape;
    w.matrix = tape.l2_normalize_rows(tape.constant(m)).value();
    w.class_ids = {0, 1, 2};
    const auto res = g2p2::classify(testutil::random_tensor(1, 4, rng), w);
    float sum = 0.0f;
    for (float p : res.probabilities) sum += p;
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-5));
  }
}

TEST_SUITE("init_prompt_from_context") {
  TEST_CASE("singleton support with no contexts copies the document prefix") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    g2p2::Rng rng(1);
    const std::size_t m = 2;
    const Tensor prompt =
        g2p2::init_prompt_from_context(corpus, model.text.token_embedding.value, {0}, m, 0, rng);
    REQUIRE(prompt.rows() == m);
    const auto& doc = corpus.documents[0];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < prompt.cols(); ++j) {
        CHECK(prompt.at(i, j) ==
              model.text.token_embedding.value.at(static_cast<std::size_t>(doc.ids[i]), j));
      }
    }
  }

  TEST_CASE("short documents are padded with the pad embedding row") {
    const GraphTextCorpus corpus = testutil::make_corpus({"word", "other text"}, {}, 8);
    Model model = labeled_model(corpus);
    g2p2::Rng rng(1);
    const Tensor prompt =
        g2p2::init_prompt_from_context(corpus, model.text.token_embedding.value, {0}, 3, 0, rng);
    // Document 0 has one token; prompt rows 1..2 must equal the pad row.
    for (std::size_t i = 1; i < 3; ++i) {
      for (std::size_t j = 0; j < prompt.cols(); ++j) {
        CHECK(prompt.at(i, j) == model.text.token_embedding.value.at(g2p2::Vocabulary::kPad, j));
      }
    }
  }

  TEST_CASE("two sequences average positionwise") {
    // Nodes 0 and 1 are connected; support {0} with eta 3 draws the single
    // neighbor 1, so the prompt is the mean of both documents' prefixes.
    const GraphTextCorpus corpus = testutil::make_corpus({"apple fruit sweet", "carrot root soil"},
                                                         {{0, 1}}, 8);
    Model model = labeled_model(corpus);
    g2p2::Rng rng(1);
    const std::size_t m = 3;
    const Tensor prompt =
        g2p2::init_prompt_from_context(corpus, model.text.token_embedding.value, {0}, m, 3, rng);
    const auto& d0 = corpus.documents[0];
    const auto& d1 = corpus.documents[1];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < prompt.cols(); ++j) {
        const float u = model.text.token_embedding.value.at(static_cast<std::size_t>(d0.ids[i]), j);
        const float v = model.text.token_embedding.value.at(static_cast<std::size_t>(d1.ids[i]), j);
        CHECK(prompt.at(i, j) == doctest::Approx(0.5f * (u + v)));
      }
    }
  }

  TEST_CASE("matches a loop oracle over all sampled sequences") {
    // Dense synthetic block so every support node has degree >= eta.
    g2p2::SyntheticConfig scfg;
    scfg.classes = 5;
    scfg.docs_per_class = 10;
    scfg.class_vocab = 6;
    scfg.shared_vocab = 15;
    scfg.p_in = 0.9;
    scfg.p_out = 0.4;
    scfg.doc_len_min = 6;
    scfg.doc_len_max = 12;
    scfg.seed = 8;
    const GraphTextCorpus corpus = g2p2::generate_synthetic_corpus(scfg);
    Model model = Model::init(testutil::tiny_model_config(8, 2, 2, corpus.max_len, 8, 8, 8),
                              corpus.vocab, 2);

    // 5-way 5-shot support: five nodes from each class.
    std::vector<int> support;
    for (int cls = 0; cls < 5; ++cls) {
      const auto members = corpus.labeled_nodes_of_class(cls);
      REQUIRE(members.size() >= 5);
      for (int i = 0; i < 5; ++i) support.push_back(members[static_cast<std::size_t>(i)]);
    }
    const std::size_t eta = 3;
    const std::size_t m = 4;

    g2p2::Rng rng(55);
    g2p2::Rng replay = rng;
    const Tensor prompt =
        g2p2::init_prompt_from_context(corpus, model.text.token_embedding.value, support, m, eta, rng);

    // Loop oracle: replay the identical draw sequence.
    const Tensor& table = model.text.token_embedding.value;
    std::vector<std::vector<double>> sum(m, std::vector<double>(table.cols(), 0.0));
    std::size_t sequences = 0;
    auto accumulate = [&](int node) {
      const auto& doc = corpus.documents[static_cast<std::size_t>(node)];
      for (std::size_t i = 0; i < m; ++i) {
        const int tok = i < doc.true_length ? doc.ids[i] : g2p2::Vocabulary::kPad;
        for (std::size_t j = 0; j < table.cols(); ++j)
          sum[i][j] += table.at(static_cast<std::size_t>(tok), j);
      }
      ++sequences;
    };
    for (int node : support) {
      accumulate(node);
      for (int ctx : g2p2::sample_neighbors(corpus, node, eta, replay)) accumulate(ctx);
    }
    CHECK(sequences == support.size() * (eta + 1));  // all degrees >= eta here
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < table.cols(); ++j) {
        CHECK(std::fabs(prompt.at(i, j) - sum[i][j] / static_cast<double>(sequences)) < 1e-5);
      }
    }
  }

  TEST_CASE("empty support is rejected") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    g2p2::Rng rng(1);
    CHECK_THROWS_AS(
        g2p2::init_prompt_from_context(corpus, model.text.token_embedding.value, {}, 2, 3, rng),
        g2p2::ValidationError);
  }
}

TEST_SUITE("few_shot_weights") {
  TEST_CASE("no prompt reduces to empty-template zero-shot weights bitwise") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const ClassWeights zero =
        g2p2::zero_shot_weights(model, corpus.class_label_raw, DiscretePrompt::parse(""));

    Tape tape;
    g2p2::BoundTextEncoder enc(tape, model.text, false);
    std::vector<std::pair<int, TokenizedText>> class_tokens;
    for (const auto& [cid, text] : corpus.class_label_raw) {
      class_tokens.emplace_back(cid, g2p2::tokenize(text, model.vocab, model.config.text.max_len));
    }
    const Tensor& few = g2p2::few_shot_weights(tape, enc, std::nullopt, class_tokens).value();
    REQUIRE(few.numel() == zero.matrix.numel());
    for (std::size_t i = 0; i < few.numel(); ++i) CHECK(few[i] == zero.matrix[i]);
  }

  TEST_CASE("same prompt with different labels gives different rows") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    Tape tape;
    g2p2::BoundTextEncoder enc(tape, model.text, false);
    g2p2::Rng rng(9);
    Var prompt = tape.constant(testutil::random_tensor(2, 8, rng, 0.1));
    std::vector<std::pair<int, TokenizedText>> class_tokens;
    for (const auto& [cid, text] : corpus.class_label_raw) {
      class_tokens.emplace_back(cid, g2p2::tokenize(text, model.vocab, model.config.text.max_len));
    }
    const Tensor& w = g2p2::few_shot_weights(tape, enc, prompt, class_tokens).value();
    double diff = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) diff += std::fabs(w.at(0, j) - w.at(1, j));
    CHECK(diff > 1e-6);
  }

  TEST_CASE("prompt too long for max_len is rejected") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    Tape tape;
    g2p2::BoundTextEncoder enc(tape, model.text, false);
    Var prompt = tape.constant(Tensor(corpus.max_len, 8));
    std::vector<std::pair<int, TokenizedText>> class_tokens{
        {0, g2p2::tokenize("apple", model.vocab, corpus.max_len)}};
    CHECK_THROWS_AS(g2p2::few_shot_weights(tape, enc, prompt, class_tokens), g2p2::ValidationError);
  }
}

TEST_SUITE("prompt_tune") {
  static g2p2::FewShotTask two_way_task() {
    g2p2::FewShotTask task;
    task.class_ids = {0, 1};
    task.support[0] = {0};
    task.support[1] = {2};
    task.validation[0] = {1};
    task.validation[1] = {3};
    task.query = {{4, 0}};
    return task;
  }

  TEST_CASE("trains exactly prompt_len by width parameters") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const g2p2::CsrMatrix adj = g2p2::build_normalized_adjacency(corpus);
    g2p2::Rng rng(4);
    Tensor feats = testutil::random_tensor(corpus.num_nodes(), 8, rng);
    const Tensor z_all = g2p2::encode_nodes(model.graph, adj, feats);

    g2p2::PromptTuneConfig cfg;
    cfg.prompt_len = 3;
    cfg.iters = 5;
    const g2p2::PromptTuneResult res = g2p2::prompt_tune(model, corpus, z_all, two_way_task(), cfg);
    CHECK(res.trainable_parameters == 3 * model.config.text.width);
    CHECK(res.prompt.rows() == 3);
    CHECK(res.support_losses.size() == 5);
  }

  TEST_CASE("encoders and temperature are bitwise-frozen") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const g2p2::CsrMatrix adj = g2p2::build_normalized_adjacency(corpus);
    g2p2::Rng rng(4);
    Tensor feats = testutil::random_tensor(corpus.num_nodes(), 8, rng);
    const Tensor z_all = g2p2::encode_nodes(model.graph, adj, feats);

    std::map<std::string, Tensor> before;
    for (g2p2::Parameter* p : model.trainable()) before.emplace(p->name, p->value);

    g2p2::PromptTuneConfig cfg;
    cfg.iters = 8;
    g2p2::prompt_tune(model, corpus, z_all, two_way_task(), cfg);

    for (g2p2::Parameter* p : model.trainable()) {
      const Tensor& snap = before.at(p->name);
      for (std::size_t i = 0; i < p->numel(); ++i) {
        if (p->value[i] != snap[i]) FAIL(p->name, " changed at ", i);
      }
    }
  }

  TEST_CASE("context initialization averages min(eta, degree) plus one sequences") {
    const GraphTextCorpus corpus = prompt_corpus();
    // Expected sequence count for support {0, 2} with eta = 3:
    // degree(0) = 2, degree(2) = 2 -> (2+1) + (2+1) = 6. Verified indirectly:
    // the init must equal a manual average over those sequences.
    Model model = labeled_model(corpus);
    g2p2::Rng rng(31);
    g2p2::Rng replay = rng;
    const Tensor prompt = g2p2::init_prompt_from_context(corpus, model.text.token_embedding.value,
                                                         {0, 2}, 2, 3, rng);
    const Tensor& table = model.text.token_embedding.value;
    std::vector<int> nodes;
    for (int node : {0, 2}) {
      nodes.push_back(node);
      for (int ctx : g2p2::sample_neighbors(corpus, node, 3, replay)) nodes.push_back(ctx);
    }
    CHECK(nodes.size() == 6);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < table.cols(); ++j) {
        double sum = 0.0;
        for (int node : nodes) {
          const auto& doc = corpus.documents[static_cast<std::size_t>(node)];
          const int tok = i < doc.true_length ? doc.ids[i] : g2p2::Vocabulary::kPad;
          sum += table.at(static_cast<std::size_t>(tok), j);
        }
        CHECK(std::fabs(prompt.at(i, j) - sum / 6.0) < 1e-6);
      }
    }
  }

  TEST_CASE("random and label-only inits are accepted") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const g2p2::CsrMatrix adj = g2p2::build_normalized_adjacency(corpus);
    g2p2::Rng rng(4);
    Tensor feats = testutil::random_tensor(corpus.num_nodes(), 8, rng);
    const Tensor z_all = g2p2::encode_nodes(model.graph, adj, feats);

    g2p2::PromptTuneConfig cfg;
    cfg.iters = 3;
    cfg.init = g2p2::PromptInit::kRandom;
    const auto random_res = g2p2::prompt_tune(model, corpus, z_all, two_way_task(), cfg);
    CHECK(random_res.prompt.rows() == cfg.prompt_len);

    CHECK(g2p2::parse_prompt_init("context") == g2p2::PromptInit::kContext);
    CHECK(g2p2::parse_prompt_init("random") == g2p2::PromptInit::kRandom);
    CHECK(g2p2::parse_prompt_init("label-only") == g2p2::PromptInit::kLabelOnly);
    CHECK_THROWS_AS(g2p2::parse_prompt_init("bogus"), g2p2::ValidationError);
  }

  TEST_CASE("deterministic given the seed") {
    const GraphTextCorpus corpus = prompt_corpus();
    Model model = labeled_model(corpus);
    const g2p2::CsrMatrix adj = g2p2::build_normalized_adjacency(corpus);
    g2p2::Rng rng(4);
    Tensor feats = testutil::random_tensor(corpus.num_nodes(), 8, rng);
    const Tensor z_all = g2p2::encode_nodes(model.graph, adj, feats);

    g2p2::PromptTuneConfig cfg;
    cfg.iters = 6;
    cfg.seed = 77;
    const auto a = g2p2::prompt_tune(model, corpus, z_all, two_way_task(), cfg);
    const auto b = g2p2::prompt_tune(model, corpus, z_all, two_way_task(), cfg);
    REQUIRE(a.prompt.numel() == b.prompt.numel());
    for (std::size_t i = 0; i < a.prompt.numel(); ++i) CHECK(a.prompt[i] == b.prompt[i]);
    CHECK(a.best_iteration == b.best_iteration);
    CHECK(a.best_val_accuracy == b.best_val_accuracy);
  }
}
