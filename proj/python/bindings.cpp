// Python module exposing the main operations: synthetic corpus generation,
// joint pre-training, zero-/few-shot evaluation, and text encoding.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "g2p2/config.hpp"
#include "g2p2/driver.hpp"
#include "g2p2/errors.hpp"
#include "g2p2/prompt.hpp"
#include "g2p2/synthetic.hpp"
#include "g2p2/tasks.hpp"

namespace py = pybind11;

namespace {

py::dict report_to_dict(const g2p2::EvalReport& report) {
  py::dict d;
  d["mean_accuracy"] = report.mean_accuracy();
  d["mean_macro_f1"] = report.mean_macro_f1();
  d["accuracy_ci"] = report.accuracy_ci();
  d["macro_f1_ci"] = report.macro_f1_ci();
  d["query_capped"] = report.query_capped;
  py::list tasks;
  for (const g2p2::TaskScore& t : report.tasks) {
    py::dict row;
    row["accuracy"] = t.accuracy;
    row["macro_f1"] = t.macro_f1;
    tasks.append(row);
  }
  d["tasks"] = tasks;
  return d;
}

py::dict generate_corpus(const std::string& out_dir, std::size_t classes, std::size_t docs_per_class,
                         std::size_t class_vocab, std::size_t shared_vocab, double p_in, double p_out,
                         double noise, std::uint64_t seed) {
  g2p2::SyntheticConfig cfg;
  cfg.classes = classes;
  cfg.docs_per_class = docs_per_class;
  cfg.class_vocab = class_vocab;
  cfg.shared_vocab = shared_vocab;
  cfg.p_in = p_in;
  cfg.p_out = p_out;
  cfg.noise = noise;
  cfg.seed = seed;
  g2p2::GraphTextCorpus corpus = g2p2::generate_synthetic_corpus(cfg);
  std::filesystem::create_directories(out_dir);
  g2p2::save_corpus(corpus, out_dir);
  py::dict d;
  d["documents"] = corpus.num_nodes();
  d["edges"] = corpus.edges.size();
  d["classes"] = corpus.class_label_raw.size();
  return d;
}

py::dict pretrain(const std::string& corpus_dir, const std::string& checkpoint, std::size_t epochs,
                  std::size_t batch_size, float lr, float lambda, std::size_t eta, std::uint64_t seed,
                  const std::string& loss_mask, const std::string& config) {
  g2p2::RunConfig cfg = g2p2::parse_run_config(config);
  cfg.pretrain.epochs = epochs;
  cfg.pretrain.batch_size = batch_size;
  cfg.pretrain.lr = lr;
  cfg.pretrain.lambda = lambda;
  cfg.pretrain.eta = eta;
  cfg.pretrain.seed = seed;
  if (!loss_mask.empty()) cfg.pretrain.mask = g2p2::LossMask::parse(loss_mask);
  const g2p2::PretrainOutcome outcome = g2p2::run_pretrain(corpus_dir, checkpoint, cfg);
  py::dict d;
  d["documents"] = outcome.num_documents;
  d["edges"] = outcome.num_edges;
  d["vocab_size"] = outcome.vocab_size;
  d["epochs"] = outcome.log.num_epochs();
  py::list means;
  for (std::size_t e = 0; e < outcome.log.num_epochs(); ++e) means.append(outcome.log.epoch_mean_total(e));
  d["epoch_mean_loss"] = means;
  return d;
}

py::dict zero_shot(const std::string& corpus_dir, const std::string& checkpoint,
                   const std::string& template_text, std::size_t ways, std::size_t tasks,
                   std::uint64_t seed) {
  g2p2::EvalInputs inputs = g2p2::prepare_evaluation(corpus_dir, checkpoint);
  g2p2::EvalConfig cfg;
  cfg.ways = ways;
  cfg.tasks = tasks;
  cfg.seed = seed;
  const g2p2::DiscretePrompt tmpl = g2p2::DiscretePrompt::parse(template_text);
  return report_to_dict(g2p2::evaluate_zero_shot(inputs.model, inputs.corpus, inputs.z_all, tmpl, cfg));
}

py::dict few_shot(const std::string& corpus_dir, const std::string& checkpoint, std::size_t shots,
                  const std::string& init, std::size_t prompt_len, std::size_t iters, float lr,
                  std::size_t eta, std::size_t ways, std::size_t tasks, std::uint64_t seed) {
  g2p2::EvalInputs inputs = g2p2::prepare_evaluation(corpus_dir, checkpoint);
  g2p2::EvalConfig cfg;
  cfg.ways = ways;
  cfg.tasks = tasks;
  cfg.seed = seed;
  g2p2::PromptTuneConfig tune;
  tune.init = g2p2::parse_prompt_init(init);
  tune.prompt_len = prompt_len;
  tune.iters = iters;
  tune.lr = lr;
  tune.eta = eta;
  tune.seed = seed;
  return report_to_dict(g2p2::evaluate_few_shot(inputs.model, inputs.corpus, inputs.z_all, shots, cfg, tune));
}

std::vector<std::vector<float>> encode_text(const std::string& checkpoint,
                                            const std::vector<std::string>& texts) {
  g2p2::LoadedCheckpoint loaded = g2p2::load_checkpoint(checkpoint);
  std::vector<std::vector<float>> rows;
  rows.reserve(texts.size());
  for (const std::string& text : texts) {
    const g2p2::TokenizedText toks =
        g2p2::tokenize(text, loaded.model.vocab, loaded.model.config.text.max_len);
    if (toks.true_length == 0) throw g2p2::ValidationError("cannot encode an empty text");
    const g2p2::Tensor emb = g2p2::encode_text_eager(loaded.model.text, toks.ids, toks.true_length);
    rows.emplace_back(emb.data(), emb.data() + emb.numel());
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph-grounded dual-encoder pre-training and prompting";

  py::register_exception<g2p2::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<g2p2::NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<g2p2::IoError>(m, "IoError", PyExc_OSError);

  m.def("generate_corpus", &generate_corpus, py::arg("out_dir"), py::arg("classes") = 10,
        py::arg("docs_per_class") = 100, py::arg("class_vocab") = 30, py::arg("shared_vocab") = 200,
        py::arg("p_in") = 0.05, py::arg("p_out") = 0.001, py::arg("noise") = 0.3, py::arg("seed") = 1,
        "Write a synthetic graph-text corpus (documents/edges/labels/classes TSVs) to out_dir.");

  m.def("pretrain", &pretrain, py::arg("corpus_dir"), py::arg("checkpoint"), py::arg("epochs") = 2,
        py::arg("batch_size") = 64, py::arg("lr") = 2e-5f, py::arg("lambda_") = 0.1f, py::arg("eta") = 3,
        py::arg("seed") = 1, py::arg("loss_mask") = "", py::arg("config") = "",
        "Jointly pre-train both encoders on a corpus directory and write a checkpoint.");

  m.def("zero_shot", &zero_shot, py::arg("corpus_dir"), py::arg("checkpoint"), py::arg("template_text") = "",
        py::arg("ways") = 5, py::arg("tasks") = 20, py::arg("seed") = 1,
        "Zero-shot node classification against prompt-encoded label texts.");

  m.def("few_shot", &few_shot, py::arg("corpus_dir"), py::arg("checkpoint"), py::arg("shots"),
        py::arg("init") = "context", py::arg("prompt_len") = 4, py::arg("iters") = 50, py::arg("lr") = 0.01f,
        py::arg("eta") = 3, py::arg("ways") = 5, py::arg("tasks") = 20, py::arg("seed") = 1,
        "Few-shot node classification via continuous prompt tuning.");

  m.def("encode_text", &encode_text, py::arg("checkpoint"), py::arg("texts"),
        "Encode texts with a checkpoint's text encoder; one embedding row per text.");
}
