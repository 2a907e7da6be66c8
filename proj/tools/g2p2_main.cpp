// g2p2 command-line tool: synthetic corpus generation, joint pre-training,
// and zero-/few-shot node classification.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "g2p2/config.hpp"
#include "g2p2/driver.hpp"
#include "g2p2/errors.hpp"
#include "g2p2/prompt.hpp"
#include "g2p2/synthetic.hpp"
#include "g2p2/tasks.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::string corpus_dir;
  std::string checkpoint_path;
  std::string out_path;
};

int cmd_synth(const CommonArgs& args, const g2p2::SyntheticConfig& synth) {
  g2p2::GraphTextCorpus corpus = g2p2::generate_synthetic_corpus(synth);
  fs::create_directories(args.out_path);
  g2p2::save_corpus(corpus, args.out_path);
  std::cout << "wrote " << corpus.num_nodes() << " documents, " << corpus.edges.size() << " edges, "
            << corpus.class_label_raw.size() << " classes to " << args.out_path << "\n";
  return 0;
}

int cmd_pretrain(const CommonArgs& args, const g2p2::RunConfig& cfg) {
  const g2p2::PretrainOutcome outcome = g2p2::run_pretrain(args.corpus_dir, args.checkpoint_path, cfg);
  std::cout << "pre-trained on " << outcome.num_documents << " documents (" << outcome.num_edges
            << " edges, vocab " << outcome.vocab_size << ")\n";
  for (std::size_t e = 0; e < outcome.log.num_epochs(); ++e) {
    std::cout << "epoch " << e << " mean loss " << outcome.log.epoch_mean_total(e) << "\n";
  }
  const std::string log_path = args.out_path.empty() ? args.checkpoint_path + ".log" : args.out_path;
  outcome.log.write_file(log_path);
  std::cout << "checkpoint written to " << args.checkpoint_path << " (log: " << log_path << ")\n";
  return 0;
}

g2p2::EvalInputs prepare(const CommonArgs& args) {
  g2p2::EvalInputs inputs = g2p2::prepare_evaluation(args.corpus_dir, args.checkpoint_path);
  if (inputs.fingerprint_mismatch) {
    std::cerr << "warning: corpus does not match the checkpoint's fingerprint; evaluating anyway\n";
  }
  return inputs;
}

void emit_report(const g2p2::EvalReport& report, const std::string& out_path) {
  std::cout << report.table();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw g2p2::IoError("cannot write " + out_path);
    out << report.jsonl();
  }
}

int cmd_zeroshot(const CommonArgs& args, const g2p2::EvalConfig& eval_cfg, const std::string& template_text) {
  g2p2::EvalInputs inputs = prepare(args);
  const g2p2::DiscretePrompt tmpl = g2p2::DiscretePrompt::parse(template_text);
  const g2p2::EvalReport report =
      g2p2::evaluate_zero_shot(inputs.model, inputs.corpus, inputs.z_all, tmpl, eval_cfg);
  emit_report(report, args.out_path);
  return 0;
}

int cmd_fewshot(const CommonArgs& args, const g2p2::EvalConfig& eval_cfg, std::size_t shots,
                const g2p2::PromptTuneConfig& tune) {
  if (shots < 1) throw g2p2::ValidationError("--shots must be at least 1");
  g2p2::EvalInputs inputs = prepare(args);
  const g2p2::EvalReport report =
      g2p2::evaluate_few_shot(inputs.model, inputs.corpus, inputs.z_all, shots, eval_cfg, tune);
  emit_report(report, args.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-grounded dual-encoder pre-training and prompting"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string template_text;
  std::string init_text = "context";
  std::string loss_mask_text;
  std::size_t shots = 5;

  // Optional CLI overrides; when unset the config file (or defaults) win.
  std::optional<std::uint64_t> seed_opt;
  std::optional<std::size_t> epochs_opt, batch_opt, eta_opt, ways_opt, tasks_opt, prompt_len_opt, iters_opt;
  std::optional<float> lambda_opt, lr_opt;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic graph-text corpus");
  synth->add_option("--config", args.config_path, "Configuration file");
  synth->add_option("--out", args.out_path, "Output corpus directory")->required();
  synth->add_option("--seed", seed_opt, "Generator seed");

  CLI::App* pre = app.add_subcommand("pretrain", "Jointly pre-train the text and graph encoders");
  pre->add_option("--config", args.config_path, "Configuration file");
  pre->add_option("--corpus", args.corpus_dir, "Corpus directory")->required();
  pre->add_option("--checkpoint", args.checkpoint_path, "Output checkpoint path")->required();
  pre->add_option("--out", args.out_path, "Training-log path (default: <checkpoint>.log)");
  pre->add_option("--seed", seed_opt, "Pre-training seed");
  pre->add_option("--epochs", epochs_opt, "Number of epochs");
  pre->add_option("--batch-size", batch_opt, "Batch size");
  pre->add_option("--eta", eta_opt, "Neighbors sampled per summary");
  pre->add_option("--lambda", lambda_opt, "Weight of the two graph-interaction losses");
  pre->add_option("--lr", lr_opt, "Learning rate");
  pre->add_option("--loss-mask", loss_mask_text, "Subset of losses to train, e.g. 'L1,L3'");

  auto add_eval_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "Configuration file");
    cmd->add_option("--corpus", args.corpus_dir, "Corpus directory")->required();
    cmd->add_option("--checkpoint", args.checkpoint_path, "Checkpoint to evaluate")->required();
    cmd->add_option("--out", args.out_path, "Write per-task results as JSON lines");
    cmd->add_option("--seed", seed_opt, "Task-sampling seed");
    cmd->add_option("--ways", ways_opt, "Classes per task");
    cmd->add_option("--tasks", tasks_opt, "Number of tasks");
  };

  CLI::App* zs = app.add_subcommand("zeroshot", "Zero-shot classification from label texts");
  add_eval_options(zs);
  zs->add_option("--template", template_text, "Discrete prompt with one [CLASS] placeholder");

  CLI::App* fshot = app.add_subcommand("fewshot", "Few-shot classification via prompt tuning");
  add_eval_options(fshot);
  fshot->add_option("--shots", shots, "Support examples per class")->required();
  fshot->add_option("--init", init_text, "Prompt initialization: context, random, or label-only");
  fshot->add_option("--prompt-len", prompt_len_opt, "Continuous prompt length");
  fshot->add_option("--iters", iters_opt, "Tuning iterations per task");
  fshot->add_option("--lr", lr_opt, "Prompt-tuning learning rate");
  fshot->add_option("--eta", eta_opt, "Context nodes per support node at initialization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    g2p2::RunConfig cfg = g2p2::parse_run_config(args.config_path);
    if (seed_opt) {
      cfg.pretrain.seed = *seed_opt;
      cfg.eval.seed = *seed_opt;
      cfg.synth.seed = *seed_opt;
    }
    if (epochs_opt) cfg.pretrain.epochs = *epochs_opt;
    if (batch_opt) cfg.pretrain.batch_size = *batch_opt;
    if (eta_opt) {
      cfg.pretrain.eta = *eta_opt;
      cfg.prompt.eta = *eta_opt;
    }
    if (lambda_opt) cfg.pretrain.lambda = *lambda_opt;
    if (lr_opt) {
      cfg.pretrain.lr = *lr_opt;
      cfg.prompt.lr = *lr_opt;
    }
    if (!loss_mask_text.empty()) cfg.pretrain.mask = g2p2::LossMask::parse(loss_mask_text);
    if (ways_opt) cfg.eval.ways = *ways_opt;
    if (tasks_opt) cfg.eval.tasks = *tasks_opt;
    if (prompt_len_opt) cfg.prompt.prompt_len = *prompt_len_opt;
    if (iters_opt) cfg.prompt.iters = *iters_opt;
    cfg.prompt.init = g2p2::parse_prompt_init(init_text);
    cfg.prompt.seed = cfg.eval.seed;

    if (synth->parsed()) return cmd_synth(args, cfg.synth);
    if (pre->parsed()) return cmd_pretrain(args, cfg);
    if (zs->parsed()) return cmd_zeroshot(args, cfg.eval, template_text);
    if (fshot->parsed()) return cmd_fewshot(args, cfg.eval, shots, cfg.prompt);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const g2p2::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const g2p2::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
