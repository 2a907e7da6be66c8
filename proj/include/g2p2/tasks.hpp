#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "g2p2/corpus.hpp"
#include "g2p2/model.hpp"
#include "g2p2/prompt.hpp"
#include "g2p2/tasks_types.hpp"

namespace g2p2 {

// Samples an N-way K-shot episode: N classes uniformly among those with at
// least 2K+1 labeled nodes, then K support + K validation nodes per class
// without replacement; remaining labeled nodes form the query set (capped at
// query_cap per class, uniformly subsampled, flagged via *capped).
FewShotTask sample_task(const GraphTextCorpus& corpus, std::size_t n_way, std::size_t k_shot, Rng& rng,
                        std::size_t query_cap = 200, bool* capped = nullptr);

// Accuracy and macro-F1 over task-local class indices 0..num_classes-1.
// Per-class F1 with an empty denominator counts as 0.
std::pair<double, double> evaluate(const std::vector<int>& predictions, const std::vector<int>& truth,
                                   std::size_t num_classes);

struct TaskScore {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct EvalReport {
  std::vector<TaskScore> tasks;
  bool query_capped = false;

  double mean_accuracy() const;
  double mean_macro_f1() const;
  // 1.96 * standard error over tasks (normal approximation).
  double accuracy_ci() const;
  double macro_f1_ci() const;

  std::string table() const;
  void write_jsonl(std::ostream& out) const;
  std::string jsonl() const;
};

struct EvalConfig {
  std::size_t ways = 5;
  std::size_t tasks = 20;
  std::uint64_t seed = 1;
  std::size_t query_cap = 200;
};

// Zero-shot evaluation: K=0 tasks classified against prompt-encoded label
// texts. z_all is the frozen graph embedding of every node.
EvalReport evaluate_zero_shot(Model& model, const GraphTextCorpus& corpus, const Tensor& z_all,
                              const DiscretePrompt& tmpl, const EvalConfig& cfg);

// Few-shot evaluation: per task, initialize + tune a continuous prompt
// (label-only init skips tuning) and classify the query set.
EvalReport evaluate_few_shot(Model& model, const GraphTextCorpus& corpus, const Tensor& z_all, std::size_t k_shot,
                             const EvalConfig& cfg, const PromptTuneConfig& tune);

}  // namespace g2p2
