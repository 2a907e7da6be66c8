#include "g2p2/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "g2p2/errors.hpp"

namespace g2p2 {

std::vector<int> FewShotTask::support_nodes() const {
  std::vector<int> out;
  for (int cid : class_ids) {
    auto it = support.find(cid);
    if (it == support.end()) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

int FewShotTask::class_index(int class_id) const {
  auto it = std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
  if (it == class_ids.end() || *it != class_id) return -1;
  return static_cast<int>(it - class_ids.begin());
}

FewShotTask sample_task(const GraphTextCorpus& corpus, std::size_t n_way, std::size_t k_shot, Rng& rng,
                        std::size_t query_cap, bool* capped) {
  if (n_way < 2) throw ValidationError("sample_task: need at least 2 ways");
  const std::vector<int> all_classes = corpus.class_ids();
  const std::size_t need = 2 * k_shot + 1;
  std::vector<int> eligible;
  int worst_class = -1;
  std::size_t worst_count = 0;
  for (int cid : all_classes) {
    const std::size_t count = corpus.labeled_nodes_of_class(cid).size();
    if (count >= need) {
      eligible.push_back(cid);
    } else if (worst_class == -1 || count < worst_count) {
      worst_class = cid;
      worst_count = count;
    }
  }
  if (eligible.size() < n_way) {
    if (worst_class != -1) {
      throw ValidationError("sample_task: class " + std::to_string(worst_class) + " has only " +
                            std::to_string(worst_count) + " labeled nodes (need " + std::to_string(need) +
                            " for " + std::to_string(k_shot) + "-shot)");
    }
    throw ValidationError("sample_task: only " + std::to_string(eligible.size()) + " classes available for " +
                          std::to_string(n_way) + "-way tasks");
  }

  FewShotTask task;
  task.class_ids = rng.sample_without_replacement(eligible, n_way);
  std::sort(task.class_ids.begin(), task.class_ids.end());

  bool any_capped = false;
  for (int cid : task.class_ids) {
    const std::vector<int> members = corpus.labeled_nodes_of_class(cid);
    if (k_shot > 0) {
      std::vector<int> drawn = rng.sample_without_replacement(members, 2 * k_shot);
      std::vector<int> sup(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(k_shot));
      std::vector<int> val(drawn.begin() + static_cast<std::ptrdiff_t>(k_shot), drawn.end());
      std::sort(sup.begin(), sup.end());
      std::sort(val.begin(), val.end());
      std::set<int> taken(drawn.begin(), drawn.end());
      std::vector<int> rest;
      for (int node : members) {
        if (!taken.count(node)) rest.push_back(node);
      }
      if (rest.size() > query_cap) {
        rest = rng.sample_without_replacement(rest, query_cap);
        std::sort(rest.begin(), rest.end());
        any_capped = true;
      }
      task.support.emplace(cid, std::move(sup));
      task.validation.emplace(cid, std::move(val));
      for (int node : rest) task.query.emplace_back(node, cid);
    } else {
      std::vector<int> rest = members;
      if (rest.size() > query_cap) {
        rest = rng.sample_without_replacement(rest, query_cap);
        std::sort(rest.begin(), rest.end());
        any_capped = true;
      }
      for (int node : rest) task.query.emplace_back(node, cid);
    }
  }
  if (capped != nullptr) *capped = any_capped;
  return task;
}

std::pair<double, double> evaluate(const std::vector<int>& predictions, const std::vector<int>& truth,
                                   std::size_t num_classes) {
  if (predictions.size() != truth.size()) {
    throw ValidationError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(truth.size()) + " ground-truth labels");
  }
  if (predictions.empty()) throw ValidationError("evaluate: empty prediction vector");
  if (num_classes < 1) throw ValidationError("evaluate: num_classes must be >= 1");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int t = truth[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= num_classes ||
        static_cast<std::size_t>(t) >= num_classes) {
      throw ValidationError("evaluate: class index outside 0.." + std::to_string(num_classes - 1));
    }
    if (p == t) {
      ++correct;
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double prec = tp[c] + fp[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]);
    const double rec = tp[c] + fn[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
    f1_sum += prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
  }
  return {accuracy, f1_sum / static_cast<double>(num_classes)};
}

namespace {

double mean_of(const std::vector<TaskScore>& tasks, double TaskScore::* field) {
  if (tasks.empty()) return 0.0;
  double sum = 0.0;
  for (const TaskScore& t : tasks) sum += t.*field;
  return sum / static_cast<double>(tasks.size());
}

double ci_of(const std::vector<TaskScore>& tasks, double TaskScore::* field) {
  if (tasks.size() < 2) return 0.0;
  const double mean = mean_of(tasks, field);
  double ss = 0.0;
  for (const TaskScore& t : tasks) {
    const double d = t.*field - mean;
    ss += d * d;
  }
  const double stddev = std::sqrt(ss / static_cast<double>(tasks.size() - 1));
  return 1.96 * stddev / std::sqrt(static_cast<double>(tasks.size()));
}

}  // namespace

double EvalReport::mean_accuracy() const { return mean_of(tasks, &TaskScore::accuracy); }
double EvalReport::mean_macro_f1() const { return mean_of(tasks, &TaskScore::macro_f1); }
double EvalReport::accuracy_ci() const { return ci_of(tasks, &TaskScore::accuracy); }
double EvalReport::macro_f1_ci() const { return ci_of(tasks, &TaskScore::macro_f1); }

std::string EvalReport::table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "task   accuracy   macro_f1\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    os.width(4);
    os << i;
    os << "     " << tasks[i].accuracy << "     " << tasks[i].macro_f1 << '\n';
  }
  os << "mean     " << mean_accuracy() << "     " << mean_macro_f1() << '\n';
  os << "ci95     " << accuracy_ci() << "     " << macro_f1_ci() << '\n';
  if (query_capped) os << "(query sets capped per class)\n";
  return os.str();
}

void EvalReport::write_jsonl(std::ostream& out) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out << nlohmann::json{{"task", i}, {"accuracy", tasks[i].accuracy}, {"macro_f1", tasks[i].macro_f1}}.dump()
        << '\n';
  }
  out << nlohmann::json{{"summary", true},
                        {"tasks", tasks.size()},
                        {"mean_accuracy", mean_accuracy()},
                        {"ci95_accuracy", accuracy_ci()},
                        {"mean_macro_f1", mean_macro_f1()},
                        {"ci95_macro_f1", macro_f1_ci()},
                        {"query_capped", query_capped}}
             .dump()
      << '\n';
}

std::string EvalReport::jsonl() const {
  std::ostringstream os;
  write_jsonl(os);
  return os.str();
}

namespace {

TaskScore score_queries(const FewShotTask& task, const ClassWeights& weights, const Tensor& z_all) {
  std::vector<int> preds, truths;
  preds.reserve(task.query.size());
  truths.reserve(task.query.size());
  const std::size_t d = z_all.cols();
  for (auto [node, cid] : task.query) {
    Tensor z(1, d);
    const float* src = z_all.row_ptr(static_cast<std::size_t>(node));
    for (std::size_t j = 0; j < d; ++j) z[j] = src[j];
    const Classification c = classify(z, weights);
    preds.push_back(task.class_index(c.predicted_class));
    truths.push_back(task.class_index(cid));
  }
  const auto [acc, f1] = evaluate(preds, truths, task.ways());
  return {acc, f1};
}

}  // namespace

EvalReport evaluate_zero_shot(Model& model, const GraphTextCorpus& corpus, const Tensor& z_all,
                              const DiscretePrompt& tmpl, const EvalConfig& cfg) {
  if (cfg.tasks < 1) throw ValidationError("evaluate_zero_shot: need at least one task");
  const ClassWeights all_weights = zero_shot_weights(model, corpus.class_label_raw, tmpl);
  EvalReport report;
  Rng rng(cfg.seed);
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    bool capped = false;
    const FewShotTask task = sample_task(corpus, cfg.ways, 0, rng, cfg.query_cap, &capped);
    report.query_capped = report.query_capped || capped;
    report.tasks.push_back(score_queries(task, all_weights.subset(task.class_ids), z_all));
  }
  return report;
}

EvalReport evaluate_few_shot(Model& model, const GraphTextCorpus& corpus, const Tensor& z_all, std::size_t k_shot,
                             const EvalConfig& cfg, const PromptTuneConfig& tune) {
  if (cfg.tasks < 1) throw ValidationError("evaluate_few_shot: need at least one task");
  if (k_shot < 1) throw ValidationError("evaluate_few_shot: shots must be >= 1 (use zero-shot evaluation)");
  EvalReport report;
  Rng rng(cfg.seed);
  const DiscretePrompt empty_template;
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    bool capped = false;
    const FewShotTask task = sample_task(corpus, cfg.ways, k_shot, rng, cfg.query_cap, &capped);
    report.query_capped = report.query_capped || capped;
    ClassWeights weights;
    if (tune.init == PromptInit::kLabelOnly) {
      weights = zero_shot_weights(model, corpus.class_label_raw, empty_template).subset(task.class_ids);
    } else {
      PromptTuneConfig task_tune = tune;
      task_tune.seed = cfg.seed * 1000003ull + t;
      const PromptTuneResult tuned = prompt_tune(model, corpus, z_all, task, task_tune);
      Tape tape;
      BoundTextEncoder enc(tape, model.text, /*trainable=*/false);
      std::vector<std::pair<int, TokenizedText>> class_tokens;
      for (int cid : task.class_ids) {
        class_tokens.emplace_back(cid,
                                  tokenize(corpus.class_label_raw.at(cid), model.vocab, model.config.text.max_len));
      }
      weights.matrix = few_shot_weights(tape, enc, tape.constant(tuned.prompt), class_tokens).value();
      weights.class_ids = task.class_ids;
    }
    report.tasks.push_back(score_queries(task, weights, z_all));
  }
  return report;
}

}  // namespace g2p2
