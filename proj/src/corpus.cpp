// SPDX-License-Identifier: Apache-2.0
#include "instructcl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "instructcl/random.hpp"

namespace instructcl {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::QG: return "QG";
    case Category::AG: return "AG";
    case Category::CF: return "CF";
    case Category::IAG: return "IAG";
    case Category::MM: return "MM";
    case Category::VF: return "VF";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view text) {
  static const std::map<std::string, Category, std::less<>> kNames = {
      {"qg", Category::QG},
      {"question generation", Category::QG},
      {"ag", Category::AG},
      {"answer generation", Category::AG},
      {"cf", Category::CF},
      {"classification", Category::CF},
      {"iag", Category::IAG},
      {"incorrect answer generation", Category::IAG},
      {"mm", Category::MM},
      {"minimal modification", Category::MM},
      {"vf", Category::VF},
      {"verification", Category::VF},
  };
  const auto it = kNames.find(lower(trim(text)));
  if (it == kNames.end()) return std::nullopt;
  return it->second;
}

std::string trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::vector<InstructionExample> Instruction::positives() const {
  std::vector<InstructionExample> out;
  for (const auto& e : examples)
    if (e.polarity == Polarity::positive) out.push_back(e);
  return out;
}

std::vector<InstructionExample> Instruction::negatives() const {
  std::vector<InstructionExample> out;
  for (const auto& e : examples)
    if (e.polarity == Polarity::negative) out.push_back(e);
  return out;
}

const TaskSpec* Corpus::find(std::string_view task_id) const {
  for (const auto& t : tasks)
    if (t.task_id == task_id) return &t;
  return nullptr;
}

std::vector<Diagnostic> validate_task(const TaskSpec& task) {
  std::vector<Diagnostic> out;
  auto report = [&](std::string msg) { out.push_back({task.task_id, std::move(msg)}); };

  if (trim(task.task_id).empty()) report("empty task id");
  if (trim(task.instruction.title).empty()) report("empty title");
  if (trim(task.instruction.definition).empty()) report("empty definition");

  for (std::size_t i = 0; i < task.instruction.examples.size(); ++i) {
    const auto& e = task.instruction.examples[i];
    const auto label = std::string(e.polarity == Polarity::positive ? "positive" : "negative") +
                       " example " + std::to_string(i + 1);
    if (trim(e.input).empty()) report(label + ": empty input");
    if (trim(e.output).empty()) report(label + ": empty output");
  }

  for (std::size_t i = 0; i < task.instances.size(); ++i) {
    const auto& inst = task.instances[i];
    const auto label = "instance " + std::to_string(i + 1);
    if (inst.gold_outputs.empty()) {
      report(label + ": no gold outputs");
      continue;
    }
    std::set<std::string> seen;
    bool duplicate = false;
    for (const auto& g : inst.gold_outputs) duplicate |= !seen.insert(trim(g)).second;
    if (duplicate) report(label + ": duplicate gold outputs");
  }
  return out;
}

SplitResult split_corpus(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  const auto n = corpus.tasks.size();
  if (k < 1 || k >= n)
    throw std::invalid_argument("split_corpus: k must satisfy 1 <= k < " + std::to_string(n) +
                                ", got " + std::to_string(k));
  SeededStream rng(seed);
  auto picked = rng.sample_indices(n, k);
  std::vector<bool> in_s(n, false);
  for (auto idx : picked) in_s[idx] = true;

  SplitResult out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i)
    (in_s[i] ? out.train_tasks : out.unseen_tasks).push_back(corpus.tasks[i]);
  return out;
}

std::vector<Instance> sample_eval_instances(const TaskSpec& task, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_eval_instances: n must be positive");
  if (task.instances.empty())
    throw std::invalid_argument("sample_eval_instances: task '" + task.task_id + "' has no instances");
  const auto count = std::min(n, task.instances.size());
  SeededStream rng(seed);
  auto idx = rng.sample_indices(task.instances.size(), count);
  std::sort(idx.begin(), idx.end());
  std::vector<Instance> out;
  out.reserve(count);
  for (auto i : idx) out.push_back(task.instances[i]);
  return out;
}

}  // namespace instructcl
