// SPDX-License-Identifier: Apache-2.0
#include "instructcl/fixed_split.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace instructcl {

std::string_view to_string(FixedSplitMode m) {
  return m == FixedSplitMode::forward_sixth ? "forward_sixth" : "backward_first";
}

std::optional<FixedSplitMode> parse_fixed_split_mode(std::string_view text) {
  if (text == "forward_sixth") return FixedSplitMode::forward_sixth;
  if (text == "backward_first") return FixedSplitMode::backward_first;
  return std::nullopt;
}

std::vector<std::vector<Category>> fixed_split_orders(Category test, FixedSplitMode mode, std::size_t reps,
                                                      std::uint64_t seed) {
  std::vector<std::vector<Category>> out;
  SeededStream rng(derive_seed(seed, {static_cast<std::uint64_t>(test), static_cast<std::uint64_t>(mode)}));
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<Category> rest;
    for (auto c : kAllCategories)
      if (c != test) rest.push_back(c);
    rng.shuffle(rest);
    if (mode == FixedSplitMode::forward_sixth) {
      rest.push_back(test);
    } else {
      rest.insert(rest.begin(), test);
    }
    out.push_back(std::move(rest));
  }
  return out;
}

FixedSplitReport fixed_split_eval(const Corpus& corpus, std::span<const std::string> test_task_ids,
                                  FixedSplitMode mode, std::size_t reps, std::uint64_t seed,
                                  const ModelProvider& fresh, const FixedSplitSettings& settings) {
  if (reps < 1) throw std::invalid_argument("fixed_split_eval: reps must be at least 1");
  if (settings.chain.strategy == Strategy::multitask)
    throw std::invalid_argument("fixed_split_eval: needs a sequential strategy");

  std::set<std::string> test_set;
  std::map<Category, std::vector<const TaskSpec*>> blocks;
  for (const auto& id : test_task_ids) {
    const auto* task = corpus.find(id);
    if (task == nullptr) throw std::invalid_argument("fixed_split_eval: unknown test task '" + id + "'");
    if (!test_set.insert(id).second) throw std::invalid_argument("fixed_split_eval: duplicate test task '" + id + "'");
    blocks[task->category].push_back(task);
  }
  for (auto c : kAllCategories)
    if (blocks[c].empty())
      throw std::invalid_argument("fixed_split_eval: no test task for category " + std::string(to_string(c)));

  std::vector<TaskSpec> train;
  for (const auto& t : corpus.tasks)
    if (!test_set.count(t.task_id)) train.push_back(t);

  std::shared_ptr<Learner> initialized = fresh();
  initialize(train, *initialized, settings.chain.hypers.train, nullptr,
             settings.chain.strategy == Strategy::instructionspeak);
  const auto provider = clone_provider(initialized);

  std::map<std::string, std::vector<Instance>> eval_sets;
  for (const auto& [c, tasks] : blocks)
    for (const auto* t : tasks) eval_sets[t->task_id] = eval_instances_for(*t, settings.eval_n, settings.eval_seed);

  const auto& hyper = settings.chain.hypers.continual;
  auto category_score = [&](Learner& model, Category c) {
    double total = 0.0;
    for (const auto* t : blocks[c]) total += evaluate(model, *t, eval_sets[t->task_id], hyper);
    return total / static_cast<double>(blocks[c].size());
  };

  FixedSplitReport report;
  report.mode = mode;
  report.strategy = settings.chain.strategy;
  for (auto test : kAllCategories) {
    CategoryResult result;
    result.category = test;
    result.orders = fixed_split_orders(test, mode, reps, seed);
    {
      auto model = provider();
      result.no_cl = category_score(*model, test);
    }
    for (const auto& order : result.orders) {
      std::vector<const TaskSpec*> chain;
      std::size_t test_end = 0;
      for (auto c : order) {
        chain.insert(chain.end(), blocks[c].begin(), blocks[c].end());
        if (c == test) test_end = chain.size();
      }
      auto model = provider();
      const auto stop = mode == FixedSplitMode::forward_sixth ? test_end : chain.size();
      evolve(*model, chain, 1, stop, settings.chain);
      result.rep_scores.push_back(category_score(*model, test));
    }
    double sum = 0.0;
    for (double s : result.rep_scores) sum += s;
    result.mean = sum / static_cast<double>(result.rep_scores.size());
    report.categories.push_back(std::move(result));
  }
  return report;
}

}  // namespace instructcl
