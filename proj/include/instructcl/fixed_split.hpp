// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "instructcl/corpus.hpp"
#include "instructcl/protocol.hpp"

namespace instructcl {

/// forward_sixth: the test category's block is learned last and scored right
/// after it. backward_first: it is learned first and scored after the whole
/// chain.
enum class FixedSplitMode { forward_sixth, backward_first };

std::string_view to_string(FixedSplitMode m);
std::optional<FixedSplitMode> parse_fixed_split_mode(std::string_view text);

struct FixedSplitSettings {
  ChainSettings chain;
  std::size_t eval_n = kDefaultEvalInstances;
  std::uint64_t eval_seed = 0;
};

struct CategoryResult {
  Category category = Category::QG;
  std::vector<std::vector<Category>> orders;  // one block order per repetition
  std::vector<double> rep_scores;             // mean over the category's test tasks
  double mean = 0.0;
  double no_cl = 0.0;  // initialized model, before any continual learning
};

struct FixedSplitReport {
  FixedSplitMode mode = FixedSplitMode::forward_sixth;
  Strategy strategy = Strategy::instructionspeak;
  std::vector<CategoryResult> categories;  // in canonical category order
};

/// Category block orders for one test category: the remaining five
/// categories shuffled `reps` times, with the test category appended
/// (forward_sixth) or prepended (backward_first).
std::vector<std::vector<Category>> fixed_split_orders(Category test, FixedSplitMode mode, std::size_t reps,
                                                      std::uint64_t seed);

/// Standard-split evaluation. The test tasks, grouped by category, form six
/// blocks; every other corpus task is used for initialization. Each test
/// category is scored over `reps` random orders of the other blocks.
/// `fresh` supplies untrained learners. Throws std::invalid_argument when a
/// test id is unknown or a category has no test task.
FixedSplitReport fixed_split_eval(const Corpus& corpus, std::span<const std::string> test_task_ids,
                                  FixedSplitMode mode, std::size_t reps, std::uint64_t seed,
                                  const ModelProvider& fresh, const FixedSplitSettings& settings);

}  // namespace instructcl
