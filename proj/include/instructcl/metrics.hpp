// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "instructcl/corpus.hpp"

namespace instructcl {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Lowercase, strip ASCII punctuation, split on whitespace.
std::vector<std::string> normalize(std::string_view text);

/// Length of the longest common subsequence of two token lists.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Sentence-level ROUGE-L F-measure (beta = 1) against each reference;
/// returns the best reference by F1, the first one on ties.
/// Throws std::invalid_argument when `references` is empty.
RougeScore rouge_l(std::string_view candidate, std::span<const std::string> references);

/// Mean per-instance ROUGE-L F1 on the 0-100 scale.
double score_task(std::span<const std::string> predictions, std::span<const Instance> instances);

}  // namespace instructcl
