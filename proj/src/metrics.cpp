// SPDX-License-Identifier: Apache-2.0
#include "instructcl/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace instructcl {

std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::ispunct(c)) continue;
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Two rows over the shorter sequence.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (const auto& x : a) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = x == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::string_view candidate, std::span<const std::string> references) {
  if (references.empty()) throw std::invalid_argument("rouge_l: reference list is empty");
  const auto cand = normalize(candidate);
  RougeScore best;
  bool first = true;
  for (const auto& ref_text : references) {
    const auto ref = normalize(ref_text);
    const auto lcs = static_cast<double>(lcs_length(cand, ref));
    RougeScore s;
    s.precision = cand.empty() ? 0.0 : lcs / static_cast<double>(cand.size());
    s.recall = ref.empty() ? 0.0 : lcs / static_cast<double>(ref.size());
    const double denom = s.precision + s.recall;
    s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
    if (first || s.f1 > best.f1) best = s;
    first = false;
  }
  return best;
}

double score_task(std::span<const std::string> predictions, std::span<const Instance> instances) {
  if (predictions.size() != instances.size())
    throw std::invalid_argument("score_task: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(instances.size()) + " instances");
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i)
    total += rouge_l(predictions[i], instances[i].gold_outputs).f1 * 100.0;
  return total / static_cast<double>(instances.size());
}

}  // namespace instructcl
