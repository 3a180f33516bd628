// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "instructcl/corpus.hpp"

namespace instructcl {

/// Shape of a generated desk-scale corpus.
///
/// Every task draws its text from a private vocabulary, so two different
/// tasks never share a token. Within a task, exactly round(overlap * n) of the
/// n labeled instances reuse the input (and output) of an instruction
/// positive example; the rest have inputs that appear nowhere else.
struct SyntheticSpec {
  std::size_t num_tasks = 12;  // categories assigned round-robin
  std::size_t instances_per_task = 10;
  double overlap = 0.4;
  std::size_t min_positive_examples = 2;
  std::size_t negatives_per_task = 1;
  std::size_t input_tokens = 6;
  std::size_t output_tokens = 3;
  std::size_t vocab_per_task = 40;

  bool operator==(const SyntheticSpec&) const = default;
};

/// Number of instances per task whose input is covered by a positive example.
std::size_t covered_instances(const SyntheticSpec& spec);

Corpus gen_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace instructcl
