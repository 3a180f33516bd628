// SPDX-License-Identifier: Apache-2.0
#include "instructcl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "instructcl/random.hpp"

namespace instructcl {

namespace {

class TaskVocabulary {
 public:
  TaskVocabulary(std::size_t task, std::size_t size, SeededStream& rng)
      : prefix_("t" + std::to_string(task)), size_(size), rng_(rng) {}

  std::string words(std::size_t count) {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
      if (!out.empty()) out.push_back(' ');
      out += prefix_ + "w" + std::to_string(rng_.uniform_int(0, static_cast<std::int64_t>(size_) - 1));
    }
    return out;
  }

  // Each call yields an input no other call in this task can produce.
  std::string fresh_input(std::size_t tokens) {
    auto out = prefix_ + "u" + std::to_string(serial_++);
    if (tokens > 1) out += " " + words(tokens - 1);
    return out;
  }

 private:
  std::string prefix_;
  std::size_t size_;
  SeededStream& rng_;
  std::size_t serial_ = 0;
};

}  // namespace

std::size_t covered_instances(const SyntheticSpec& spec) {
  return static_cast<std::size_t>(std::llround(spec.overlap * static_cast<double>(spec.instances_per_task)));
}

Corpus gen_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
  if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0))
    throw std::invalid_argument("gen_synthetic_corpus: overlap must lie in [0, 1]");
  if (spec.instances_per_task == 0) throw std::invalid_argument("gen_synthetic_corpus: instances_per_task must be positive");
  if (spec.input_tokens == 0 || spec.output_tokens == 0 || spec.vocab_per_task < 2)
    throw std::invalid_argument("gen_synthetic_corpus: token counts must be positive and vocab_per_task >= 2");

  const std::size_t covered = covered_instances(spec);
  const std::size_t n_pos = std::max(covered, spec.min_positive_examples);

  Corpus corpus;
  corpus.source_note = "synthetic seed=" + std::to_string(seed);
  for (std::size_t a = 0; a < spec.num_tasks; ++a) {
    SeededStream rng(derive_seed(seed, {a}));
    TaskVocabulary vocab(a, spec.vocab_per_task, rng);

    TaskSpec task;
    char id[32];
    std::snprintf(id, sizeof id, "syn_%03zu", a);
    task.task_id = id;
    task.category = kAllCategories[a % kAllCategories.size()];

    auto& ins = task.instruction;
    ins.title = vocab.words(3);
    ins.definition = vocab.words(8);
    ins.prompt = vocab.words(2);
    ins.things_to_avoid = vocab.words(4);
    ins.caution = vocab.words(4);

    std::vector<InstructionExample> positives;
    for (std::size_t j = 0; j < n_pos; ++j)
      positives.push_back({vocab.fresh_input(spec.input_tokens), vocab.words(spec.output_tokens), vocab.words(4),
                           Polarity::positive});

    for (std::size_t j = 0; j < spec.instances_per_task; ++j) {
      if (j < covered) {
        task.instances.push_back({positives[j].input, {positives[j].output}});
      } else {
        task.instances.push_back({vocab.fresh_input(spec.input_tokens), {vocab.words(spec.output_tokens)}});
      }
    }
    rng.shuffle(task.instances);

    ins.examples = positives;
    for (std::size_t j = 0; j < spec.negatives_per_task; ++j) {
      InstructionExample neg;
      neg.polarity = Polarity::negative;
      neg.input = n_pos > 0 ? positives[j % n_pos].input : vocab.fresh_input(spec.input_tokens);
      do {
        neg.output = vocab.words(spec.output_tokens);
      } while (n_pos > 0 && neg.output == positives[j % n_pos].output);
      neg.explanation = vocab.words(4);
      ins.examples.push_back(std::move(neg));
    }
    corpus.tasks.push_back(std::move(task));
  }
  return corpus;
}

}  // namespace instructcl
