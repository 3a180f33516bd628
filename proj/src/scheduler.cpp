// SPDX-License-Identifier: Apache-2.0
#include "instructcl/scheduler.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

#include "instructcl/random.hpp"
#include "instructcl/template.hpp"

namespace instructcl {

namespace {

using nlohmann::json;

std::string encode(const Instruction& ins, std::string_view input, RenderMode mode, const Hyper& hyper) {
  return truncate_tokens(render(ins, input, mode), static_cast<std::size_t>(hyper.max_input_tokens));
}

std::vector<std::string> distinct_task_ids(const std::vector<TrainExample>& batch) {
  std::vector<std::string> ids;
  for (const auto& ex : batch)
    if (std::find(ids.begin(), ids.end(), ex.task_id) == ids.end()) ids.push_back(ex.task_id);
  return ids;
}

void append_examples(std::vector<TrainExample>& out, const TaskSpec& task, Polarity polarity, RenderMode mode,
                     const Hyper& hyper) {
  for (const auto& e : task.instruction.examples)
    if (e.polarity == polarity)
      out.push_back({encode(task.instruction, e.input, mode, hyper), e.output, ExampleOrigin::instruction_example,
                     task.task_id});
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::instructionspeak: return "instructionspeak";
    case Strategy::seq_finetune: return "seq_finetune";
    case Strategy::multitask: return "multitask";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  for (auto s : {Strategy::instructionspeak, Strategy::seq_finetune, Strategy::multitask})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

std::string RunLog::to_jsonl(std::string_view context_json) const {
  const auto context = json::parse(context_json);
  std::string out;
  for (const auto& e : events_) {
    json j = context;
    j["phase"] = to_string(e.phase);
    j["task_ids"] = e.task_ids;
    j["batch_size"] = e.batch_size;
    j["hyper"] = {{"learning_rate", e.hyper.learning_rate},
                  {"epochs", e.hyper.epochs},
                  {"batch_size", e.hyper.batch_size},
                  {"max_input_tokens", e.hyper.max_input_tokens}};
    j["skipped"] = e.skipped;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void execute(const SchedulePlan& plan, Learner& learner, RunLog* log) {
  for (const auto& step : plan) {
    PhaseEvent event{step.phase, distinct_task_ids(step.batch), step.batch.size(), step.hyper, step.batch.empty()};
    if (!step.batch.empty()) learner.train(step.batch, step.phase, step.hyper);
    if (log != nullptr) log->record(std::move(event));
  }
}

std::vector<TrainExample> positive_training_batch(std::span<const TaskSpec> tasks, const Hyper& hyper) {
  std::vector<TrainExample> batch;
  for (const auto& task : tasks) {
    append_examples(batch, task, Polarity::positive, RenderMode::full_with_examples, hyper);
    for (const auto& inst : task.instances) {
      if (inst.gold_outputs.empty()) continue;
      batch.push_back({encode(task.instruction, inst.input, RenderMode::full_with_examples, hyper),
                       inst.gold_outputs.front(), ExampleOrigin::labeled_instance, task.task_id});
    }
  }
  return batch;
}

std::vector<MinedNegative> mine_negatives(Learner& model, std::span<const TaskSpec> S, const Hyper& hyper) {
  std::vector<MinedNegative> out;
  for (const auto& task : S) {
    std::vector<std::string> texts;
    texts.reserve(task.instances.size());
    for (const auto& inst : task.instances)
      texts.push_back(encode(task.instruction, inst.input, RenderMode::full_with_examples, hyper));
    const auto predictions = model.predict(texts);
    for (std::size_t i = 0; i < task.instances.size(); ++i) {
      const auto pred = trim(predictions[i]);
      const auto& golds = task.instances[i].gold_outputs;
      const bool matches = std::any_of(golds.begin(), golds.end(), [&](const auto& g) { return trim(g) == pred; });
      if (!matches) out.push_back({task.instances[i].input, predictions[i], task.task_id});
    }
  }
  return out;
}

void initialize(std::span<const TaskSpec> S, Learner& learner, const Hyper& hyper, RunLog* log,
                bool negative_training) {
  if (S.empty()) throw std::invalid_argument("initialize: S is empty");
  for (const auto& task : S)
    if (task.instances.empty())
      throw std::invalid_argument("initialize: training task '" + task.task_id + "' has no labeled instances");
  hyper.validate();

  const auto positives = positive_training_batch(S, hyper);
  execute({{TrainPhase::pretrain_positive_S, positives, hyper}}, learner, log);
  if (!negative_training) return;

  std::vector<TrainExample> negatives;
  for (const auto& neg : mine_negatives(learner, S, hyper)) {
    const auto it = std::find_if(S.begin(), S.end(), [&](const TaskSpec& t) { return t.task_id == neg.source_task; });
    negatives.push_back({encode(it->instruction, neg.input, RenderMode::full_with_examples, hyper),
                         neg.predicted_output, ExampleOrigin::mined_negative, neg.source_task});
  }
  execute({{TrainPhase::pretrain_negative_S, std::move(negatives), hyper},
           {TrainPhase::finetune_positive_S, positives, hyper}},
          learner, log);
}

std::vector<const TaskSpec*> history_for_position(std::span<const TaskSpec* const> chain, std::size_t position,
                                                  std::size_t lag) {
  if (lag == 0) throw std::invalid_argument("history_for_position: lag must be at least 1");
  if (position == 0 || position > chain.size())
    throw std::invalid_argument("history_for_position: position out of range");
  const std::size_t end = position > lag ? position - lag : 0;
  return {chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(end)};
}

SchedulePlan plan_continual_step(const TaskSpec& task, std::span<const TaskSpec* const> history, Strategy strategy,
                                 const Hyper& hyper, const Hyper& history_hyper) {
  hyper.validate();
  SchedulePlan plan;
  switch (strategy) {
    case Strategy::instructionspeak: {
      history_hyper.validate();
      if (!history.empty()) {
        PlannedPhase replay{TrainPhase::history_replay, {}, history_hyper};
        for (const auto* h : history)
          append_examples(replay.batch, *h, Polarity::positive, RenderMode::bare_no_examples, history_hyper);
        plan.push_back(std::move(replay));
      }
      PlannedPhase negative{TrainPhase::task_negative, {}, hyper};
      append_examples(negative.batch, task, Polarity::negative, RenderMode::bare_no_examples, hyper);
      plan.push_back(std::move(negative));
      break;
    }
    case Strategy::seq_finetune:
      break;
    case Strategy::multitask:
      throw std::invalid_argument("continual_step: multitask is not a sequential strategy");
  }
  PlannedPhase positive{TrainPhase::task_positive, {}, hyper};
  append_examples(positive.batch, task, Polarity::positive, RenderMode::bare_no_examples, hyper);
  plan.push_back(std::move(positive));
  return plan;
}

void continual_step(Learner& model, const TaskSpec& task, std::span<const TaskSpec* const> history, Strategy strategy,
                    const Hyper& hyper, const Hyper& history_hyper, RunLog* log) {
  execute(plan_continual_step(task, history, strategy, hyper, history_hyper), model, log);
}

SchedulePlan plan_multitask(std::span<const TaskSpec* const> tasks, const Hyper& hyper, std::uint64_t seed) {
  hyper.validate();
  PlannedPhase phase{TrainPhase::task_positive, {}, hyper};
  for (const auto* t : tasks) append_examples(phase.batch, *t, Polarity::positive, RenderMode::bare_no_examples, hyper);
  SeededStream rng(seed);
  rng.shuffle(phase.batch);
  return {std::move(phase)};
}

void multitask_train(Learner& model, std::span<const TaskSpec* const> tasks, const Hyper& hyper, std::uint64_t seed,
                     RunLog* log) {
  execute(plan_multitask(tasks, hyper, seed), model, log);
}

bool is_legal_step_sequence(std::span<const TrainPhase> phases, Strategy strategy) {
  std::size_t i = 0;
  if (strategy == Strategy::instructionspeak) {
    if (i < phases.size() && phases[i] == TrainPhase::history_replay) ++i;
    if (i < phases.size() && phases[i] == TrainPhase::task_negative) ++i;
  }
  return i + 1 == phases.size() && phases[i] == TrainPhase::task_positive;
}

}  // namespace instructcl
