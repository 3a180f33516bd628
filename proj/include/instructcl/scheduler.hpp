// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instructcl/corpus.hpp"
#include "instructcl/learner.hpp"

namespace instructcl {

enum class Strategy { instructionspeak, seq_finetune, multitask };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view text);

struct HyperSet {
  Hyper train = Hyper::training_defaults();       // phases on S
  Hyper continual = Hyper::continual_defaults();  // task phases on U
  Hyper history = Hyper::history_defaults();      // history replay

  bool operator==(const HyperSet&) const = default;
};

/// (input, prediction) pair where the prediction matches no gold output.
struct MinedNegative {
  std::string input;
  std::string predicted_output;
  std::string source_task;

  bool operator==(const MinedNegative&) const = default;
};

struct PhaseEvent {
  TrainPhase phase = TrainPhase::task_positive;
  std::vector<std::string> task_ids;  // distinct, in batch order
  std::size_t batch_size = 0;
  Hyper hyper;
  bool skipped = false;  // empty batch, learner not called

  bool operator==(const PhaseEvent&) const = default;
};

/// Append-only record of executed (or skipped) phases.
class RunLog {
 public:
  void record(PhaseEvent event) { events_.push_back(std::move(event)); }
  const std::vector<PhaseEvent>& events() const { return events_; }
  void clear() { events_.clear(); }

  /// One JSON object per event, newline-terminated; `context` fields are
  /// merged into each record.
  std::string to_jsonl(std::string_view context_json = "{}") const;

 private:
  std::vector<PhaseEvent> events_;
};

struct PlannedPhase {
  TrainPhase phase = TrainPhase::task_positive;
  std::vector<TrainExample> batch;
  Hyper hyper;
};

using SchedulePlan = std::vector<PlannedPhase>;

/// Runs each phase in order. Empty batches are skipped and logged as such.
void execute(const SchedulePlan& plan, Learner& learner, RunLog* log = nullptr);

/// Full-mode templates over the positive instruction examples and the
/// labeled instances (first gold output as target) of each task.
std::vector<TrainExample> positive_training_batch(std::span<const TaskSpec> tasks, const Hyper& hyper);

/// Predicts on every labeled instance input of S (full-mode template) and
/// keeps the pairs whose trimmed prediction equals no trimmed gold output.
std::vector<MinedNegative> mine_negatives(Learner& model, std::span<const TaskSpec> S, const Hyper& hyper);

/// Initialization on S:
///   pretrain_positive_S, mine negatives, pretrain_negative_S, finetune_positive_S.
/// With `negative_training` off only the first phase runs.
void initialize(std::span<const TaskSpec> S, Learner& learner, const Hyper& hyper, RunLog* log = nullptr,
                bool negative_training = true);

/// Tasks whose instructions are replayed before learning chain position
/// `position` (1-based): positions 1 .. position - lag.
std::vector<const TaskSpec*> history_for_position(std::span<const TaskSpec* const> chain, std::size_t position,
                                                  std::size_t lag = 2);

/// Phases for learning one unseen task:
///   instructionspeak: history_replay (bare templates of the history tasks'
///   positive examples, history hyper), task_negative, task_positive;
///   seq_finetune: task_positive.
/// Only instruction examples are used; labeled instances never are.
SchedulePlan plan_continual_step(const TaskSpec& task, std::span<const TaskSpec* const> history, Strategy strategy,
                                 const Hyper& hyper, const Hyper& history_hyper);

void continual_step(Learner& model, const TaskSpec& task, std::span<const TaskSpec* const> history, Strategy strategy,
                    const Hyper& hyper, const Hyper& history_hyper, RunLog* log = nullptr);

/// One task_positive phase over the seeded shuffle of all positive
/// instruction examples of `tasks`.
SchedulePlan plan_multitask(std::span<const TaskSpec* const> tasks, const Hyper& hyper, std::uint64_t seed);

void multitask_train(Learner& model, std::span<const TaskSpec* const> tasks, const Hyper& hyper, std::uint64_t seed,
                     RunLog* log = nullptr);

/// Checks one task's phase sequence against the strategy's grammar:
///   instructionspeak: history_replay? task_negative? task_positive
///   seq_finetune / multitask: task_positive
bool is_legal_step_sequence(std::span<const TrainPhase> phases, Strategy strategy);

}  // namespace instructcl
