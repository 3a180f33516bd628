// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instructcl/corpus.hpp"
#include "instructcl/learner.hpp"
#include "instructcl/random.hpp"
#include "instructcl/scheduler.hpp"

namespace instructcl {

enum class Direction { forward, backward };

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view text);

/// A sampled task chain around one probe task.
///
/// Forward (distance i, position k): branch A learns [c1..c(k-1), t] and
/// evaluates t after step k; branch B learns [c1..c(k+i-1), t] and evaluates
/// t after step k+i. The branches share the first k-1 tasks.
///
/// Backward: one chain [c1..c(k-1), t, ck..c(k+i-1)], evaluating t after
/// step k and again after step k+i.
struct ChainPlan {
  Direction direction = Direction::forward;
  std::string probe_task;
  std::vector<std::string> context;  // k+i-1 distinct tasks, none equal to probe_task
  std::size_t k = 1;
  std::size_t distance = 1;
  std::vector<std::size_t> probe_positions;
  std::vector<std::size_t> eval_points;
  std::size_t shared_prefix_len = 0;

  /// Forward: {branch A, branch B}. Backward: {chain}.
  std::vector<std::vector<std::string>> sequences() const;

  bool operator==(const ChainPlan&) const = default;
};

ChainPlan make_forward_plan(std::string probe, std::size_t distance, std::size_t k, std::vector<std::string> context);
ChainPlan make_backward_plan(std::string probe, std::size_t distance, std::size_t k, std::vector<std::string> context);

/// k ~ uniform{1, ..., |U|-i}; context drawn without replacement from U\{t}.
ChainPlan plan_forward_chain(std::span<const std::string> unseen, std::string_view probe, std::size_t distance,
                             SeededStream& rng);
ChainPlan plan_backward_chain(std::span<const std::string> unseen, std::string_view probe, std::size_t distance,
                              SeededStream& rng);

class TaskTable {
 public:
  explicit TaskTable(std::span<const TaskSpec> tasks);
  const TaskSpec& at(std::string_view task_id) const;
  std::vector<const TaskSpec*> resolve(std::span<const std::string> ids) const;

 private:
  std::map<std::string, const TaskSpec*, std::less<>> by_id_;
};

/// Returns a fresh, independent copy of the initialized model on each call.
/// Must be callable from several threads.
using ModelProvider = std::function<LearnerHandle()>;

/// Provider that clones `initialized` under a mutex.
ModelProvider clone_provider(std::shared_ptr<Learner> initialized);

struct ChainSettings {
  Strategy strategy = Strategy::instructionspeak;
  HyperSet hypers;
  std::size_t history_lag = 2;
  bool use_snapshots = true;  // forward plans: evolve the shared prefix once
  std::uint64_t multitask_seed = 0;
};

struct EvalPoint {
  std::size_t step = 0;
  double score = 0.0;
};

struct ChainOutcome {
  std::vector<EvalPoint> evaluations;  // before, after
  RunLog log;

  double gain() const { return evaluations.at(1).score - evaluations.at(0).score; }
};

/// ROUGE-L score (0-100) of `model` on `eval` rendered with t's bare template.
double evaluate(Learner& model, const TaskSpec& task, std::span<const Instance> eval, const Hyper& hyper);

/// Evolves chain positions [from, to] (1-based, inclusive) under the
/// settings' sequential strategy.
void evolve(Learner& model, std::span<const TaskSpec* const> chain, std::size_t from, std::size_t to,
            const ChainSettings& settings, RunLog* log = nullptr);

ChainOutcome run_chain(const ChainPlan& plan, const ModelProvider& initialized, const TaskTable& tasks,
                       std::span<const Instance> eval, const ChainSettings& settings);

struct TransferConfig {
  std::size_t m = 10;
  std::vector<std::size_t> distances = {1, 10, 20, 30, 40};
  Direction direction = Direction::forward;
  std::uint64_t master_seed = 0;
  std::size_t eval_n = kDefaultEvalInstances;
  std::optional<std::uint64_t> eval_seed;  // defaults to master_seed

  /// Throws std::invalid_argument unless m >= 1 and 1 <= i <= unseen-1.
  void validate(std::size_t unseen_count) const;
};

/// Seed of the (direction, i, t, j) chain stream.
std::uint64_t chain_seed(std::uint64_t master_seed, Direction direction, std::size_t distance,
                         std::string_view task_id, std::size_t rep);

/// Evaluation instances of one task; fixed for a task across all chains.
std::vector<Instance> eval_instances_for(const TaskSpec& task, std::size_t eval_n, std::uint64_t eval_seed);

struct GainRecord {
  Strategy strategy = Strategy::instructionspeak;
  Direction direction = Direction::forward;
  std::size_t distance = 1;
  std::string task_id;
  Category category = Category::QG;
  std::size_t rep = 0;
  std::size_t k = 0;
  double score_before = 0.0;
  double score_after = 0.0;
  double gain = 0.0;
  bool ok = true;
  std::string diagnostic;

  bool operator==(const GainRecord&) const = default;
};

std::string to_json_line(const GainRecord& r);
GainRecord gain_record_from_json_line(std::string_view line);

struct TaskGain {
  std::string task_id;
  Category category = Category::QG;
  double mean = 0.0;     // g_{i,t}
  double rep_std = 0.0;  // sample std over repetitions
  std::size_t reps_ok = 0;
  std::size_t reps_total = 0;
};

struct TransferReport {
  Strategy strategy = Strategy::instructionspeak;
  Direction direction = Direction::forward;
  std::size_t distance = 1;
  std::vector<GainRecord> records;  // sorted by (task order, rep)
  std::vector<TaskGain> per_task;   // covered tasks only
  double mean = 0.0;                // g_i over covered tasks
  double std = 0.0;                 // sample std of g_{i,t} across covered tasks
  std::size_t tasks_total = 0;
  std::size_t tasks_covered = 0;
  std::map<Category, double> per_category;
  std::string run_log;  // JSONL phase events of every chain

  bool complete() const { return tasks_covered == tasks_total; }
};

/// Recomputes every aggregate of a report from its per-(t, j) records.
/// Task order follows first appearance in `records`.
TransferReport aggregate(Strategy strategy, Direction direction, std::size_t distance,
                         std::vector<GainRecord> records);

/// Runs m chains per unseen task and distance; one report per distance.
/// Results do not depend on `workers`.
std::vector<TransferReport> transfer_gain(const ModelProvider& initialized, std::span<const TaskSpec> unseen,
                                          const TransferConfig& config, const ChainSettings& settings,
                                          unsigned workers = 1);

/// Mean g_{i,t} over the covered tasks of each category, with categories
/// taken from `corpus`.
std::map<Category, double> category_breakdown(const TransferReport& report, const Corpus& corpus);

/// Runs `count` jobs on up to `workers` threads.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job);

}  // namespace instructcl
