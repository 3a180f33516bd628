// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace instructcl {

enum class TrainPhase {
  pretrain_positive_S,
  pretrain_negative_S,
  finetune_positive_S,
  history_replay,
  task_negative,
  task_positive,
};

std::string_view to_string(TrainPhase p);
std::optional<TrainPhase> parse_train_phase(std::string_view text);

enum class ExampleOrigin { instruction_example, labeled_instance, mined_negative };

std::string_view to_string(ExampleOrigin o);
std::optional<ExampleOrigin> parse_example_origin(std::string_view text);

/// One text-to-text training unit. `task_id` names the task the example was
/// drawn from; learners with per-task state key on it.
struct TrainExample {
  std::string encoder_text;
  std::string target_text;
  ExampleOrigin origin = ExampleOrigin::instruction_example;
  std::string task_id;

  bool operator==(const TrainExample&) const = default;
};

struct Hyper {
  double learning_rate = 5e-5;
  int epochs = 3;
  int batch_size = 2;
  int max_input_tokens = 1024;

  /// Throws std::invalid_argument unless every field is positive.
  void validate() const;

  static Hyper training_defaults() { return {5e-5, 3, 5, 1024}; }
  static Hyper continual_defaults() { return {5e-5, 3, 2, 1024}; }
  static Hyper history_defaults() { return {5e-6, 1, 2, 1024}; }

  bool operator==(const Hyper&) const = default;
};

struct SnapshotToken {
  std::string value;

  bool operator==(const SnapshotToken&) const = default;
};

/// The learner stopped responding (external worker crash or broken pipe).
class LearnerUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Any other failure reported by a learner.
class LearnerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trainable text-to-text model. A handle is used from one thread at a time.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string name() const = 0;

  /// Batches are non-empty; empty batches are rejected with invalid_argument.
  virtual void train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper& hyper) = 0;

  /// One output per encoder text. Does not change behavior.
  virtual std::vector<std::string> predict(std::span<const std::string> encoder_texts) = 0;

  virtual SnapshotToken snapshot() = 0;

  /// Throws std::invalid_argument for tokens not issued within this lineage.
  virtual void restore(const SnapshotToken& token) = 0;

  /// Independent copy; training one side never affects the other.
  virtual std::unique_ptr<Learner> clone() = 0;
};

using LearnerHandle = std::unique_ptr<Learner>;

/// Base for in-process learners. Snapshots are versioned text blobs produced
/// by `serialize()`, kept in a per-handle store. Clones inherit the store,
/// so a token taken before cloning restores in both lineages; tokens taken
/// afterwards belong to one lineage only.
class NativeLearner : public Learner {
 public:
  NativeLearner();

  SnapshotToken snapshot() override;
  void restore(const SnapshotToken& token) override;

  /// Self-describing state blob: {"format":"instructcl-learner","version":1,
  /// "kind":..., "state":...}.
  std::string serialize() const;
  /// Replaces the state from a blob produced by `serialize()` of the same kind.
  void deserialize(std::string_view blob);

 protected:
  NativeLearner(const NativeLearner& other);

  virtual std::string kind() const = 0;
  virtual std::string save_state() const = 0;
  virtual void load_state(std::string_view state) = 0;

 private:
  std::uint64_t lineage_;
  std::map<std::string, std::string> snapshots_;
  std::uint64_t next_snapshot_ = 0;
};

/// Normalized `[Input]` segment used as the memorizer lookup key.
std::string memory_key(std::string_view encoder_text);

/// Stores input -> target for every example of every phase; recalls exact
/// key matches and returns "" on a miss.
class PerfectMemorizer : public NativeLearner {
 public:
  std::string name() const override { return "perfect_memorizer"; }
  void train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper& hyper) override;
  std::vector<std::string> predict(std::span<const std::string> encoder_texts) override;
  LearnerHandle clone() override { return std::make_unique<PerfectMemorizer>(*this); }

  PerfectMemorizer() = default;
  PerfectMemorizer(const PerfectMemorizer&) = default;

 protected:
  std::string kind() const override { return "perfect_memorizer"; }
  std::string save_state() const override;
  void load_state(std::string_view state) override;

 private:
  std::map<std::string, std::string> memory_;
};

/// Memorizer that retains the exemplars of the `capacity` most recently
/// trained tasks. Training on a task moves it to the most-recent slot;
/// the least recent task is evicted as a whole.
class WindowedMemorizer : public NativeLearner {
 public:
  explicit WindowedMemorizer(std::size_t capacity);
  WindowedMemorizer(const WindowedMemorizer&) = default;

  std::string name() const override { return "windowed_memorizer(" + std::to_string(capacity_) + ")"; }
  void train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper& hyper) override;
  std::vector<std::string> predict(std::span<const std::string> encoder_texts) override;
  LearnerHandle clone() override { return std::make_unique<WindowedMemorizer>(*this); }

  /// Task ids currently retained, least recent first.
  std::vector<std::string> retained_tasks() const { return {order_.begin(), order_.end()}; }
  std::size_t capacity() const { return capacity_; }

 protected:
  std::string kind() const override { return "windowed_memorizer"; }
  std::string save_state() const override;
  void load_state(std::string_view state) override;

 private:
  void touch(const std::string& task_id);

  std::size_t capacity_;
  std::deque<std::string> order_;
  std::map<std::string, std::map<std::string, std::string>> memory_;
};

/// Ignores training; predicts the `[Input]` segment verbatim.
class EchoLearner : public NativeLearner {
 public:
  EchoLearner() = default;
  EchoLearner(const EchoLearner&) = default;

  std::string name() const override { return "echo"; }
  void train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper& hyper) override;
  std::vector<std::string> predict(std::span<const std::string> encoder_texts) override;
  LearnerHandle clone() override { return std::make_unique<EchoLearner>(*this); }

 protected:
  std::string kind() const override { return "echo"; }
  std::string save_state() const override { return "{}"; }
  void load_state(std::string_view) override {}
};

enum class LearnerKind { perfect_memorizer, windowed_memorizer, echo, external };

std::string_view to_string(LearnerKind k);
std::optional<LearnerKind> parse_learner_kind(std::string_view text);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::perfect_memorizer;
  std::size_t window = 2;         // windowed_memorizer capacity
  std::string bridge_command;     // external worker command line

  bool operator==(const LearnerSpec&) const = default;
};

LearnerHandle make_learner(const LearnerSpec& spec);

// ---------------------------------------------------------------------------
// Conformance

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::string learner;
  std::vector<ConformanceCheck> checks;

  bool passed() const;
};

/// Exercises the snapshot, restore, clone and determinism contracts on a
/// fresh handle (which it mutates) and reports each violation.
ConformanceReport conformance_suite(Learner& fresh);

}  // namespace instructcl
