// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sys/types.h>

#include <json.hpp>

#include <optional>
#include <string>

#include "instructcl/learner.hpp"

namespace instructcl {

inline constexpr int kBridgeProtocolVersion = 1;

/// Child process started through `/bin/sh -c command` with its standard
/// input and output connected to pipes. Standard error is inherited.
class WorkerProcess {
 public:
  explicit WorkerProcess(const std::string& command);
  ~WorkerProcess();

  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  /// False when the pipe is closed.
  bool write_line(std::string_view line);
  /// nullopt at end of stream.
  std::optional<std::string> read_line();
  /// Closes the child's stdin and reaps it, killing it after `grace_ms`.
  void terminate(int grace_ms = 2000);

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Learner backed by an external worker speaking the line-delimited JSON
/// protocol of docs/protocol.md. One request is in flight at a time.
/// Cloning snapshots this worker, starts a new one with the same command and
/// restores the token there.
class ExternalLearner : public Learner {
 public:
  explicit ExternalLearner(std::string command);
  ~ExternalLearner() override;

  std::string name() const override { return "external(" + remote_name_ + ")"; }
  void train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper& hyper) override;
  std::vector<std::string> predict(std::span<const std::string> encoder_texts) override;
  SnapshotToken snapshot() override;
  void restore(const SnapshotToken& token) override;
  LearnerHandle clone() override;

  /// Sends one request (an `id` is assigned) and returns the matching
  /// successful response. Error responses become invalid_argument or
  /// LearnerError; transport failures become LearnerUnavailable.
  nlohmann::json call(nlohmann::json request);

 private:
  [[noreturn]] void fail(const std::string& why);

  std::string command_;
  std::unique_ptr<WorkerProcess> worker_;
  std::uint64_t next_id_ = 1;
  std::string remote_name_;
  bool broken_ = false;
};

}  // namespace instructcl
