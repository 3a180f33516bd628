// SPDX-License-Identifier: Apache-2.0
#include "instructcl/external_learner.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

namespace instructcl {

namespace {

using nlohmann::json;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &sa, nullptr);
  });
}

}  // namespace

WorkerProcess::WorkerProcess(const std::string& command) {
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw LearnerUnavailable(std::string("pipe: ") + std::strerror(errno));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw LearnerUnavailable(std::string("pipe: ") + std::strerror(errno));
  }
  pid_ = fork();
  if (pid_ < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw LearnerUnavailable(std::string("fork: ") + std::strerror(errno));
  }
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

WorkerProcess::~WorkerProcess() { terminate(); }

bool WorkerProcess::write_line(std::string_view line) {
  if (to_child_ < 0) return false;
  std::string data(line);
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<std::string> WorkerProcess::read_line() {
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (from_child_ < 0) return std::nullopt;
    char chunk[65536];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void WorkerProcess::terminate(int grace_ms) {
  if (to_child_ >= 0) close(to_child_);
  to_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(grace_ms);
    while (waitpid(pid_, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() >= deadline) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
  }
  if (from_child_ >= 0) close(from_child_);
  from_child_ = -1;
}

// ---------------------------------------------------------------------------

ExternalLearner::ExternalLearner(std::string command)
    : command_(std::move(command)), worker_(std::make_unique<WorkerProcess>(command_)) {
  const auto hello = call({{"op", "hello"}, {"version", kBridgeProtocolVersion}});
  if (hello.value("version", -1) != kBridgeProtocolVersion)
    fail("worker speaks protocol version " + hello.value("version", json()).dump());
  remote_name_ = hello.value("learner", "unnamed");
}

ExternalLearner::~ExternalLearner() {
  if (worker_ && !broken_) {
    try {
      call({{"op", "shutdown"}});
    } catch (const std::exception&) {
    }
  }
}

void ExternalLearner::fail(const std::string& why) {
  broken_ = true;
  if (worker_) worker_->terminate(0);
  throw LearnerUnavailable("external learner '" + command_ + "': " + why);
}

json ExternalLearner::call(json request) {
  if (broken_) throw LearnerUnavailable("external learner '" + command_ + "' is unavailable");
  const auto id = next_id_++;
  request["id"] = id;
  if (!worker_->write_line(request.dump())) fail("cannot write request (worker exited?)");
  const auto line = worker_->read_line();
  if (!line) fail("worker closed its output");
  json response;
  try {
    response = json::parse(*line);
  } catch (const json::exception& e) {
    fail(std::string("malformed response: ") + e.what());
  }
  if (!response.is_object() || response.value("id", json()) != json(id))
    fail("response id does not match request id " + std::to_string(id));
  if (!response.value("ok", false)) {
    const auto err = response.value("error", json::object());
    const auto code = err.is_object() ? err.value("code", "") : std::string();
    const auto message = err.is_object() ? err.value("message", "") : err.dump();
    if (code == "invalid_argument") throw std::invalid_argument(message);
    throw LearnerError("external learner error (" + code + "): " + message);
  }
  return response;
}

void ExternalLearner::train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper& hyper) {
  if (batch.empty()) throw std::invalid_argument("train: empty batch");
  hyper.validate();
  json examples = json::array();
  for (const auto& ex : batch)
    examples.push_back({{"encoder_text", ex.encoder_text},
                        {"target_text", ex.target_text},
                        {"origin", to_string(ex.origin)},
                        {"task_id", ex.task_id}});
  call({{"op", "train"},
        {"phase", to_string(phase)},
        {"examples", std::move(examples)},
        {"hyper",
         {{"learning_rate", hyper.learning_rate},
          {"epochs", hyper.epochs},
          {"batch_size", hyper.batch_size},
          {"max_input_tokens", hyper.max_input_tokens}}}});
}

std::vector<std::string> ExternalLearner::predict(std::span<const std::string> encoder_texts) {
  const auto response =
      call({{"op", "predict"}, {"inputs", std::vector<std::string>(encoder_texts.begin(), encoder_texts.end())}});
  std::vector<std::string> outputs;
  try {
    outputs = response.at("outputs").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    fail("predict response without an outputs list");
  }
  if (outputs.size() != encoder_texts.size()) fail("predict returned the wrong number of outputs");
  return outputs;
}

SnapshotToken ExternalLearner::snapshot() {
  const auto response = call({{"op", "snapshot"}});
  if (!response.contains("token") || !response["token"].is_string()) fail("snapshot response without a token");
  return {response["token"].get<std::string>()};
}

void ExternalLearner::restore(const SnapshotToken& token) { call({{"op", "restore"}, {"token", token.value}}); }

LearnerHandle ExternalLearner::clone() {
  const auto token = snapshot();
  auto copy = std::make_unique<ExternalLearner>(command_);
  copy->restore(token);
  return copy;
}

}  // namespace instructcl
