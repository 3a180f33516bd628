// SPDX-License-Identifier: Apache-2.0
#include "instructcl/learner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>

#include "instructcl/external_learner.hpp"
#include "instructcl/metrics.hpp"
#include "instructcl/template.hpp"

namespace instructcl {

namespace {

using nlohmann::json;

constexpr std::string_view kBlobFormat = "instructcl-learner";
constexpr int kBlobVersion = 1;

std::uint64_t next_lineage() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void require_batch(std::span<const TrainExample> batch) {
  if (batch.empty()) throw std::invalid_argument("train: empty batch");
}

}  // namespace

std::string_view to_string(TrainPhase p) {
  switch (p) {
    case TrainPhase::pretrain_positive_S: return "pretrain_positive_S";
    case TrainPhase::pretrain_negative_S: return "pretrain_negative_S";
    case TrainPhase::finetune_positive_S: return "finetune_positive_S";
    case TrainPhase::history_replay: return "history_replay";
    case TrainPhase::task_negative: return "task_negative";
    case TrainPhase::task_positive: return "task_positive";
  }
  return "?";
}

std::optional<TrainPhase> parse_train_phase(std::string_view text) {
  for (auto p : {TrainPhase::pretrain_positive_S, TrainPhase::pretrain_negative_S, TrainPhase::finetune_positive_S,
                 TrainPhase::history_replay, TrainPhase::task_negative, TrainPhase::task_positive})
    if (to_string(p) == text) return p;
  return std::nullopt;
}

std::string_view to_string(ExampleOrigin o) {
  switch (o) {
    case ExampleOrigin::instruction_example: return "instruction_example";
    case ExampleOrigin::labeled_instance: return "labeled_instance";
    case ExampleOrigin::mined_negative: return "mined_negative";
  }
  return "?";
}

std::optional<ExampleOrigin> parse_example_origin(std::string_view text) {
  for (auto o : {ExampleOrigin::instruction_example, ExampleOrigin::labeled_instance, ExampleOrigin::mined_negative})
    if (to_string(o) == text) return o;
  return std::nullopt;
}

void Hyper::validate() const {
  if (!(learning_rate > 0.0) || epochs <= 0 || batch_size <= 0 || max_input_tokens <= 0)
    throw std::invalid_argument("hyper: learning_rate, epochs, batch_size and max_input_tokens must be positive");
}

// ---------------------------------------------------------------------------

NativeLearner::NativeLearner() : lineage_(next_lineage()) {}

NativeLearner::NativeLearner(const NativeLearner& other)
    : Learner(other),
      lineage_(next_lineage()),
      snapshots_(other.snapshots_),
      next_snapshot_(0) {}

SnapshotToken NativeLearner::snapshot() {
  SnapshotToken token{"native:" + std::to_string(lineage_) + ":" + std::to_string(next_snapshot_++)};
  snapshots_[token.value] = serialize();
  return token;
}

void NativeLearner::restore(const SnapshotToken& token) {
  const auto it = snapshots_.find(token.value);
  if (it == snapshots_.end()) throw std::invalid_argument("restore: unknown snapshot token '" + token.value + "'");
  deserialize(it->second);
}

std::string NativeLearner::serialize() const {
  json j;
  j["format"] = kBlobFormat;
  j["version"] = kBlobVersion;
  j["kind"] = kind();
  j["state"] = json::parse(save_state());
  return j.dump();
}

void NativeLearner::deserialize(std::string_view blob) {
  json j;
  try {
    j = json::parse(blob);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("learner blob: ") + e.what());
  }
  if (j.value("format", "") != kBlobFormat) throw std::invalid_argument("learner blob: unknown format");
  if (j.value("version", 0) != kBlobVersion)
    throw std::invalid_argument("learner blob: unsupported version " + j.value("version", json()).dump());
  if (j.value("kind", "") != kind())
    throw std::invalid_argument("learner blob: kind '" + j.value("kind", "") + "' does not match '" + kind() + "'");
  load_state(j.at("state").dump());
}

std::string memory_key(std::string_view encoder_text) {
  std::string key;
  for (const auto& tok : normalize(input_segment(encoder_text))) {
    if (!key.empty()) key.push_back(' ');
    key += tok;
  }
  return key;
}

// ---------------------------------------------------------------------------

void PerfectMemorizer::train(std::span<const TrainExample> batch, TrainPhase, const Hyper& hyper) {
  require_batch(batch);
  hyper.validate();
  for (const auto& ex : batch) memory_[memory_key(ex.encoder_text)] = ex.target_text;
}

std::vector<std::string> PerfectMemorizer::predict(std::span<const std::string> encoder_texts) {
  std::vector<std::string> out;
  out.reserve(encoder_texts.size());
  for (const auto& text : encoder_texts) {
    const auto it = memory_.find(memory_key(text));
    out.push_back(it == memory_.end() ? std::string() : it->second);
  }
  return out;
}

std::string PerfectMemorizer::save_state() const { return json(memory_).dump(); }

void PerfectMemorizer::load_state(std::string_view state) {
  memory_ = json::parse(state).get<std::map<std::string, std::string>>();
}

// ---------------------------------------------------------------------------

WindowedMemorizer::WindowedMemorizer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("windowed_memorizer: capacity must be at least 1");
}

void WindowedMemorizer::touch(const std::string& task_id) {
  if (const auto it = std::find(order_.begin(), order_.end(), task_id); it != order_.end()) {
    if (std::next(it) == order_.end()) return;
    order_.erase(it);
  }
  order_.push_back(task_id);
  while (order_.size() > capacity_) {
    memory_.erase(order_.front());
    order_.pop_front();
  }
}

void WindowedMemorizer::train(std::span<const TrainExample> batch, TrainPhase, const Hyper& hyper) {
  require_batch(batch);
  hyper.validate();
  for (const auto& ex : batch) {
    touch(ex.task_id);
    memory_[ex.task_id][memory_key(ex.encoder_text)] = ex.target_text;
  }
}

std::vector<std::string> WindowedMemorizer::predict(std::span<const std::string> encoder_texts) {
  std::vector<std::string> out;
  out.reserve(encoder_texts.size());
  for (const auto& text : encoder_texts) {
    const auto key = memory_key(text);
    std::string hit;
    for (auto task = order_.rbegin(); task != order_.rend(); ++task) {
      const auto& mem = memory_.at(*task);
      if (const auto it = mem.find(key); it != mem.end()) {
        hit = it->second;
        break;
      }
    }
    out.push_back(std::move(hit));
  }
  return out;
}

std::string WindowedMemorizer::save_state() const {
  json j;
  j["capacity"] = capacity_;
  j["order"] = std::vector<std::string>(order_.begin(), order_.end());
  j["memory"] = memory_;
  return j.dump();
}

void WindowedMemorizer::load_state(std::string_view state) {
  const auto j = json::parse(state);
  if (j.at("capacity").get<std::size_t>() != capacity_)
    throw std::invalid_argument("windowed_memorizer: snapshot capacity differs");
  const auto order = j.at("order").get<std::vector<std::string>>();
  order_.assign(order.begin(), order.end());
  memory_ = j.at("memory").get<std::map<std::string, std::map<std::string, std::string>>>();
}

// ---------------------------------------------------------------------------

void EchoLearner::train(std::span<const TrainExample> batch, TrainPhase, const Hyper& hyper) {
  require_batch(batch);
  hyper.validate();
}

std::vector<std::string> EchoLearner::predict(std::span<const std::string> encoder_texts) {
  std::vector<std::string> out;
  out.reserve(encoder_texts.size());
  for (const auto& text : encoder_texts) out.emplace_back(input_segment(text));
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::perfect_memorizer: return "perfect_memorizer";
    case LearnerKind::windowed_memorizer: return "windowed_memorizer";
    case LearnerKind::echo: return "echo";
    case LearnerKind::external: return "external";
  }
  return "?";
}

std::optional<LearnerKind> parse_learner_kind(std::string_view text) {
  for (auto k : {LearnerKind::perfect_memorizer, LearnerKind::windowed_memorizer, LearnerKind::echo,
                 LearnerKind::external})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

LearnerHandle make_learner(const LearnerSpec& spec) {
  switch (spec.kind) {
    case LearnerKind::perfect_memorizer: return std::make_unique<PerfectMemorizer>();
    case LearnerKind::windowed_memorizer: return std::make_unique<WindowedMemorizer>(spec.window);
    case LearnerKind::echo: return std::make_unique<EchoLearner>();
    case LearnerKind::external:
      if (spec.bridge_command.empty()) throw std::invalid_argument("external learner needs a bridge command");
      return std::make_unique<ExternalLearner>(spec.bridge_command);
  }
  throw std::invalid_argument("unknown learner kind");
}

}  // namespace instructcl
