// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include "instructcl/template.hpp"

#include <unistd.h>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oracle {

namespace fs = std::filesystem;
using namespace instructcl;

std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  const std::size_t n = shorter.size();
  std::size_t best = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    const auto len = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (len <= best) continue;
    // Greedy matching decides whether this subsequence occurs in `longer`.
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      while (j < longer.size() && longer[j] != shorter[i]) ++j;
      if (j == longer.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

std::vector<ReferenceRun> reference_forward(const std::string& t, std::size_t i, std::size_t k,
                                            const std::vector<std::string>& draw) {
  ReferenceRun before, after;
  for (std::size_t j = 0; j + 1 < k; ++j) before.tasks.push_back(draw[j]);
  before.tasks.push_back(t);
  before.evaluate_after = {k};
  for (std::size_t j = 0; j + 1 < k + i; ++j) after.tasks.push_back(draw[j]);
  after.tasks.push_back(t);
  after.evaluate_after = {k + i};
  return {before, after};
}

std::vector<ReferenceRun> reference_backward(const std::string& t, std::size_t i, std::size_t k,
                                             const std::vector<std::string>& draw) {
  ReferenceRun run;
  for (std::size_t j = 0; j + 1 < k; ++j) run.tasks.push_back(draw[j]);
  run.tasks.push_back(t);
  for (std::size_t j = k - 1; j < k + i - 1; ++j) run.tasks.push_back(draw[j]);
  run.evaluate_after = {k, k + i};
  return {run};
}

std::size_t legal_plan_count(std::size_t unseen, std::size_t distance) {
  // sum over k in [1, |U|-i] of P(|U|-1, k+i-1)
  std::size_t total = 0;
  for (std::size_t k = 1; k + distance <= unseen; ++k) {
    std::size_t perms = 1;
    for (std::size_t j = 0; j < k + distance - 1; ++j) perms *= unseen - 1 - j;
    total += perms;
  }
  return total;
}

// ---------------------------------------------------------------------------

WindowSimulation::WindowSimulation(std::size_t capacity, const Corpus& corpus) : capacity_(capacity) {
  for (const auto& t : corpus.tasks) tasks_[t.task_id] = &t;
}

void WindowSimulation::touch(const std::string& id) { last_touch_[id] = ++clock_; }

void WindowSimulation::pretrain(const std::vector<TaskSpec>& S) {
  for (const auto& t : S) touch(t.task_id);
}

void WindowSimulation::learn(const TaskSpec& task, const std::vector<const TaskSpec*>& replayed) {
  for (const auto* h : replayed) touch(h->task_id);
  touch(task.task_id);
}

std::set<std::string> WindowSimulation::retained() const {
  std::vector<std::pair<std::size_t, std::string>> by_time;
  for (const auto& [id, time] : last_touch_) by_time.push_back({time, id});
  std::sort(by_time.rbegin(), by_time.rend());
  std::set<std::string> out;
  for (std::size_t i = 0; i < std::min(capacity_, by_time.size()); ++i) out.insert(by_time[i].second);
  return out;
}

double WindowSimulation::score(const TaskSpec& probe, const std::vector<Instance>& eval) const {
  const auto keep = retained();
  if (eval.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& inst : eval) {
    if (!keep.count(probe.task_id)) continue;
    for (const auto& e : probe.instruction.examples)
      if (e.polarity == Polarity::positive && e.input == inst.input && e.output == inst.gold_outputs.front()) {
        ++hits;
        break;
      }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(eval.size());
}

double simulate_backward_gain(std::size_t capacity, const Corpus& corpus, const std::vector<TaskSpec>& S,
                              const std::vector<std::string>& chain, std::size_t k, std::size_t distance,
                              Strategy strategy, std::size_t history_lag, const std::vector<Instance>& eval) {
  WindowSimulation sim(capacity, corpus);
  sim.pretrain(S);
  const auto task = [&](const std::string& id) -> const TaskSpec& {
    const auto* t = corpus.find(id);
    if (t == nullptr) throw std::invalid_argument("simulation: unknown task " + id);
    return *t;
  };
  double before = 0.0;
  for (std::size_t pos = 1; pos <= k + distance; ++pos) {
    std::vector<const TaskSpec*> replay;
    if (strategy == Strategy::instructionspeak)
      for (std::size_t h = 1; h + history_lag <= pos; ++h) replay.push_back(&task(chain[h - 1]));
    sim.learn(task(chain[pos - 1]), replay);
    if (pos == k) before = sim.score(task(chain[k - 1]), eval);
  }
  return sim.score(task(chain[k - 1]), eval) - before;
}

// ---------------------------------------------------------------------------

MockLearner::MockLearner(std::shared_ptr<Journal> journal)
    : journal_(std::move(journal)), handle_(journal_->next_handle++) {}

MockLearner::MockLearner(const MockLearner& other)
    : Learner(other),
      journal_(other.journal_),
      handle_(journal_->next_handle++),
      learned_(other.learned_),
      steps_(other.steps_),
      snapshots_(other.snapshots_) {}

void MockLearner::train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper&) {
  if (batch.empty()) throw std::invalid_argument("mock: empty batch");
  Journal::Entry e{handle_, "train", phase, {}, {}, 0};
  for (const auto& ex : batch)
    if (std::find(e.task_ids.begin(), e.task_ids.end(), ex.task_id) == e.task_ids.end())
      e.task_ids.push_back(ex.task_id);
  for (const auto& id : e.task_ids) learned_.push_back(std::string(to_string(phase)) + ":" + id);
  if (phase == TrainPhase::task_positive) ++steps_;
  e.steps = steps_;
  journal_->entries.push_back(std::move(e));
}

std::vector<std::string> MockLearner::predict(std::span<const std::string> encoder_texts) {
  Journal::Entry e{handle_, "predict", TrainPhase::task_positive, {}, {}, steps_};
  if (!encoder_texts.empty()) e.detail = encoder_texts.front().substr(0, 64);
  for (const auto& l : learned_) e.state += l + ";";
  journal_->entries.push_back(std::move(e));
  // A digest of the history: distinct histories give distinct word sets.
  std::string digest;
  for (std::size_t i = 0; i < learned_.size(); ++i) {
    if (!digest.empty()) digest.push_back(' ');
    digest += "h" + std::to_string(i) + "x" + std::to_string(std::hash<std::string>{}(learned_[i]) % 97);
  }
  return std::vector<std::string>(encoder_texts.size(), digest);
}

SnapshotToken MockLearner::snapshot() {
  const auto token = "mock:" + std::to_string(handle_) + ":" + std::to_string(snapshots_.size());
  snapshots_[token] = {learned_, steps_};
  journal_->entries.push_back({handle_, "snapshot", TrainPhase::task_positive, {}, token, steps_});
  return {token};
}

void MockLearner::restore(const SnapshotToken& token) {
  const auto it = snapshots_.find(token.value);
  if (it == snapshots_.end()) throw std::invalid_argument("mock: unknown token");
  learned_ = it->second.first;
  steps_ = it->second.second;
  journal_->entries.push_back({handle_, "restore", TrainPhase::task_positive, {}, token.value, steps_});
}

LearnerHandle MockLearner::clone() {
  journal_->entries.push_back({handle_, "clone", TrainPhase::task_positive, {}, {}, steps_});
  return LearnerHandle(new MockLearner(*this));
}

void NoRestoreLearner::restore(const SnapshotToken& token) {
  if (!snapshots_.count(token.value)) throw std::invalid_argument("mock: unknown token");
  journal_->entries.push_back({handle_, "restore", TrainPhase::task_positive, {}, token.value, steps_});
}

LearnerHandle NoRestoreLearner::clone() { return LearnerHandle(new NoRestoreLearner(*this)); }

void StepDependentLearner::train(std::span<const TrainExample> batch, TrainPhase phase, const Hyper&) {
  if (batch.empty()) throw std::invalid_argument("step_dependent: empty batch");
  for (const auto& ex : batch) memory_[memory_key(ex.encoder_text)] = ex.target_text;
  if (phase == TrainPhase::task_positive) ++steps_;
}

std::vector<std::string> StepDependentLearner::predict(std::span<const std::string> encoder_texts) {
  std::vector<std::string> out;
  for (const auto& text : encoder_texts) {
    const auto it = memory_.find(memory_key(text));
    out.push_back(it == memory_.end() ? std::string() : truncate_tokens(it->second, 1 + steps_ % 3));
  }
  return out;
}

LearnerHandle StepDependentLearner::clone() { return LearnerHandle(new StepDependentLearner(*this)); }

std::string StepDependentLearner::save_state() const {
  return nlohmann::json{{"memory", memory_}, {"steps", steps_}}.dump();
}

void StepDependentLearner::load_state(std::string_view state) {
  const auto j = nlohmann::json::parse(state);
  memory_ = j.at("memory").get<std::map<std::string, std::string>>();
  steps_ = j.at("steps").get<std::size_t>();
}

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("instructcl-test-" + std::to_string(getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace oracle
