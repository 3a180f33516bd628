// SPDX-License-Identifier: Apache-2.0
#include <exception>
#include <functional>

#include "instructcl/learner.hpp"
#include "instructcl/template.hpp"

namespace instructcl {

namespace {

const Instruction& probe_instruction() {
  static const Instruction ins{
      "probe copy task",
      "copy the reversed input words",
      std::nullopt,
      std::nullopt,
      std::nullopt,
      {{"alpha beta", "beta alpha", std::nullopt, Polarity::positive}},
  };
  return ins;
}

std::vector<std::string> probe_inputs() {
  std::vector<std::string> out;
  for (auto input : {"alpha beta", "gamma delta", "epsilon zeta", "eta theta", "never trained"})
    out.push_back(render(probe_instruction(), input, RenderMode::bare_no_examples));
  return out;
}

std::vector<TrainExample> probe_batch(std::string_view task_id, std::initializer_list<std::pair<const char*, const char*>> pairs) {
  std::vector<TrainExample> out;
  for (const auto& [in, target] : pairs)
    out.push_back({render(probe_instruction(), in, RenderMode::bare_no_examples), target,
                   ExampleOrigin::instruction_example, std::string(task_id)});
  return out;
}

std::string show(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", \"" : "\"") + v[i] + "\"";
  return out + "]";
}

}  // namespace

bool ConformanceReport::passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return !checks.empty();
}

ConformanceReport conformance_suite(Learner& fresh) {
  ConformanceReport report;
  report.learner = fresh.name();
  const auto probes = probe_inputs();
  const auto batch_a = probe_batch("probe_a", {{"alpha beta", "beta alpha"}, {"gamma delta", "delta gamma"}});
  const auto batch_b = probe_batch("probe_b", {{"epsilon zeta", "zeta epsilon"}, {"alpha beta", "overwritten"}});
  const auto hyper = Hyper::continual_defaults();

  auto run = [&](std::string name, const std::function<std::string()>& body) {
    ConformanceCheck check{std::move(name), false, {}};
    try {
      check.detail = body();
      check.passed = check.detail.empty();
    } catch (const std::exception& e) {
      check.detail = std::string("exception: ") + e.what();
    }
    report.checks.push_back(std::move(check));
  };

  run("predict_cardinality", [&]() -> std::string {
    if (fresh.predict(probes).size() != probes.size()) return "output count differs from input count";
    if (!fresh.predict({}).empty()) return "non-empty output for empty input";
    return {};
  });

  run("predict_purity", [&]() -> std::string {
    fresh.train(batch_a, TrainPhase::task_positive, hyper);
    const auto first = fresh.predict(probes);
    const auto second = fresh.predict(probes);
    return first == second ? std::string() : "repeated predict changed: " + show(first) + " vs " + show(second);
  });

  run("hyper_uniformity", [&]() -> std::string {
    auto scratch = fresh.clone();
    for (const auto& h : {Hyper{1e-9, 1, 1, 1}, Hyper{1.0, 50, 64, 4096}, Hyper::history_defaults()})
      scratch->train(batch_b, TrainPhase::history_replay, h);
    return {};
  });

  run("snapshot_restore", [&]() -> std::string {
    const auto before = fresh.predict(probes);
    const auto token = fresh.snapshot();
    fresh.train(batch_b, TrainPhase::task_positive, hyper);
    fresh.restore(token);
    const auto after = fresh.predict(probes);
    if (after != before) return "restore did not reproduce snapshot behavior: " + show(before) + " vs " + show(after);
    fresh.train(batch_b, TrainPhase::task_negative, hyper);
    fresh.restore(token);
    const auto again = fresh.predict(probes);
    return again == before ? std::string() : "second restore of the same token differs";
  });

  run("clone_independence", [&]() -> std::string {
    const auto before = fresh.predict(probes);
    auto copy = fresh.clone();
    if (copy->predict(probes) != before) return "clone behaves differently from its source";
    copy->train(batch_b, TrainPhase::task_positive, hyper);
    const auto after = fresh.predict(probes);
    return after == before ? std::string() : "training the clone changed the source: " + show(after);
  });

  run("determinism", [&]() -> std::string {
    auto a = fresh.clone();
    auto b = fresh.clone();
    for (auto* l : {a.get(), b.get()}) {
      l->train(batch_b, TrainPhase::task_negative, hyper);
      l->train(batch_a, TrainPhase::task_positive, hyper);
    }
    const auto pa = a->predict(probes), pb = b->predict(probes);
    return pa == pb ? std::string() : "identical training diverged: " + show(pa) + " vs " + show(pb);
  });

  run("foreign_token_rejected", [&]() -> std::string {
    const auto before = fresh.predict(probes);
    try {
      fresh.restore(SnapshotToken{"foreign:not-issued-by-this-lineage"});
      return "foreign token was accepted";
    } catch (const std::invalid_argument&) {
    }
    return fresh.predict(probes) == before ? std::string() : "rejected restore changed behavior";
  });

  return report;
}

}  // namespace instructcl
