// SPDX-License-Identifier: Apache-2.0
#include "instructcl/protocol.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "instructcl/metrics.hpp"
#include "instructcl/template.hpp"

namespace instructcl {

namespace {

using nlohmann::json;

std::vector<std::string> others(std::span<const std::string> unseen, std::string_view probe) {
  std::vector<std::string> out;
  bool found = false;
  for (const auto& id : unseen) {
    if (id == probe) {
      found = true;
      continue;
    }
    out.push_back(id);
  }
  if (!found) throw std::invalid_argument("chain plan: probe task '" + std::string(probe) + "' is not in U");
  return out;
}

// Draws k and the k+i-1 context tasks exactly as the metric loops do.
std::pair<std::size_t, std::vector<std::string>> draw_chain(std::span<const std::string> unseen,
                                                            std::string_view probe, std::size_t distance,
                                                            SeededStream& rng) {
  if (distance < 1 || unseen.size() < distance + 1)
    throw std::invalid_argument("chain plan: need |U| >= i + 1 (|U| = " + std::to_string(unseen.size()) +
                                ", i = " + std::to_string(distance) + ")");
  const auto pool = others(unseen, probe);
  const auto k = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(unseen.size() - distance)));
  std::vector<std::string> context;
  for (auto idx : rng.sample_indices(pool.size(), k + distance - 1)) context.push_back(pool[idx]);
  return {k, std::move(context)};
}

void check_plan_shape(std::string_view probe, std::size_t distance, std::size_t k,
                      const std::vector<std::string>& context) {
  if (k < 1 || distance < 1) throw std::invalid_argument("chain plan: k and i must be at least 1");
  if (context.size() != k + distance - 1)
    throw std::invalid_argument("chain plan: context must hold k+i-1 tasks");
  for (std::size_t a = 0; a < context.size(); ++a) {
    if (context[a] == probe) throw std::invalid_argument("chain plan: context contains the probe task");
    for (std::size_t b = a + 1; b < context.size(); ++b)
      if (context[a] == context[b]) throw std::invalid_argument("chain plan: context tasks must be distinct");
  }
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

std::optional<Direction> parse_direction(std::string_view text) {
  if (text == "forward") return Direction::forward;
  if (text == "backward") return Direction::backward;
  return std::nullopt;
}

std::vector<std::vector<std::string>> ChainPlan::sequences() const {
  const auto prefix = [&](std::size_t n) {
    return std::vector<std::string>(context.begin(), context.begin() + static_cast<std::ptrdiff_t>(n));
  };
  if (direction == Direction::forward) {
    auto a = prefix(k - 1);
    a.push_back(probe_task);
    auto b = prefix(k + distance - 1);
    b.push_back(probe_task);
    return {std::move(a), std::move(b)};
  }
  auto chain = prefix(k - 1);
  chain.push_back(probe_task);
  chain.insert(chain.end(), context.begin() + static_cast<std::ptrdiff_t>(k - 1), context.end());
  return {std::move(chain)};
}

ChainPlan make_forward_plan(std::string probe, std::size_t distance, std::size_t k, std::vector<std::string> context) {
  check_plan_shape(probe, distance, k, context);
  ChainPlan plan;
  plan.direction = Direction::forward;
  plan.probe_task = std::move(probe);
  plan.context = std::move(context);
  plan.k = k;
  plan.distance = distance;
  plan.probe_positions = {k, k + distance};
  plan.eval_points = {k, k + distance};
  plan.shared_prefix_len = k - 1;
  return plan;
}

ChainPlan make_backward_plan(std::string probe, std::size_t distance, std::size_t k, std::vector<std::string> context) {
  check_plan_shape(probe, distance, k, context);
  ChainPlan plan;
  plan.direction = Direction::backward;
  plan.probe_task = std::move(probe);
  plan.context = std::move(context);
  plan.k = k;
  plan.distance = distance;
  plan.probe_positions = {k};
  plan.eval_points = {k, k + distance};
  plan.shared_prefix_len = k;
  return plan;
}

ChainPlan plan_forward_chain(std::span<const std::string> unseen, std::string_view probe, std::size_t distance,
                             SeededStream& rng) {
  auto [k, context] = draw_chain(unseen, probe, distance, rng);
  return make_forward_plan(std::string(probe), distance, k, std::move(context));
}

ChainPlan plan_backward_chain(std::span<const std::string> unseen, std::string_view probe, std::size_t distance,
                              SeededStream& rng) {
  auto [k, context] = draw_chain(unseen, probe, distance, rng);
  return make_backward_plan(std::string(probe), distance, k, std::move(context));
}

// ---------------------------------------------------------------------------

TaskTable::TaskTable(std::span<const TaskSpec> tasks) {
  for (const auto& t : tasks)
    if (!by_id_.emplace(t.task_id, &t).second)
      throw std::invalid_argument("duplicate task id '" + t.task_id + "'");
}

const TaskSpec& TaskTable::at(std::string_view task_id) const {
  const auto it = by_id_.find(task_id);
  if (it == by_id_.end()) throw std::invalid_argument("unknown task id '" + std::string(task_id) + "'");
  return *it->second;
}

std::vector<const TaskSpec*> TaskTable::resolve(std::span<const std::string> ids) const {
  std::vector<const TaskSpec*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&at(id));
  return out;
}

ModelProvider clone_provider(std::shared_ptr<Learner> initialized) {
  auto mutex = std::make_shared<std::mutex>();
  return [initialized = std::move(initialized), mutex]() {
    std::lock_guard lock(*mutex);
    return initialized->clone();
  };
}

double evaluate(Learner& model, const TaskSpec& task, std::span<const Instance> eval, const Hyper& hyper) {
  std::vector<std::string> texts;
  texts.reserve(eval.size());
  for (const auto& inst : eval)
    texts.push_back(truncate_tokens(render(task.instruction, inst.input, RenderMode::bare_no_examples),
                                    static_cast<std::size_t>(hyper.max_input_tokens)));
  return score_task(model.predict(texts), eval);
}

void evolve(Learner& model, std::span<const TaskSpec* const> chain, std::size_t from, std::size_t to,
            const ChainSettings& settings, RunLog* log) {
  const bool replay = settings.strategy == Strategy::instructionspeak;
  for (std::size_t pos = from; pos <= to; ++pos) {
    const auto history = replay ? history_for_position(chain, pos, settings.history_lag)
                                : std::vector<const TaskSpec*>{};
    continual_step(model, *chain[pos - 1], history, settings.strategy, settings.hypers.continual,
                   settings.hypers.history, log);
  }
}

ChainOutcome run_chain(const ChainPlan& plan, const ModelProvider& initialized, const TaskTable& tasks,
                       std::span<const Instance> eval, const ChainSettings& settings) {
  const auto& probe = tasks.at(plan.probe_task);
  const auto& eval_hyper = settings.hypers.continual;
  ChainOutcome out;
  const auto seqs = plan.sequences();

  if (settings.strategy == Strategy::multitask) {
    // Each evaluation point trains jointly on everything learned so far.
    const auto& chain_for = [&](std::size_t idx) -> const std::vector<std::string>& {
      return plan.direction == Direction::forward ? seqs[idx] : seqs[0];
    };
    for (std::size_t e = 0; e < plan.eval_points.size(); ++e) {
      const auto step = plan.eval_points[e];
      const auto& seq = chain_for(e);
      const auto chain = tasks.resolve(std::span(seq).first(step));
      auto model = initialized();
      multitask_train(*model, chain, settings.hypers.continual, derive_seed(settings.multitask_seed, {step}),
                      &out.log);
      out.evaluations.push_back({step, evaluate(*model, probe, eval, eval_hyper)});
    }
    return out;
  }

  if (plan.direction == Direction::backward) {
    const auto chain = tasks.resolve(seqs[0]);
    auto model = initialized();
    evolve(*model, chain, 1, plan.k, settings, &out.log);
    out.evaluations.push_back({plan.k, evaluate(*model, probe, eval, eval_hyper)});
    evolve(*model, chain, plan.k + 1, plan.k + plan.distance, settings, &out.log);
    out.evaluations.push_back({plan.k + plan.distance, evaluate(*model, probe, eval, eval_hyper)});
    return out;
  }

  const auto branch_a = tasks.resolve(seqs[0]);
  const auto branch_b = tasks.resolve(seqs[1]);
  const auto len_a = branch_a.size(), len_b = branch_b.size();
  if (settings.use_snapshots) {
    auto model = initialized();
    evolve(*model, branch_b, 1, plan.shared_prefix_len, settings, &out.log);
    const auto token = model->snapshot();
    evolve(*model, branch_a, plan.shared_prefix_len + 1, len_a, settings, &out.log);
    out.evaluations.push_back({len_a, evaluate(*model, probe, eval, eval_hyper)});
    model->restore(token);
    evolve(*model, branch_b, plan.shared_prefix_len + 1, len_b, settings, &out.log);
    out.evaluations.push_back({len_b, evaluate(*model, probe, eval, eval_hyper)});
  } else {
    auto model_a = initialized();
    evolve(*model_a, branch_a, 1, len_a, settings, &out.log);
    out.evaluations.push_back({len_a, evaluate(*model_a, probe, eval, eval_hyper)});
    auto model_b = initialized();
    evolve(*model_b, branch_b, 1, len_b, settings, &out.log);
    out.evaluations.push_back({len_b, evaluate(*model_b, probe, eval, eval_hyper)});
  }
  return out;
}

// ---------------------------------------------------------------------------

void TransferConfig::validate(std::size_t unseen_count) const {
  if (m < 1) throw std::invalid_argument("transfer config: m must be at least 1");
  if (eval_n < 1) throw std::invalid_argument("transfer config: eval_n must be at least 1");
  for (auto i : distances)
    if (i < 1 || i + 1 > unseen_count)
      throw std::invalid_argument("transfer config: distance " + std::to_string(i) + " outside [1, |U|-1] with |U| = " +
                                  std::to_string(unseen_count));
}

std::uint64_t chain_seed(std::uint64_t master_seed, Direction direction, std::size_t distance,
                         std::string_view task_id, std::size_t rep) {
  return derive_seed(master_seed, {direction == Direction::forward ? 1u : 2u, distance, hash_string(task_id), rep});
}

std::vector<Instance> eval_instances_for(const TaskSpec& task, std::size_t eval_n, std::uint64_t eval_seed) {
  return sample_eval_instances(task, eval_n, derive_seed(eval_seed, task.task_id));
}

std::string to_json_line(const GainRecord& r) {
  json j;
  j["strategy"] = to_string(r.strategy);
  j["direction"] = to_string(r.direction);
  j["distance"] = r.distance;
  j["task"] = r.task_id;
  j["category"] = to_string(r.category);
  j["rep"] = r.rep;
  j["k"] = r.k;
  j["score_before"] = r.score_before;
  j["score_after"] = r.score_after;
  j["gain"] = r.gain;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) j["diagnostic"] = r.diagnostic;
  return j.dump();
}

GainRecord gain_record_from_json_line(std::string_view line) {
  const auto j = json::parse(line);
  GainRecord r;
  const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  const auto direction = parse_direction(j.at("direction").get<std::string>());
  const auto category = parse_category(j.at("category").get<std::string>());
  if (!strategy || !direction || !category) throw std::invalid_argument("gain record: bad enum field");
  r.strategy = *strategy;
  r.direction = *direction;
  r.category = *category;
  r.distance = j.at("distance").get<std::size_t>();
  r.task_id = j.at("task").get<std::string>();
  r.rep = j.at("rep").get<std::size_t>();
  r.k = j.at("k").get<std::size_t>();
  r.score_before = j.at("score_before").get<double>();
  r.score_after = j.at("score_after").get<double>();
  r.gain = j.at("gain").get<double>();
  r.ok = j.at("status").get<std::string>() == "ok";
  r.diagnostic = j.value("diagnostic", "");
  return r;
}

TransferReport aggregate(Strategy strategy, Direction direction, std::size_t distance,
                         std::vector<GainRecord> records) {
  TransferReport report;
  report.strategy = strategy;
  report.direction = direction;
  report.distance = distance;

  std::vector<std::string> order;
  std::map<std::string, std::vector<const GainRecord*>> by_task;
  for (const auto& r : records) {
    auto& slot = by_task[r.task_id];
    if (slot.empty()) order.push_back(r.task_id);
    slot.push_back(&r);
  }

  std::vector<double> task_means;
  std::map<Category, std::vector<double>> by_category;
  for (const auto& id : order) {
    const auto& rs = by_task[id];
    std::vector<double> gains;
    for (const auto* r : rs)
      if (r->ok) gains.push_back(r->gain);
    if (gains.empty()) continue;
    TaskGain tg{id, rs.front()->category, mean_of(gains), sample_std(gains), gains.size(), rs.size()};
    task_means.push_back(tg.mean);
    by_category[tg.category].push_back(tg.mean);
    report.per_task.push_back(std::move(tg));
  }
  report.tasks_total = order.size();
  report.tasks_covered = report.per_task.size();
  report.mean = mean_of(task_means);
  report.std = sample_std(task_means);
  for (const auto& [c, xs] : by_category) report.per_category[c] = mean_of(xs);
  report.records = std::move(records);
  return report;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
  workers = std::max(1u, workers);
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  const auto n = std::min<std::size_t>(workers, count);
  for (std::size_t w = 0; w < n; ++w)
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < count; i = next.fetch_add(1)) job(i);
    });
}

std::vector<TransferReport> transfer_gain(const ModelProvider& initialized, std::span<const TaskSpec> unseen,
                                          const TransferConfig& config, const ChainSettings& settings,
                                          unsigned workers) {
  config.validate(unseen.size());
  const TaskTable table(unseen);
  std::vector<std::string> ids;
  for (const auto& t : unseen) ids.push_back(t.task_id);

  const auto eval_seed = config.eval_seed.value_or(config.master_seed);
  std::vector<std::vector<Instance>> eval_sets;
  eval_sets.reserve(unseen.size());
  for (const auto& t : unseen) eval_sets.push_back(eval_instances_for(t, config.eval_n, eval_seed));

  std::vector<TransferReport> reports;
  for (const auto distance : config.distances) {
    const std::size_t jobs = unseen.size() * config.m;
    std::vector<GainRecord> records(jobs);
    std::vector<std::string> logs(jobs);

    parallel_for(jobs, workers, [&](std::size_t job) {
      const std::size_t t = job / config.m, rep = job % config.m;
      auto& r = records[job];
      r.strategy = settings.strategy;
      r.direction = config.direction;
      r.distance = distance;
      r.task_id = ids[t];
      r.category = unseen[t].category;
      r.rep = rep;
      try {
        const auto seed = chain_seed(config.master_seed, config.direction, distance, ids[t], rep);
        SeededStream rng(seed);
        const auto plan = config.direction == Direction::forward ? plan_forward_chain(ids, ids[t], distance, rng)
                                                                 : plan_backward_chain(ids, ids[t], distance, rng);
        r.k = plan.k;
        auto chain_settings = settings;
        chain_settings.multitask_seed = derive_seed(seed, "multitask");
        const auto outcome = run_chain(plan, initialized, table, eval_sets[t], chain_settings);
        r.score_before = outcome.evaluations.at(0).score;
        r.score_after = outcome.evaluations.at(1).score;
        r.gain = outcome.gain();
        logs[job] = outcome.log.to_jsonl(
            json{{"direction", to_string(config.direction)}, {"distance", distance}, {"task", ids[t]}, {"rep", rep}}
                .dump());
      } catch (const std::exception& e) {
        r.ok = false;
        r.diagnostic = e.what();
      }
    });

    auto report = aggregate(settings.strategy, config.direction, distance, std::move(records));
    for (auto& l : logs) report.run_log += l;
    reports.push_back(std::move(report));
  }
  return reports;
}

std::map<Category, double> category_breakdown(const TransferReport& report, const Corpus& corpus) {
  std::map<Category, std::vector<double>> grouped;
  for (const auto& tg : report.per_task) {
    const auto* task = corpus.find(tg.task_id);
    grouped[task != nullptr ? task->category : tg.category].push_back(tg.mean);
  }
  std::map<Category, double> out;
  for (const auto& [c, xs] : grouped) out[c] = mean_of(xs);
  return out;
}

}  // namespace instructcl
