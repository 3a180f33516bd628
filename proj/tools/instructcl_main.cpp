// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "instructcl/corpus.hpp"
#include "instructcl/experiment.hpp"
#include "instructcl/fixed_split.hpp"
#include "instructcl/learner.hpp"
#include "instructcl/synthetic.hpp"

namespace {

using namespace instructcl;
using nlohmann::json;
namespace fs = std::filesystem;

unsigned default_workers() {
  if (const char* env = std::getenv("INSTRUCTCL_WORKERS")) {
    try {
      const auto n = std::stoul(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring INSTRUCTCL_WORKERS=" << env << "\n";
  }
  return 1;
}

// Raw flag values; only flags that were actually given override the config.
struct ConfigFlags {
  std::string config_file;
  std::string corpus;
  std::string category_map;
  bool synthetic = false;
  SyntheticSpec spec;
  std::uint64_t synthetic_seed = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t m = 0;
  std::vector<std::size_t> distances;
  std::vector<std::string> directions;
  std::vector<std::string> strategies;
  std::string learner;
  std::size_t window = 0;
  std::string bridge;
  double lr = 0, history_lr = 0;
  int epochs = 0, history_epochs = 0, train_batch = 0, continual_batch = 0, max_tokens = 0;
  std::size_t eval_n = 0;
  std::uint64_t eval_seed = 0;
  std::size_t history_lag = 0;
  bool no_snapshots = false;
  std::string out;

  std::vector<CLI::Option*> opts;
  CLI::Option* find(const std::string& name) const {
    for (auto* o : opts)
      if (o->check_lname(name.substr(2))) return o;
    return nullptr;
  }
  bool given(const std::string& name) const {
    const auto* o = find(name);
    return o != nullptr && o->count() > 0;
  }
};

void add_spec_flags(CLI::App* app, SyntheticSpec& spec) {
  app->add_option("--num-tasks", spec.num_tasks, "synthetic: number of tasks");
  app->add_option("--instances", spec.instances_per_task, "synthetic: labeled instances per task");
  app->add_option("--overlap", spec.overlap, "synthetic: share p of instances covered by positive examples")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--min-positives", spec.min_positive_examples, "synthetic: minimum positive examples");
  app->add_option("--negatives", spec.negatives_per_task, "synthetic: negative examples per task");
  app->add_option("--vocab", spec.vocab_per_task, "synthetic: vocabulary size per task");
}

void add_config_flags(CLI::App* app, ConfigFlags& f, bool with_output) {
  auto& o = f.opts;
  o.push_back(app->add_option("--config", f.config_file, "experiment config file (JSON)"));
  o.push_back(app->add_option("--corpus", f.corpus, "task corpus directory"));
  o.push_back(app->add_option("--category-map", f.category_map, "task id -> category file"));
  o.push_back(app->add_flag("--synthetic", f.synthetic, "use the synthetic corpus"));
  add_spec_flags(app, f.spec);
  o.push_back(app->add_option("--synthetic-seed", f.synthetic_seed, "synthetic corpus seed"));
  o.push_back(app->add_option("--k", f.k, "number of training tasks"));
  o.push_back(app->add_option("--seed", f.seed, "master seed"));
  o.push_back(app->add_option("--m", f.m, "chains per probe task"));
  o.push_back(app->add_option("--distances", f.distances, "transfer distances")->delimiter(','));
  o.push_back(app->add_option("--directions", f.directions, "forward,backward")->delimiter(','));
  o.push_back(app->add_option("--strategies", f.strategies, "instructionspeak,seq_finetune,multitask")
                  ->delimiter(','));
  o.push_back(app->add_option("--learner", f.learner, "perfect_memorizer|windowed_memorizer|echo|external"));
  o.push_back(app->add_option("--window", f.window, "windowed_memorizer capacity"));
  o.push_back(app->add_option("--bridge", f.bridge, "external worker command"));
  o.push_back(app->add_option("--lr", f.lr, "learning rate (training and continual)"));
  o.push_back(app->add_option("--epochs", f.epochs, "epochs (training and continual)"));
  o.push_back(app->add_option("--train-batch", f.train_batch, "batch size on training tasks"));
  o.push_back(app->add_option("--continual-batch", f.continual_batch, "batch size during continual learning"));
  o.push_back(app->add_option("--history-lr", f.history_lr, "history replay learning rate"));
  o.push_back(app->add_option("--history-epochs", f.history_epochs, "history replay epochs"));
  o.push_back(app->add_option("--max-tokens", f.max_tokens, "max input tokens"));
  o.push_back(app->add_option("--eval-n", f.eval_n, "evaluation instances per task"));
  o.push_back(app->add_option("--eval-seed", f.eval_seed, "evaluation sampling seed"));
  o.push_back(app->add_option("--history-lag", f.history_lag, "1 replays up to the previous task, 2 skips it"));
  o.push_back(app->add_flag("--no-snapshots", f.no_snapshots, "evolve forward branches independently"));
  if (with_output) o.push_back(app->add_option("--out", f.out, "output directory"));
  for (const auto* name : {"--num-tasks", "--instances", "--overlap", "--min-positives", "--negatives", "--vocab"})
    o.push_back(app->get_option(name));
}

ExperimentConfig build_config(const ConfigFlags& f) {
  ExperimentConfig c;
  if (!f.config_file.empty()) c = load_config(f.config_file);
  std::vector<std::string> problems;

  if (f.given("--corpus")) {
    c.corpus_path = f.corpus;
    c.synthetic.reset();
  }
  if (f.given("--category-map")) c.category_map = f.category_map;
  bool spec_flag = false;
  for (const auto* n : {"--num-tasks", "--instances", "--overlap", "--min-positives", "--negatives", "--vocab"})
    spec_flag = spec_flag || f.given(n);
  if (f.synthetic || spec_flag) {
    auto spec = c.synthetic.value_or(SyntheticSpec{});
    if (f.given("--num-tasks")) spec.num_tasks = f.spec.num_tasks;
    if (f.given("--instances")) spec.instances_per_task = f.spec.instances_per_task;
    if (f.given("--overlap")) spec.overlap = f.spec.overlap;
    if (f.given("--min-positives")) spec.min_positive_examples = f.spec.min_positive_examples;
    if (f.given("--negatives")) spec.negatives_per_task = f.spec.negatives_per_task;
    if (f.given("--vocab")) spec.vocab_per_task = f.spec.vocab_per_task;
    c.synthetic = spec;
    c.corpus_path.reset();
    c.category_map.reset();
  }
  if (f.given("--synthetic-seed")) c.synthetic_seed = f.synthetic_seed;
  if (f.given("--k")) c.k = f.k;
  if (f.given("--seed")) c.master_seed = f.seed;
  if (f.given("--m")) c.m = f.m;
  if (f.given("--distances")) c.distances = f.distances;
  if (f.given("--directions")) {
    c.directions.clear();
    for (const auto& d : f.directions) {
      if (auto p = parse_direction(d)) c.directions.push_back(*p);
      else problems.push_back("unknown direction '" + d + "'");
    }
  }
  if (f.given("--strategies")) {
    c.strategies.clear();
    for (const auto& s : f.strategies) {
      if (auto p = parse_strategy(s)) c.strategies.push_back(*p);
      else problems.push_back("unknown strategy '" + s + "'");
    }
  }
  if (f.given("--learner")) {
    if (auto p = parse_learner_kind(f.learner)) c.learner.kind = *p;
    else problems.push_back("unknown learner '" + f.learner + "'");
  }
  if (f.given("--window")) c.learner.window = f.window;
  if (f.given("--bridge")) {
    c.learner.bridge_command = f.bridge;
    if (!f.given("--learner")) c.learner.kind = LearnerKind::external;
  }
  if (f.given("--lr")) c.hypers.train.learning_rate = c.hypers.continual.learning_rate = f.lr;
  if (f.given("--epochs")) c.hypers.train.epochs = c.hypers.continual.epochs = f.epochs;
  if (f.given("--train-batch")) c.hypers.train.batch_size = f.train_batch;
  if (f.given("--continual-batch")) c.hypers.continual.batch_size = c.hypers.history.batch_size = f.continual_batch;
  if (f.given("--history-lr")) c.hypers.history.learning_rate = f.history_lr;
  if (f.given("--history-epochs")) c.hypers.history.epochs = f.history_epochs;
  if (f.given("--max-tokens"))
    c.hypers.train.max_input_tokens = c.hypers.continual.max_input_tokens = c.hypers.history.max_input_tokens =
        f.max_tokens;
  if (f.given("--eval-n")) c.eval_n = f.eval_n;
  if (f.given("--eval-seed")) c.eval_seed = f.eval_seed;
  if (f.given("--history-lag")) c.history_lag = f.history_lag;
  if (f.no_snapshots) c.use_snapshots = false;
  if (f.given("--out")) c.output_dir = f.out;

  if (!problems.empty()) throw ConfigError(std::move(problems));
  if (auto more = validate_config(c); !more.empty()) throw ConfigError(std::move(more));
  return c;
}

void print_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) std::cerr << d.subject << ": " << d.message << "\n";
}

ChainSettings chain_settings(const ExperimentConfig& c, Strategy strategy) {
  ChainSettings s;
  s.strategy = strategy;
  s.hypers = c.hypers;
  s.history_lag = c.history_lag;
  s.use_snapshots = c.use_snapshots;
  return s;
}

std::vector<std::string> read_id_list(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file);
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);)
    if (auto t = trim(line); !t.empty() && t.front() != '#') ids.push_back(std::move(t));
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual instruction-learning transfer harness"};
  app.require_subcommand(1);

  unsigned workers = default_workers();

  // split
  ConfigFlags split_flags;
  auto* split_cmd = app.add_subcommand("split", "print the training/unseen split as JSON");
  add_config_flags(split_cmd, split_flags, false);

  // run
  ConfigFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run every (strategy, direction, distance) cell and render the report");
  add_config_flags(run_cmd, run_flags, true);
  run_cmd->add_option("--workers", workers, "worker threads (default: INSTRUCTCL_WORKERS or 1)");

  // sweep-k
  ConfigFlags sweep_flags;
  std::vector<std::size_t> k_values = {1, 5, 10, 20};
  auto* sweep_cmd = app.add_subcommand("sweep-k", "forward transfer for several training set sizes");
  add_config_flags(sweep_cmd, sweep_flags, true);
  sweep_cmd->add_option("--k-values", k_values, "training set sizes")->delimiter(',');
  sweep_cmd->add_option("--workers", workers, "worker threads");

  // report
  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "re-render reports from a result directory");
  report_cmd->add_option("dir", report_dir, "result directory")->required();

  // fixed-split
  ConfigFlags fixed_flags;
  std::string test_file;
  std::string mode_text = "forward_sixth";
  std::size_t reps = 10;
  auto* fixed_cmd = app.add_subcommand("fixed-split", "category-block evaluation on a fixed test split");
  add_config_flags(fixed_cmd, fixed_flags, false);
  fixed_cmd->add_option("--test-tasks", test_file, "file with one test task id per line")->required();
  fixed_cmd->add_option("--mode", mode_text, "forward_sixth|backward_first");
  fixed_cmd->add_option("--reps", reps, "random block orders per category");

  // gen-synthetic
  SyntheticSpec gen_spec;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a synthetic task corpus");
  add_spec_flags(gen_cmd, gen_spec);
  gen_cmd->add_option("--seed", gen_seed, "corpus seed");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  // validate
  std::string validate_corpus;
  std::string validate_map;
  std::string validate_config_file;
  auto* validate_cmd = app.add_subcommand("validate", "check a task corpus or an experiment config");
  validate_cmd->add_option("--corpus", validate_corpus, "task corpus directory");
  validate_cmd->add_option("--category-map", validate_map, "task id -> category file");
  validate_cmd->add_option("--config", validate_config_file, "experiment config file");

  // conformance
  std::string conf_learner = "perfect_memorizer";
  std::size_t conf_window = 2;
  std::string conf_bridge;
  auto* conf_cmd = app.add_subcommand("conformance", "run the learner contract checks");
  conf_cmd->add_option("--learner", conf_learner, "learner kind");
  conf_cmd->add_option("--window", conf_window, "windowed_memorizer capacity");
  conf_cmd->add_option("--bridge", conf_bridge, "external worker command");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split_cmd) {
      const auto config = build_config(split_flags);
      std::vector<Diagnostic> diagnostics;
      const auto corpus = load_experiment_corpus(config, &diagnostics);
      print_diagnostics(diagnostics);
      const auto split = split_corpus(corpus, config.k, split_seed(config.master_seed));
      json out{{"seed", split.seed}, {"train", json::array()}, {"unseen", json::array()}};
      for (const auto& t : split.train_tasks) out["train"].push_back(t.task_id);
      for (const auto& t : split.unseen_tasks) out["unseen"].push_back(t.task_id);
      std::cout << out.dump(2) << "\n";
    } else if (*run_cmd) {
      const auto config = build_config(run_flags);
      const auto summary = run_experiment(config, workers, &std::cerr);
      std::cerr << "computed " << summary.cells_computed << " cells, skipped " << summary.cells_skipped << "\n";
      std::cout << render_report(summary.dir).text;
    } else if (*sweep_cmd) {
      const auto config = build_config(sweep_flags);
      sweep_k(config, k_values, workers, &std::cerr);
      std::ifstream in(config.output_dir / "sweep_k.tsv");
      std::cout << in.rdbuf();
    } else if (*report_cmd) {
      std::cout << render_report(report_dir).text;
    } else if (*fixed_cmd) {
      const auto config = build_config(fixed_flags);
      const auto mode = parse_fixed_split_mode(mode_text);
      if (!mode) throw std::invalid_argument("unknown mode '" + mode_text + "'");
      std::vector<Diagnostic> diagnostics;
      const auto corpus = load_experiment_corpus(config, &diagnostics);
      print_diagnostics(diagnostics);
      const auto test_ids = read_id_list(test_file);
      const auto learner = config.learner;
      const ModelProvider fresh = [learner] { return make_learner(learner); };
      std::cout << "strategy\tcategory\tmean\tno_cl\n";
      for (auto strategy : config.strategies) {
        if (strategy == Strategy::multitask) {
          std::cerr << "fixed-split: skipping multitask\n";
          continue;
        }
        FixedSplitSettings settings;
        settings.chain = chain_settings(config, strategy);
        settings.eval_n = config.eval_n;
        settings.eval_seed = config.eval_seed.value_or(config.master_seed);
        const auto report = fixed_split_eval(corpus, test_ids, *mode, reps, config.master_seed, fresh, settings);
        for (const auto& r : report.categories)
          std::cout << to_string(strategy) << "\t" << to_string(r.category) << "\t" << r.mean << "\t" << r.no_cl
                    << "\n";
      }
    } else if (*gen_cmd) {
      const auto corpus = gen_synthetic_corpus(gen_spec, gen_seed);
      write_corpus(corpus, gen_out);
      std::cerr << "wrote " << corpus.tasks.size() << " tasks to " << gen_out << "\n";
    } else if (*validate_cmd) {
      if (validate_corpus.empty() == validate_config_file.empty())
        throw std::invalid_argument("validate: give exactly one of --corpus and --config");
      if (!validate_config_file.empty()) {
        const auto config = load_config(validate_config_file);
        const auto problems = validate_config(config);
        for (const auto& p : problems) std::cerr << p << "\n";
        if (!problems.empty()) return 1;
        std::cout << "config ok\n";
      } else {
        std::optional<CategoryMap> map;
        if (!validate_map.empty()) map = load_category_map(validate_map);
        const auto loaded = load_corpus(validate_corpus, map ? &*map : nullptr);
        print_diagnostics(loaded.diagnostics);
        std::cout << loaded.corpus.tasks.size() << " tasks loaded, " << loaded.diagnostics.size()
                  << " diagnostics\n";
        if (!loaded.diagnostics.empty()) return 1;
      }
    } else if (*conf_cmd) {
      LearnerSpec spec;
      const auto kind = parse_learner_kind(conf_learner);
      if (!kind) throw std::invalid_argument("unknown learner '" + conf_learner + "'");
      spec.kind = *kind;
      spec.window = conf_window;
      spec.bridge_command = conf_bridge;
      if (!conf_bridge.empty()) spec.kind = LearnerKind::external;
      auto learner = make_learner(spec);
      const auto report = conformance_suite(*learner);
      for (const auto& c : report.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
      return report.passed() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
