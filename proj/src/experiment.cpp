// SPDX-License-Identifier: Apache-2.0
#include "instructcl/experiment.hpp"

#include <json.hpp>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace instructcl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json hyper_to_json(const Hyper& h) {
  return {{"learning_rate", h.learning_rate},
          {"epochs", h.epochs},
          {"batch_size", h.batch_size},
          {"max_input_tokens", h.max_input_tokens}};
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where,
                std::vector<std::string>& problems) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      problems.push_back(where + ": unknown key '" + it.key() + "'");
}

Hyper hyper_from_json(const json& j, Hyper h, const std::string& where, std::vector<std::string>& problems) {
  check_keys(j, {"learning_rate", "epochs", "batch_size", "max_input_tokens"}, where, problems);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.max_input_tokens = j.value("max_input_tokens", h.max_input_tokens);
  return h;
}

void write_atomically(const fs::path& file, const std::string& content) {
  fs::create_directories(file.parent_path());
  const auto tmp = fs::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Append-only top-level run log; the only place wall-clock time appears.
class ExperimentLog {
 public:
  explicit ExperimentLog(const fs::path& file) : out_(file, std::ios::binary | std::ios::app) {}

  void event(json j) {
    j["time"] = now();
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  static std::string now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::ofstream out_;
};

std::string hostname() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = "invalid experiment config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.corpus_path) {
    j["corpus"] = {{"path", c.corpus_path->string()},
                   {"category_map", c.category_map ? json(c.category_map->string()) : json(nullptr)}};
  } else {
    j["corpus"] = nullptr;
  }
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"num_tasks", s.num_tasks},
                      {"instances_per_task", s.instances_per_task},
                      {"overlap", s.overlap},
                      {"min_positive_examples", s.min_positive_examples},
                      {"negatives_per_task", s.negatives_per_task},
                      {"input_tokens", s.input_tokens},
                      {"output_tokens", s.output_tokens},
                      {"vocab_per_task", s.vocab_per_task}};
  } else {
    j["synthetic"] = nullptr;
  }
  j["synthetic_seed"] = c.synthetic_seed;
  j["k"] = c.k;
  j["master_seed"] = c.master_seed;
  j["m"] = c.m;
  j["distances"] = c.distances;
  j["directions"] = json::array();
  for (auto d : c.directions) j["directions"].push_back(to_string(d));
  j["strategies"] = json::array();
  for (auto s : c.strategies) j["strategies"].push_back(to_string(s));
  j["learner"] = {{"kind", to_string(c.learner.kind)},
                  {"window", c.learner.window},
                  {"bridge_command", c.learner.bridge_command}};
  j["hyper"] = {{"train", hyper_to_json(c.hypers.train)},
                {"continual", hyper_to_json(c.hypers.continual)},
                {"history", hyper_to_json(c.hypers.history)}};
  j["eval_n"] = c.eval_n;
  j["eval_seed"] = c.eval_seed ? json(*c.eval_seed) : json(nullptr);
  j["history_lag"] = c.history_lag;
  j["use_snapshots"] = c.use_snapshots;
  j["output_dir"] = c.output_dir.string();
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(std::string_view text) {
  std::vector<std::string> problems;
  ExperimentConfig c;
  try {
    const auto j = json::parse(text);
    if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
    check_keys(j,
               {"corpus", "synthetic", "synthetic_seed", "k", "master_seed", "m", "distances", "directions",
                "strategies", "learner", "hyper", "eval_n", "eval_seed", "history_lag", "use_snapshots",
                "output_dir"},
               "config", problems);

    if (const auto it = j.find("corpus"); it != j.end() && !it->is_null()) {
      if (it->is_string()) {
        c.corpus_path = it->get<std::string>();
      } else {
        check_keys(*it, {"path", "category_map"}, "corpus", problems);
        c.corpus_path = it->at("path").get<std::string>();
        if (const auto m = it->find("category_map"); m != it->end() && !m->is_null())
          c.category_map = m->get<std::string>();
      }
    }
    if (const auto it = j.find("synthetic"); it != j.end() && !it->is_null()) {
      check_keys(*it,
                 {"num_tasks", "instances_per_task", "overlap", "min_positive_examples", "negatives_per_task",
                  "input_tokens", "output_tokens", "vocab_per_task"},
                 "synthetic", problems);
      SyntheticSpec s;
      s.num_tasks = it->value("num_tasks", s.num_tasks);
      s.instances_per_task = it->value("instances_per_task", s.instances_per_task);
      s.overlap = it->value("overlap", s.overlap);
      s.min_positive_examples = it->value("min_positive_examples", s.min_positive_examples);
      s.negatives_per_task = it->value("negatives_per_task", s.negatives_per_task);
      s.input_tokens = it->value("input_tokens", s.input_tokens);
      s.output_tokens = it->value("output_tokens", s.output_tokens);
      s.vocab_per_task = it->value("vocab_per_task", s.vocab_per_task);
      c.synthetic = s;
    }
    c.synthetic_seed = j.value("synthetic_seed", c.synthetic_seed);
    c.k = j.value("k", c.k);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.m = j.value("m", c.m);
    c.distances = j.value("distances", c.distances);
    if (const auto it = j.find("directions"); it != j.end()) {
      c.directions.clear();
      for (const auto& d : *it) {
        const auto parsed = parse_direction(d.get<std::string>());
        if (!parsed) problems.push_back("unknown direction '" + d.get<std::string>() + "'");
        else c.directions.push_back(*parsed);
      }
    }
    if (const auto it = j.find("strategies"); it != j.end()) {
      c.strategies.clear();
      for (const auto& s : *it) {
        const auto parsed = parse_strategy(s.get<std::string>());
        if (!parsed) problems.push_back("unknown strategy '" + s.get<std::string>() + "'");
        else c.strategies.push_back(*parsed);
      }
    }
    if (const auto it = j.find("learner"); it != j.end()) {
      check_keys(*it, {"kind", "window", "bridge_command"}, "learner", problems);
      const auto kind = parse_learner_kind(it->value("kind", std::string(to_string(c.learner.kind))));
      if (!kind) problems.push_back("unknown learner kind '" + it->value("kind", "") + "'");
      else c.learner.kind = *kind;
      c.learner.window = it->value("window", c.learner.window);
      c.learner.bridge_command = it->value("bridge_command", c.learner.bridge_command);
    }
    if (const auto it = j.find("hyper"); it != j.end()) {
      check_keys(*it, {"train", "continual", "history"}, "hyper", problems);
      if (it->contains("train")) c.hypers.train = hyper_from_json(it->at("train"), c.hypers.train, "hyper.train", problems);
      if (it->contains("continual"))
        c.hypers.continual = hyper_from_json(it->at("continual"), c.hypers.continual, "hyper.continual", problems);
      if (it->contains("history"))
        c.hypers.history = hyper_from_json(it->at("history"), c.hypers.history, "hyper.history", problems);
    }
    c.eval_n = j.value("eval_n", c.eval_n);
    if (const auto it = j.find("eval_seed"); it != j.end() && !it->is_null()) c.eval_seed = it->get<std::uint64_t>();
    c.history_lag = j.value("history_lag", c.history_lag);
    c.use_snapshots = j.value("use_snapshots", c.use_snapshots);
    c.output_dir = j.value("output_dir", c.output_dir.string());
  } catch (const json::exception& e) {
    problems.push_back(std::string("config: ") + e.what());
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const std::runtime_error& e) {
    throw ConfigError({e.what()});
  }
  return config_from_json(text);
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  if (c.corpus_path.has_value() == c.synthetic.has_value())
    problems.push_back("exactly one of 'corpus' and 'synthetic' must be given");
  if (c.corpus_path && !fs::is_directory(*c.corpus_path))
    problems.push_back("corpus directory does not exist: " + c.corpus_path->string());
  if (c.category_map && !fs::is_regular_file(*c.category_map))
    problems.push_back("category map does not exist: " + c.category_map->string());
  if (c.synthetic && !(c.synthetic->overlap >= 0.0 && c.synthetic->overlap <= 1.0))
    problems.push_back("synthetic.overlap must lie in [0, 1]");
  if (c.k < 1) problems.push_back("k must be at least 1");
  if (c.m < 1) problems.push_back("m must be at least 1");
  for (auto d : c.distances)
    if (d < 1) problems.push_back("distances must be at least 1");
  if (std::set<std::size_t>(c.distances.begin(), c.distances.end()).size() != c.distances.size())
    problems.push_back("distances contain duplicates");
  if (c.directions.empty()) problems.push_back("no directions given");
  if (std::set<Direction>(c.directions.begin(), c.directions.end()).size() != c.directions.size())
    problems.push_back("directions contain duplicates");
  if (c.strategies.empty()) problems.push_back("no strategies given");
  if (std::set<Strategy>(c.strategies.begin(), c.strategies.end()).size() != c.strategies.size())
    problems.push_back("strategies contain duplicates");
  if (c.learner.kind == LearnerKind::windowed_memorizer && c.learner.window < 1)
    problems.push_back("learner.window must be at least 1");
  if (c.learner.kind == LearnerKind::external && c.learner.bridge_command.empty())
    problems.push_back("external learner needs learner.bridge_command");
  for (const auto& [name, h] : {std::pair{"train", c.hypers.train}, std::pair{"continual", c.hypers.continual},
                                std::pair{"history", c.hypers.history}}) {
    try {
      h.validate();
    } catch (const std::invalid_argument& e) {
      problems.push_back(std::string("hyper.") + name + ": " + e.what());
    }
  }
  if (c.eval_n < 1) problems.push_back("eval_n must be at least 1");
  if (c.history_lag < 1) problems.push_back("history_lag must be at least 1");
  return problems;
}

Corpus load_experiment_corpus(const ExperimentConfig& config, std::vector<Diagnostic>* diagnostics) {
  if (config.synthetic) return gen_synthetic_corpus(*config.synthetic, config.synthetic_seed);
  if (!config.corpus_path) throw ConfigError({"no corpus source"});
  std::optional<CategoryMap> map;
  if (config.category_map) map = load_category_map(*config.category_map);
  auto loaded = load_corpus(*config.corpus_path, map ? &*map : nullptr);
  if (diagnostics != nullptr)
    diagnostics->insert(diagnostics->end(), loaded.diagnostics.begin(), loaded.diagnostics.end());
  return std::move(loaded.corpus);
}

std::uint64_t split_seed(std::uint64_t master_seed) { return derive_seed(master_seed, "split"); }

fs::path cell_dir(Strategy strategy, Direction direction, std::size_t distance) {
  return fs::path("cells") / std::string(to_string(strategy)) / std::string(to_string(direction)) /
         ("i" + std::to_string(distance));
}

RunSummary run_experiment(const ExperimentConfig& config, unsigned workers, std::ostream* progress) {
  if (auto problems = validate_config(config); !problems.empty()) throw ConfigError(std::move(problems));

  std::vector<Diagnostic> diagnostics;
  const auto corpus = load_experiment_corpus(config, &diagnostics);
  {
    std::vector<std::string> problems;
    if (config.k >= corpus.tasks.size())
      problems.push_back("k = " + std::to_string(config.k) + " must be below the corpus size " +
                         std::to_string(corpus.tasks.size()));
    const auto unseen = corpus.tasks.size() > config.k ? corpus.tasks.size() - config.k : 0;
    for (auto d : config.distances)
      if (d + 1 > unseen)
        problems.push_back("distance " + std::to_string(d) + " needs at least " + std::to_string(d + 1) +
                           " unseen tasks, have " + std::to_string(unseen));
    if (!problems.empty()) throw ConfigError(std::move(problems));
  }

  const auto& out = config.output_dir;
  fs::create_directories(out);
  const auto config_text = config_to_json(config);
  const auto config_file = out / "config.json";
  if (fs::exists(config_file)) {
    if (read_file(config_file) != config_text)
      throw ConfigError({"output directory " + out.string() + " holds results of a different config"});
  } else {
    write_atomically(config_file, config_text);
  }

  ExperimentLog log(out / "run_log.jsonl");
  log.event({{"event", "started"}, {"host", hostname()}, {"workers", workers}});
  for (const auto& d : diagnostics) log.event({{"event", "corpus_diagnostic"}, {"subject", d.subject}, {"message", d.message}});

  const auto split = split_corpus(corpus, config.k, split_seed(config.master_seed));
  {
    json s;
    s["seed"] = split.seed;
    s["train"] = json::array();
    s["unseen"] = json::array();
    for (const auto& t : split.train_tasks) s["train"].push_back(t.task_id);
    for (const auto& t : split.unseen_tasks) s["unseen"].push_back(t.task_id);
    write_atomically(out / "split.json", s.dump(2) + "\n");
  }

  RunSummary summary;
  summary.dir = out;
  for (const auto strategy : config.strategies) {
    std::shared_ptr<Learner> initialized;
    for (const auto direction : config.directions) {
      for (const auto distance : config.distances) {
        const auto dir = out / cell_dir(strategy, direction, distance);
        const json cell{{"strategy", to_string(strategy)}, {"direction", to_string(direction)}, {"distance", distance}};
        if (fs::exists(dir / "results.jsonl")) {
          ++summary.cells_skipped;
          log.event({{"event", "cell_skipped"}, {"cell", cell}});
          continue;
        }
        if (!initialized) {
          RunLog init_log;
          initialized = make_learner(config.learner);
          initialize(split.train_tasks, *initialized, config.hypers.train, &init_log,
                     strategy == Strategy::instructionspeak);
          std::istringstream lines(init_log.to_jsonl(json{{"event", "initialize"}, {"strategy", to_string(strategy)}}.dump()));
          for (std::string line; std::getline(lines, line);) log.event(json::parse(line));
        }
        if (progress != nullptr) *progress << "running " << cell.dump() << std::endl;

        TransferConfig tc;
        tc.m = config.m;
        tc.distances = {distance};
        tc.direction = direction;
        tc.master_seed = config.master_seed;
        tc.eval_n = config.eval_n;
        tc.eval_seed = config.eval_seed;
        ChainSettings settings;
        settings.strategy = strategy;
        settings.hypers = config.hypers;
        settings.history_lag = config.history_lag;
        settings.use_snapshots = config.use_snapshots;

        const auto reports = transfer_gain(clone_provider(initialized), split.unseen_tasks, tc, settings, workers);
        const auto& report = reports.front();
        std::string table;
        for (const auto& r : report.records) table += to_json_line(r) + "\n";
        write_atomically(dir / "run_log.jsonl", report.run_log);
        write_atomically(dir / "results.jsonl", table);
        ++summary.cells_computed;
        log.event({{"event", "cell_computed"},
                   {"cell", cell},
                   {"tasks_covered", report.tasks_covered},
                   {"tasks_total", report.tasks_total}});
      }
    }
  }
  render_report(out);
  log.event({{"event", "finished"}, {"cells_computed", summary.cells_computed}, {"cells_skipped", summary.cells_skipped}});
  return summary;
}

std::vector<SweepRow> sweep_k(const ExperimentConfig& config, std::span<const std::size_t> k_values,
                              unsigned workers, std::ostream* progress) {
  if (auto problems = validate_config(config); !problems.empty()) throw ConfigError(std::move(problems));
  const auto corpus_size = load_experiment_corpus(config).tasks.size();
  for (auto k : k_values)
    if (k < 1 || k >= corpus_size)
      throw std::invalid_argument("sweep_k: k = " + std::to_string(k) + " outside [1, " +
                                  std::to_string(corpus_size - 1) + "]");

  std::vector<SweepRow> rows;
  for (auto k : k_values) {
    auto cfg = config;
    cfg.k = k;
    cfg.directions = {Direction::forward};
    cfg.output_dir = config.output_dir / ("k" + std::to_string(k));
    run_experiment(cfg, workers, progress);
    for (auto strategy : cfg.strategies)
      for (auto distance : cfg.distances) {
        const auto report = aggregate(strategy, Direction::forward, distance,
                                      read_gain_table(cfg.output_dir / cell_dir(strategy, Direction::forward, distance) /
                                                      "results.jsonl"));
        rows.push_back({k, strategy, distance, report.mean, report.std});
      }
  }
  std::string tsv = "k\tstrategy\tdistance\tmean\tstd\n";
  for (const auto& r : rows)
    tsv += std::to_string(r.k) + "\t" + std::string(to_string(r.strategy)) + "\t" + std::to_string(r.distance) +
           "\t" + fmt("%.6f", r.mean) + "\t" + fmt("%.6f", r.std) + "\n";
  write_atomically(config.output_dir / "sweep_k.tsv", tsv);
  return rows;
}

std::vector<GainRecord> read_gain_table(const fs::path& file) {
  if (!fs::exists(file)) throw std::runtime_error("missing result table " + file.string());
  std::ifstream in(file, std::ios::binary);
  std::vector<GainRecord> records;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) records.push_back(gain_record_from_json_line(line));
  return records;
}

RenderedReport render_report(const fs::path& result_dir) {
  const auto config_file = result_dir / "config.json";
  if (!fs::exists(config_file)) throw std::runtime_error("missing " + config_file.string());
  const auto config = load_config(config_file);

  RenderedReport r;
  r.tsv = "strategy\tdirection\tdistance\tmean\tstd\ttasks_covered\ttasks_total\tmean_rep_std\n";
  r.categories_tsv = "strategy\tdirection\tdistance\tcategory\tmean\ttasks\n";

  // Text grid: one row per strategy, one column per (direction, distance).
  std::vector<std::string> headers = {"strategy"};
  for (auto d : config.directions)
    for (auto i : config.distances) headers.push_back(std::string(to_string(d)) + " i=" + std::to_string(i));
  std::vector<std::vector<std::string>> grid;

  std::map<std::string, std::string> plots;
  for (auto strategy : config.strategies) {
    std::vector<std::string> row = {std::string(to_string(strategy))};
    for (auto direction : config.directions) {
      auto& plot = plots[std::string(to_string(strategy)) + "_" + std::string(to_string(direction))];
      if (plot.empty()) plot = "distance\tmean\tstd\n";
      for (auto distance : config.distances) {
        const auto report = aggregate(
            strategy, direction, distance,
            read_gain_table(result_dir / cell_dir(strategy, direction, distance) / "results.jsonl"));
        double rep_std = 0.0;
        for (const auto& t : report.per_task) rep_std += t.rep_std;
        if (!report.per_task.empty()) rep_std /= static_cast<double>(report.per_task.size());

        const auto prefix = std::string(to_string(strategy)) + "\t" + std::string(to_string(direction)) + "\t" +
                            std::to_string(distance) + "\t";
        r.tsv += prefix + fmt("%.6f", report.mean) + "\t" + fmt("%.6f", report.std) + "\t" +
                 std::to_string(report.tasks_covered) + "\t" + std::to_string(report.tasks_total) + "\t" +
                 fmt("%.6f", rep_std) + "\n";
        for (const auto& [c, mean] : report.per_category) {
          std::size_t n = 0;
          for (const auto& t : report.per_task) n += t.category == c;
          r.categories_tsv += prefix + std::string(to_string(c)) + "\t" + fmt("%.6f", mean) + "\t" +
                              std::to_string(n) + "\n";
        }
        plot += std::to_string(distance) + "\t" + fmt("%.6f", report.mean) + "\t" + fmt("%.6f", report.std) + "\n";

        auto cell = report.tasks_covered == 0 ? std::string("n/a")
                                               : fmt("%.2f", report.mean) + " ± " + fmt("%.2f", report.std);
        if (!report.complete()) cell += " *";
        row.push_back(std::move(cell));
      }
    }
    grid.push_back(std::move(row));
  }

  // Column widths count code points so the ± sign aligns.
  const auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  std::vector<std::size_t> widths(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    widths[c] = width(headers[c]);
    for (const auto& row : grid) widths[c] = std::max(widths[c], width(row[c]));
  }
  const auto emit_row = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      line += cells[c];
      if (c + 1 < cells.size()) line += std::string(widths[c] - width(cells[c]) + 2, ' ');
    }
    return line + "\n";
  };
  r.text = "# transfer gain g_i, mean ± std across tasks (ROUGE-L points; * = partial coverage)\n";
  r.text += emit_row(headers);
  for (const auto& row : grid) r.text += emit_row(row);

  write_atomically(result_dir / "report.txt", r.text);
  write_atomically(result_dir / "report.tsv", r.tsv);
  write_atomically(result_dir / "categories.tsv", r.categories_tsv);
  for (const auto& [name, content] : plots) write_atomically(result_dir / "plot" / (name + ".tsv"), content);
  return r;
}

}  // namespace instructcl
