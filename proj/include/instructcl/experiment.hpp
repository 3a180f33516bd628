// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "instructcl/corpus.hpp"
#include "instructcl/learner.hpp"
#include "instructcl/protocol.hpp"
#include "instructcl/scheduler.hpp"
#include "instructcl/synthetic.hpp"

namespace instructcl {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ExperimentConfig {
  // Exactly one corpus source.
  std::optional<std::filesystem::path> corpus_path;
  std::optional<std::filesystem::path> category_map;
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t synthetic_seed = 0;

  std::size_t k = 5;
  std::uint64_t master_seed = 0;
  std::size_t m = 10;
  std::vector<std::size_t> distances = {1, 10, 20, 30, 40};
  std::vector<Direction> directions = {Direction::forward, Direction::backward};
  std::vector<Strategy> strategies = {Strategy::instructionspeak, Strategy::seq_finetune, Strategy::multitask};
  LearnerSpec learner;
  HyperSet hypers;
  std::size_t eval_n = kDefaultEvalInstances;
  std::optional<std::uint64_t> eval_seed;
  std::size_t history_lag = 2;
  bool use_snapshots = true;
  std::filesystem::path output_dir = "results";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Canonical JSON text (sorted keys, two-space indent, trailing newline).
std::string config_to_json(const ExperimentConfig& config);
/// Missing keys take their defaults; unknown keys are errors (ConfigError).
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Problems that can be detected without loading the corpus.
std::vector<std::string> validate_config(const ExperimentConfig& config);

/// Loads (or generates) the corpus named by the config. Diagnostics for
/// skipped task files are appended to `diagnostics`.
Corpus load_experiment_corpus(const ExperimentConfig& config, std::vector<Diagnostic>* diagnostics = nullptr);

/// Seed of the S/U split for a master seed.
std::uint64_t split_seed(std::uint64_t master_seed);

struct RunSummary {
  std::filesystem::path dir;
  std::size_t cells_computed = 0;
  std::size_t cells_skipped = 0;
};

/// Relative directory of one (strategy, direction, distance) cell.
std::filesystem::path cell_dir(Strategy strategy, Direction direction, std::size_t distance);

/// split -> initialize -> transfer_gain for every (strategy, direction, i)
/// cell, then render_report. Cells whose result table already exists are
/// skipped, so an interrupted run resumes where it stopped. Throws
/// ConfigError for invalid configs (including a different config already
/// stored in the output directory).
RunSummary run_experiment(const ExperimentConfig& config, unsigned workers = 1, std::ostream* progress = nullptr);

struct SweepRow {
  std::size_t k = 0;
  Strategy strategy = Strategy::instructionspeak;
  std::size_t distance = 0;
  double mean = 0.0;
  double std = 0.0;
};

/// One forward-only run per k under `<output_dir>/k<k>`, plus
/// `<output_dir>/sweep_k.tsv`. Every k must be below the corpus size.
std::vector<SweepRow> sweep_k(const ExperimentConfig& config, std::span<const std::size_t> k_values,
                              unsigned workers = 1, std::ostream* progress = nullptr);

struct RenderedReport {
  std::string text;            // report.txt
  std::string tsv;             // report.tsv
  std::string categories_tsv;  // categories.tsv
};

/// Reads the config copy and every cell's result table under `result_dir`
/// and writes report.txt, report.tsv, categories.tsv and plot/*.tsv.
/// Throws std::runtime_error when a result table is missing.
RenderedReport render_report(const std::filesystem::path& result_dir);

/// Reads a line-delimited result table.
std::vector<GainRecord> read_gain_table(const std::filesystem::path& file);

}  // namespace instructcl
