// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace instructcl {

/// The six task categories of the instruction benchmark.
enum class Category { QG, AG, CF, IAG, MM, VF };

inline constexpr std::array<Category, 6> kAllCategories = {
    Category::QG, Category::AG, Category::CF, Category::IAG, Category::MM, Category::VF};

std::string_view to_string(Category c);
/// Accepts the short codes (case-insensitive) and the long names, e.g.
/// "question generation".
std::optional<Category> parse_category(std::string_view text);

enum class Polarity { positive, negative };

struct InstructionExample {
  std::string input;
  std::string output;
  std::optional<std::string> explanation;
  Polarity polarity = Polarity::positive;

  bool operator==(const InstructionExample&) const = default;
};

struct Instruction {
  std::string title;
  std::string definition;
  std::optional<std::string> prompt;
  std::optional<std::string> things_to_avoid;
  std::optional<std::string> caution;
  std::vector<InstructionExample> examples;

  std::vector<InstructionExample> positives() const;
  std::vector<InstructionExample> negatives() const;

  bool operator==(const Instruction&) const = default;
};

/// A labeled instance; multiple gold outputs are kept as references.
struct Instance {
  std::string input;
  std::vector<std::string> gold_outputs;

  bool operator==(const Instance&) const = default;
};

struct TaskSpec {
  std::string task_id;
  Category category = Category::QG;
  Instruction instruction;
  std::vector<Instance> instances;
  /// Unrecognized top-level keys of the source file, serialized as JSON text.
  std::map<std::string, std::string> extra_fields;

  bool operator==(const TaskSpec&) const = default;
};

struct Corpus {
  std::vector<TaskSpec> tasks;
  std::string source_note;

  const TaskSpec* find(std::string_view task_id) const;

  bool operator==(const Corpus&) const = default;
};

struct Diagnostic {
  std::string subject;  // task id or file name
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

struct LoadResult {
  Corpus corpus;
  std::vector<Diagnostic> diagnostics;
};

struct SplitResult {
  std::vector<TaskSpec> train_tasks;   // S, in corpus order
  std::vector<TaskSpec> unseen_tasks;  // U, in corpus order
  std::uint64_t seed = 0;
};

using CategoryMap = std::map<std::string, Category, std::less<>>;

/// Raised for failures that abort a whole load (unreadable directory,
/// unreadable mapping file).
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s);

/// One diagnostic per violated invariant; empty iff the task is well formed.
std::vector<Diagnostic> validate_task(const TaskSpec& task);

/// Loads every `*.json` task file under `root` (non-recursive, sorted by
/// name). Malformed files are skipped and reported in `diagnostics`.
LoadResult load_corpus(const std::filesystem::path& root, const CategoryMap* category_map = nullptr);

/// Reads a JSON object mapping task id to category code.
CategoryMap load_category_map(const std::filesystem::path& file);

/// Writes one canonical task file per task into `dir` (created if needed).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Serializes one task with canonical key spellings.
std::string task_to_json_text(const TaskSpec& task);

/// Parses one task document. Returns nullopt and appends diagnostics when the
/// document is malformed.
std::optional<TaskSpec> parse_task_document(std::string_view text, std::string task_id,
                                            const CategoryMap* category_map,
                                            std::vector<Diagnostic>& diagnostics);

/// Uniform random k-subset as S; the remainder, in corpus order, as U.
SplitResult split_corpus(const Corpus& corpus, std::size_t k, std::uint64_t seed);

inline constexpr std::size_t kDefaultEvalInstances = 1000;

/// min(n, |instances|) instances drawn without replacement, returned in
/// their original order.
std::vector<Instance> sample_eval_instances(const TaskSpec& task, std::size_t n, std::uint64_t seed);

}  // namespace instructcl
