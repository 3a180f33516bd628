// SPDX-License-Identifier: Apache-2.0
// Task-file parsing and canonical serialization. The accepted key spellings
// are listed in docs/task_format.md.
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "instructcl/corpus.hpp"

namespace instructcl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

enum class Field { title, definition, prompt, avoid, caution, examples, instances, category };

std::string canonical_name(Field f) {
  switch (f) {
    case Field::title: return "Title";
    case Field::definition: return "Definition";
    case Field::prompt: return "Prompt";
    case Field::avoid: return "Things to Avoid";
    case Field::caution: return "Emphasis & Caution";
    case Field::examples: return "Examples";
    case Field::instances: return "Instances";
    case Field::category: return "Category";
  }
  return {};
}

// Lowercase, collapse inner whitespace, drop a trailing colon.
std::string alias_key(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(raw)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (!out.empty() && out.back() == ':') out.pop_back();
  return out;
}

std::optional<Field> lookup_field(std::string_view key) {
  static const std::map<std::string, Field, std::less<>> kAliases = {
      {"title", Field::title},
      {"definition", Field::definition},
      {"definitions", Field::definition},
      {"prompt", Field::prompt},
      {"things to avoid", Field::avoid},
      {"things to be avoided", Field::avoid},
      {"avoid", Field::avoid},
      {"emphasis & caution", Field::caution},
      {"emphasis and caution", Field::caution},
      {"emphasis&caution", Field::caution},
      {"caution", Field::caution},
      {"emphasis", Field::caution},
      {"examples", Field::examples},
      {"instances", Field::instances},
      {"category", Field::category},
      {"task category", Field::category},
  };
  const auto it = kAliases.find(alias_key(key));
  if (it == kAliases.end()) return std::nullopt;
  return it->second;
}

enum class ExampleList { positive, negative };

std::optional<ExampleList> lookup_example_list(std::string_view key) {
  const auto k = alias_key(key);
  if (k == "positive examples" || k == "positive" || k == "positives") return ExampleList::positive;
  if (k == "negative examples" || k == "negative" || k == "negatives") return ExampleList::negative;
  return std::nullopt;
}

class ParseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A text field may be a string or a list of strings (joined by single spaces).
std::string read_text(const json& v, const std::string& what) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& part : v) {
      if (!part.is_string()) throw ParseFailure(what + ": expected text");
      if (!out.empty()) out.push_back(' ');
      out += part.get<std::string>();
    }
    return out;
  }
  throw ParseFailure(what + ": expected text");
}

const json* find_member(const json& obj, std::initializer_list<std::string_view> names) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const auto k = alias_key(it.key());
    for (auto n : names)
      if (k == n) return &it.value();
  }
  return nullptr;
}

InstructionExample read_example(const json& v, Polarity polarity, const std::string& what) {
  if (!v.is_object()) throw ParseFailure(what + ": expected an object");
  InstructionExample e;
  e.polarity = polarity;
  const auto* in = find_member(v, {"input"});
  const auto* out = find_member(v, {"output", "outputs"});
  if (in == nullptr) throw ParseFailure(what + ": missing required field 'input'");
  if (out == nullptr) throw ParseFailure(what + ": missing required field 'output'");
  e.input = read_text(*in, what + " input");
  e.output = read_text(*out, what + " output");
  if (const auto* ex = find_member(v, {"explanation", "reason"}); ex != nullptr && !ex->is_null())
    e.explanation = read_text(*ex, what + " explanation");
  return e;
}

Instance read_instance(const json& v, const std::string& what) {
  if (!v.is_object()) throw ParseFailure(what + ": expected an object");
  Instance inst;
  const auto* in = find_member(v, {"input"});
  const auto* out = find_member(v, {"output", "outputs"});
  if (in == nullptr) throw ParseFailure(what + ": missing required field 'input'");
  if (out == nullptr) throw ParseFailure(what + ": missing required field 'output'");
  inst.input = read_text(*in, what + " input");
  if (out->is_array()) {
    for (const auto& g : *out) {
      if (!g.is_string()) throw ParseFailure(what + " output: expected text");
      inst.gold_outputs.push_back(g.get<std::string>());
    }
  } else {
    inst.gold_outputs.push_back(read_text(*out, what + " output"));
  }
  return inst;
}

TaskSpec parse_task_json(const json& doc, std::string task_id, const CategoryMap* category_map) {
  if (!doc.is_object()) throw ParseFailure("task document must be an object");

  std::map<Field, std::pair<std::string, const json*>> fields;
  TaskSpec task;
  task.task_id = std::move(task_id);

  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto f = lookup_field(it.key());
    if (!f) {
      task.extra_fields[it.key()] = it.value().dump();
      continue;
    }
    auto [pos, inserted] = fields.emplace(*f, std::make_pair(it.key(), &it.value()));
    if (!inserted)
      throw ParseFailure("duplicate field '" + canonical_name(*f) + "' (given as '" + pos->second.first +
                         "' and '" + it.key() + "')");
  }

  auto required = [&](Field f) -> const json& {
    const auto it = fields.find(f);
    if (it == fields.end()) throw ParseFailure("missing required field '" + canonical_name(f) + "'");
    return *it->second.second;
  };
  auto optional_text = [&](Field f) -> std::optional<std::string> {
    const auto it = fields.find(f);
    if (it == fields.end() || it->second.second->is_null()) return std::nullopt;
    return read_text(*it->second.second, canonical_name(f));
  };

  task.instruction.title = read_text(required(Field::title), "Title");
  task.instruction.definition = read_text(required(Field::definition), "Definition");
  task.instruction.prompt = optional_text(Field::prompt);
  task.instruction.things_to_avoid = optional_text(Field::avoid);
  task.instruction.caution = optional_text(Field::caution);

  if (const auto it = fields.find(Field::examples); it != fields.end()) {
    const json& ex = *it->second.second;
    if (!ex.is_object()) throw ParseFailure("Examples: expected an object");
    std::vector<InstructionExample> pos, neg;
    for (auto e = ex.begin(); e != ex.end(); ++e) {
      const auto which = lookup_example_list(e.key());
      if (!which) continue;
      if (!e.value().is_array()) throw ParseFailure("Examples/" + e.key() + ": expected a list");
      const auto polarity = *which == ExampleList::positive ? Polarity::positive : Polarity::negative;
      auto& dest = polarity == Polarity::positive ? pos : neg;
      for (std::size_t i = 0; i < e.value().size(); ++i)
        dest.push_back(read_example(e.value()[i], polarity, e.key() + " #" + std::to_string(i + 1)));
    }
    task.instruction.examples = std::move(pos);
    task.instruction.examples.insert(task.instruction.examples.end(), neg.begin(), neg.end());
  }

  const json& instances = required(Field::instances);
  if (!instances.is_array()) throw ParseFailure("Instances: expected a list");
  for (std::size_t i = 0; i < instances.size(); ++i)
    task.instances.push_back(read_instance(instances[i], "instance #" + std::to_string(i + 1)));

  std::optional<Category> category;
  if (const auto c = optional_text(Field::category)) {
    category = parse_category(*c);
    if (!category) throw ParseFailure("unknown category '" + *c + "'");
  } else if (category_map != nullptr) {
    if (const auto it = category_map->find(task.task_id); it != category_map->end()) category = it->second;
  }
  if (!category) throw ParseFailure("missing category (no 'Category' field and no mapping entry)");
  task.category = *category;
  return task;
}

ordered_json example_to_json(const InstructionExample& e) {
  ordered_json j;
  j["input"] = e.input;
  j["output"] = e.output;
  if (e.explanation) j["explanation"] = *e.explanation;
  return j;
}

}  // namespace

std::optional<TaskSpec> parse_task_document(std::string_view text, std::string task_id,
                                            const CategoryMap* category_map,
                                            std::vector<Diagnostic>& diagnostics) {
  const std::string subject = task_id;
  try {
    auto doc = json::parse(text);
    auto task = parse_task_json(doc, std::move(task_id), category_map);
    auto problems = validate_task(task);
    if (!problems.empty()) {
      diagnostics.insert(diagnostics.end(), problems.begin(), problems.end());
      return std::nullopt;
    }
    return task;
  } catch (const json::exception& e) {
    diagnostics.push_back({subject, std::string("parse error: ") + e.what()});
  } catch (const ParseFailure& e) {
    diagnostics.push_back({subject, e.what()});
  }
  return std::nullopt;
}

LoadResult load_corpus(const std::filesystem::path& root, const CategoryMap* category_map) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw CorpusError("corpus directory not readable: " + root.string());

  std::vector<fs::path> files;
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec))
    if (it->is_regular_file() && it->path().extension() == ".json") files.push_back(it->path());
  if (ec) throw CorpusError("cannot list corpus directory " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  LoadResult result;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      result.diagnostics.push_back({file.filename().string(), "cannot read file"});
      continue;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    if (auto task = parse_task_document(buf.str(), file.stem().string(), category_map, result.diagnostics))
      result.corpus.tasks.push_back(std::move(*task));
  }
  result.corpus.source_note = root.string();
  return result;
}

CategoryMap load_category_map(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw CorpusError("cannot read category map " + file.string());
  CategoryMap out;
  try {
    const auto doc = json::parse(in);
    if (!doc.is_object()) throw CorpusError("category map must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const auto c = it.value().is_string() ? parse_category(it.value().get<std::string>()) : std::nullopt;
      if (!c) throw CorpusError("category map: bad category for '" + it.key() + "'");
      out.emplace(it.key(), *c);
    }
  } catch (const json::exception& e) {
    throw CorpusError("category map " + file.string() + ": " + e.what());
  }
  return out;
}

std::string task_to_json_text(const TaskSpec& task) {
  const auto& ins = task.instruction;
  ordered_json j;
  j["Title"] = ins.title;
  j["Definition"] = ins.definition;
  if (ins.prompt) j["Prompt"] = *ins.prompt;
  if (ins.things_to_avoid) j["Things to Avoid"] = *ins.things_to_avoid;
  if (ins.caution) j["Emphasis & Caution"] = *ins.caution;
  j["Category"] = std::string(to_string(task.category));

  ordered_json pos = ordered_json::array(), neg = ordered_json::array();
  for (const auto& e : ins.examples) (e.polarity == Polarity::positive ? pos : neg).push_back(example_to_json(e));
  j["Examples"]["Positive Examples"] = std::move(pos);
  j["Examples"]["Negative Examples"] = std::move(neg);

  ordered_json instances = ordered_json::array();
  for (const auto& inst : task.instances) {
    ordered_json ij;
    ij["input"] = inst.input;
    ij["output"] = inst.gold_outputs;
    instances.push_back(std::move(ij));
  }
  j["Instances"] = std::move(instances);
  for (const auto& [k, v] : task.extra_fields) j[k] = ordered_json::parse(v);
  return j.dump(2) + "\n";
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& task : corpus.tasks) {
    if (task.task_id.find_first_of("/\\") != std::string::npos || task.task_id.empty())
      throw std::invalid_argument("write_corpus: task id not usable as a file name: '" + task.task_id + "'");
    std::ofstream out(dir / (task.task_id + ".json"), std::ios::binary);
    if (!out) throw CorpusError("cannot write task file for " + task.task_id);
    out << task_to_json_text(task);
  }
}

}  // namespace instructcl
