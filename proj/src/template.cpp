// SPDX-License-Identifier: Apache-2.0
#include "instructcl/template.hpp"

#include <cctype>
#include <stdexcept>

namespace instructcl {

namespace {

constexpr std::string_view kInputTag = "[Input] ";
constexpr std::string_view kTitleBoundary = " [Title]";

void append_field(std::string& out, std::string_view tag, std::string_view value) {
  if (!out.empty()) out.push_back(' ');
  out += tag;
  const auto v = trim(value);
  if (!v.empty()) {
    out.push_back(' ');
    out += v;
  }
}

// Optional fields that are missing or blank lose their tag.
void append_optional(std::string& out, std::string_view tag, const std::optional<std::string>& value) {
  if (value && !trim(*value).empty()) append_field(out, tag, *value);
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string render(const Instruction& instruction, std::string_view input, RenderMode mode) {
  std::string out;
  append_field(out, "[Input]", input);
  append_field(out, "[Title]", instruction.title);
  append_optional(out, "[Prompt]", instruction.prompt);
  append_field(out, "[Definition]", instruction.definition);
  append_optional(out, "[Avoid]", instruction.things_to_avoid);
  append_optional(out, "[Caution]", instruction.caution);

  if (mode == RenderMode::full_with_examples) {
    std::size_t k = 0;
    for (const auto& e : instruction.examples) {
      if (e.polarity != Polarity::positive) continue;
      out += " [POS" + std::to_string(++k) + "]";
      append_field(out, "[Input]", e.input);
      append_field(out, "[Output]", e.output);
      append_optional(out, "[Explanation]", e.explanation);
    }
  }
  return out;
}

std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  if (max_tokens == 0) throw std::invalid_argument("truncate_tokens: max_tokens must be at least 1");
  std::size_t tokens = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (++tokens == max_tokens) return std::string(text.substr(0, i));
  }
  return std::string(text);
}

std::string_view input_segment(std::string_view encoder_text) {
  if (!encoder_text.starts_with(kInputTag)) return encoder_text;
  auto rest = encoder_text.substr(kInputTag.size());
  if (rest == kTitleBoundary.substr(1) || rest.starts_with(std::string(kTitleBoundary.substr(1)) + " ")) return {};
  for (std::size_t pos = rest.find(kTitleBoundary); pos != std::string_view::npos;
       pos = rest.find(kTitleBoundary, pos + 1)) {
    const auto after = pos + kTitleBoundary.size();
    if (after == rest.size() || rest[after] == ' ') return rest.substr(0, pos);
  }
  return rest;
}

}  // namespace instructcl
