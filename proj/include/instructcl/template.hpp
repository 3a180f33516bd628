// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "instructcl/corpus.hpp"

namespace instructcl {

/// full_with_examples appends the [POSk] blocks; bare_no_examples drops them.
enum class RenderMode { full_with_examples, bare_no_examples };

/// Renders the encoder input:
///
///   [Input] x [Title] t [Prompt] p [Definition] d [Avoid] a [Caution] c
///   [POS1] [Input] i [Output] o [Explanation] e ... [POSn] ...
///
/// on one line with single-space separators. The input comes first so that
/// tail truncation never removes it. Absent or blank optional fields lose their tag.
/// Field values are trimmed. Negative examples are never rendered.
std::string render(const Instruction& instruction, std::string_view input, RenderMode mode);

/// Keeps the first `max_tokens` whitespace-delimited tokens. The result is a
/// prefix of `text`; text with at most `max_tokens` tokens is returned as is.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

/// The text of the leading `[Input]` segment of an encoder string, or the
/// whole string when it does not start with `[Input] `.
std::string_view input_segment(std::string_view encoder_text);

}  // namespace instructcl
