#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hgrag::text {

/// Trim and collapse internal whitespace runs to one space.
std::string normalize_whitespace(std::string_view s);

/// ASCII lowercase; bytes outside ASCII are kept as-is.
std::string ascii_lower(std::string_view s);

std::string trim(std::string_view s);

/// Case-folded normalized form used for entity identity.
inline std::string identity_key(std::string_view name) {
  return ascii_lower(normalize_whitespace(name));
}

bool contains_case_insensitive(std::string_view haystack, std::string_view needle);

/// Hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Byte span of one approximate token.
struct TokenSpan {
  std::size_t begin;
  std::size_t end;
};

/// Approximate tokenizer: maximal runs of word bytes (ASCII alnum, '_',
/// or any byte >= 0x80) and single ASCII punctuation characters each
/// count as one token; whitespace separates.
std::vector<TokenSpan> token_spans(std::string_view s);

std::size_t count_tokens(std::string_view s);

/// Replace the first occurrence of `placeholder` with `value` in a single
/// pass, so placeholders inside `value` are left alone.
std::string substitute(std::string_view tmpl, std::string_view placeholder,
                       std::string_view value);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::vector<std::string> split(std::string_view s, std::string_view sep);

/// Shortest decimal rendering of a double with at most `max_decimals`.
std::string format_number(double v, int max_decimals = 4);

/// Byte index one past the bracket matching the one at `open`, honoring
/// JSON string escapes; npos if unbalanced.
std::size_t match_bracket(std::string_view s, std::size_t open);

}  // namespace hgrag::text
