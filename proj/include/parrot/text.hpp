#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace parrot::text {

/// Decodes UTF-8 into Unicode scalar values. Throws InvalidArgument on
/// malformed input (overlong forms, surrogates, truncated sequences).
std::u32string decode_utf8(std::string_view s);

/// True for code points with the Unicode White_Space property.
bool is_unicode_space(char32_t cp) noexcept;

/// Splits on Unicode whitespace. Punctuation stays attached to its word and
/// empty tokens are never produced.
std::vector<std::string> word_tokenize(std::string_view s);

/// Joins words with single spaces.
std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end);
std::string join_words(const std::vector<std::string>& words);

/// ASCII-only lowercasing; bytes >= 0x80 pass through untouched.
std::string ascii_lower(std::string_view s);

}  // namespace parrot::text
