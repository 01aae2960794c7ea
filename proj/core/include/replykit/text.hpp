#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace replykit::text {

// Decodes UTF-8 into codepoints. Returns false on any invalid sequence
// (out is left with whatever was decoded so far).
bool utf8_decode(std::string_view s, std::vector<char32_t>& out);

bool utf8_valid(std::string_view s);

void utf8_append(std::string& out, char32_t cp);
std::string utf8_encode(const std::vector<char32_t>& cps);

// Case folding covers ASCII, Latin-1, Greek and Cyrillic; other scripts pass
// through unchanged. Input is expected to be composed (NFC) already.
char32_t to_lower(char32_t cp);
std::string lowercase(std::string_view s);

bool is_space(char32_t cp);
bool is_punct(char32_t cp);

// Scripts written without word separators (Han, kana, Thai); the tokenizer
// emits these one character per token.
bool is_spacefree_script(char32_t cp);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

// Whitespace-delimited token count (used by corpus statistics).
std::size_t whitespace_token_count(std::string_view s);

}  // namespace replykit::text
