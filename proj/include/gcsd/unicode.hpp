#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gcsd::uni {

// Decodes the UTF-8 sequence starting at s[pos]. Advances pos past the
// sequence and returns the codepoint; malformed bytes decode as U+FFFD
// one byte at a time so progress is always made.
uint32_t decode_next(std::string_view s, size_t& pos);

std::string encode(uint32_t cp);

// Splits a UTF-8 string into codepoints.
std::vector<uint32_t> codepoints(std::string_view s);

// Number of codepoints in s.
size_t length(std::string_view s);

// Prefix of s containing at most n codepoints.
std::string truncate(std::string_view s, size_t n);

// Punctuation per the cleaning rule: Unicode categories Po/Pe/Pi/Pf plus
// the CJK sentence marks.
bool is_punct(uint32_t cp);

bool is_whitespace(uint32_t cp);

}  // namespace gcsd::uni
