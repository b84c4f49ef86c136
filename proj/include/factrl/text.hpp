#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace factrl::text {

// Decodes the UTF-8 scalar value starting at byte offset `pos` and advances
// `pos` past it. Malformed bytes decode as U+FFFD, one byte at a time.
char32_t decode_utf8(std::string_view s, std::size_t& pos);

// Encodes one Unicode scalar value as UTF-8.
std::string encode_utf8(char32_t cp);

// All scalar values of a UTF-8 string, in order.
std::vector<char32_t> to_codepoints(std::string_view s);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

// ASCII-only lowercase fold. Non-ASCII bytes pass through unchanged, so CJK
// comparisons stay exact while Latin comparisons become case-insensitive.
std::string ascii_fold(std::string_view s);

// Strips leading/trailing ASCII whitespace.
std::string_view trim(std::string_view s);

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace factrl::text
