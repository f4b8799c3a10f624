#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sentcx::utf8 {

// Byte offset of the first invalid sequence, or nullopt if `text` is valid
// UTF-8 (no overlongs, no surrogates, nothing above U+10FFFF).
std::optional<std::size_t> find_invalid(std::string_view text);

inline bool is_valid(std::string_view text) { return !find_invalid(text).has_value(); }

// Throws ParseError on invalid input.
std::vector<char32_t> decode(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

// Number of scalar values; input must be valid.
std::size_t length(std::string_view text);

bool is_whitespace(char32_t cp);
bool is_digit(char32_t cp);

// Canonical composition (NFC). Input must be valid UTF-8.
std::string nfc(std::string_view text);

}  // namespace sentcx::utf8
