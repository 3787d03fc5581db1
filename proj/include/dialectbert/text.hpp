#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dialectbert {

/// Returns the byte offset of the first invalid UTF-8 sequence, or npos when valid.
std::size_t find_invalid_utf8(std::string_view text);

inline bool is_valid_utf8(std::string_view text) {
    return find_invalid_utf8(text) == std::string_view::npos;
}

/// Splits valid UTF-8 into one string per code point.
std::vector<std::string> split_code_points(std::string_view text);

/// Unicode NFC normalization. Input must be valid UTF-8.
std::string nfc(std::string_view text);

/// Trims and replaces every run of ASCII/Unicode whitespace by one space.
std::string collapse_whitespace(std::string_view text);

/// Whitespace tokens (no empty tokens).
std::vector<std::string_view> split_whitespace(std::string_view text);

std::size_t count_whitespace_tokens(std::string_view text);

}  // namespace dialectbert
