#include "dialectbert/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdint>
#include <stdexcept>

namespace dialectbert {

namespace {

// Next code point starting at `i`, advancing `i`. Negative on malformed input.
UChar32 next_code_point(std::string_view text, std::int32_t& i) {
    UChar32 c = 0;
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    U8_NEXT(s, i, length, c);
    return c;
}

bool is_space(UChar32 c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' ||
           u_isUWhiteSpace(c);
}

}  // namespace

std::size_t find_invalid_utf8(std::string_view text) {
    std::int32_t i = 0;
    const auto length = static_cast<std::int32_t>(text.size());
    while (i < length) {
        const std::int32_t start = i;
        if (next_code_point(text, i) < 0) {
            return static_cast<std::size_t>(start);
        }
    }
    return std::string_view::npos;
}

std::vector<std::string> split_code_points(std::string_view text) {
    std::vector<std::string> out;
    std::int32_t i = 0;
    const auto length = static_cast<std::int32_t>(text.size());
    while (i < length) {
        const std::int32_t start = i;
        if (next_code_point(text, i) < 0) {
            throw std::invalid_argument("invalid UTF-8 at byte " + std::to_string(start));
        }
        out.emplace_back(text.substr(static_cast<std::size_t>(start),
                                     static_cast<std::size_t>(i - start)));
    }
    return out;
}

std::string nfc(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        throw std::runtime_error(std::string("ICU NFC normalizer unavailable: ") + u_errorName(status));
    }
    const auto source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
    if (normalizer->isNormalized(source, status) && U_SUCCESS(status)) {
        return std::string(text);
    }
    status = U_ZERO_ERROR;
    const icu::UnicodeString normalized = normalizer->normalize(source, status);
    if (U_FAILURE(status)) {
        throw std::runtime_error(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::int32_t i = 0;
    const auto length = static_cast<std::int32_t>(text.size());
    bool pending_space = false;
    while (i < length) {
        const std::int32_t start = i;
        const UChar32 c = next_code_point(text, i);
        if (c >= 0 && is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.append(text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
    }
    return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
    std::vector<std::string_view> out;
    std::int32_t i = 0;
    const auto length = static_cast<std::int32_t>(text.size());
    std::int32_t word_start = -1;
    while (i < length) {
        const std::int32_t start = i;
        const UChar32 c = next_code_point(text, i);
        const bool space = c >= 0 && is_space(c);
        if (space && word_start >= 0) {
            out.push_back(text.substr(static_cast<std::size_t>(word_start),
                                      static_cast<std::size_t>(start - word_start)));
            word_start = -1;
        } else if (!space && word_start < 0) {
            word_start = start;
        }
    }
    if (word_start >= 0) {
        out.push_back(text.substr(static_cast<std::size_t>(word_start)));
    }
    return out;
}

std::size_t count_whitespace_tokens(std::string_view text) {
    return split_whitespace(text).size();
}

}  // namespace dialectbert
