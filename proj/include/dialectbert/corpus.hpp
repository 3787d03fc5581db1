#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialectbert {

/// One cleaned text unit. `label` is empty for pre-training corpora.
struct Document {
    std::int64_t id = 0;
    std::string text;
    std::optional<std::string> label;

    bool operator==(const Document&) const = default;
};

struct CorpusStats {
    std::size_t document_count = 0;
    std::size_t token_count = 0;
    std::size_t duplicate_removed = 0;
    std::size_t short_removed = 0;

    bool operator==(const CorpusStats&) const = default;
};

struct SplitSpec {
    double train_fraction = 0.75;
    std::uint64_t seed = 42;
    bool stratified = false;

    void validate() const;
};

struct SplitResult {
    std::vector<Document> train;
    std::vector<Document> test;
};

inline constexpr std::string_view kMentionPlaceholder = "@user";
inline constexpr std::string_view kEmailPlaceholder = "mail@email.com";
inline constexpr std::string_view kLinkPlaceholder = "https://anonymizedlink.com";

/// Minimum whitespace-token count a document needs to survive filtering.
inline constexpr std::size_t kMinTokens = 3;

/// Replaces hyperlinks, e-mail addresses and user mentions by fixed placeholders.
/// A single left-to-right scan tries link, then email, then mention at each
/// position; scans repeat until the text no longer changes.
///
/// Patterns:
///   link     http:// or https:// followed by any run of non-whitespace
///   email    [A-Za-z0-9._%+-]+ @ [A-Za-z0-9.-]+ . [A-Za-z]{2,}
///   mention  "@" + [A-Za-z0-9_]+, where the "@" starts the text or follows a
///            character outside the e-mail local-part set [A-Za-z0-9._%+-]
std::string anonymize(std::string_view text);

/// True when `text` still holds a mention, e-mail or link that is not a placeholder.
bool contains_raw_entities(std::string_view text);

/// NFC normalization followed by whitespace collapsing. This is also the dedup key.
std::string clean_text(std::string_view text);

/// Drops exact duplicates (first occurrence wins), then documents with fewer than
/// three whitespace tokens. Relative order is preserved.
std::pair<std::vector<Document>, CorpusStats> filter_and_dedup(const std::vector<Document>& docs);

CorpusStats compute_stats(const std::vector<Document>& docs);

/// Deterministic train/test partition. Throws std::invalid_argument("missing labels")
/// when a stratified split is requested on an unlabeled document.
SplitResult split(const std::vector<Document>& docs, const SplitSpec& spec);

/// Anonymize, clean, drop empties, then filter_and_dedup. Stats count the
/// empty-after-cleaning lines as short.
std::pair<std::vector<Document>, CorpusStats> preprocess(const std::vector<Document>& raw);

// File formats: plain corpus = one document per line; labeled = "label<TAB>text".
// Document ids are 0-based line indices. Invalid UTF-8 is rejected with the line number.
std::vector<Document> read_corpus(const std::filesystem::path& path);
std::vector<Document> read_labeled(const std::filesystem::path& path);
std::vector<Document> parse_corpus(std::istream& in, bool labeled);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
void write_labeled(const std::filesystem::path& path, const std::vector<Document>& docs);

/// "key: value" lines.
std::string format_stats(const CorpusStats& stats);

}  // namespace dialectbert
