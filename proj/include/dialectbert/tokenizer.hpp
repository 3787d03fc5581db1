#pragma once

#include "dialectbert/corpus.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dialectbert {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumSpecialTokens = 5;

inline constexpr std::string_view kContinuationPrefix = "##";

inline bool is_special_id(int id) { return id >= 0 && id < kNumSpecialTokens; }

/// Ordered token table; the index of a token is its id. Ids 0-4 hold
/// [PAD] [UNK] [CLS] [SEP] [MASK] in that order.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Validates uniqueness, special-token placement and token shape.
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(int id) const;
    std::optional<int> find(std::string_view token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

std::vector<std::string> special_tokens();

/// Fixed-length token ids plus a 0/1 mask that is 1 exactly on non-[PAD] positions.
struct Encoding {
    std::vector<int> ids;
    std::vector<std::uint8_t> attention_mask;

    bool operator==(const Encoding&) const = default;
};

struct WordPieceOptions {
    std::size_t vocab_size = 50000;
    std::size_t min_frequency = 2;
};

/// One merge performed during training, in order.
struct MergeRecord {
    std::string left;
    std::string right;
    std::string merged;
    std::uint64_t pair_count = 0;
};

struct WordPieceResult {
    Vocabulary vocabulary;
    std::vector<MergeRecord> merges;
};

/// Greedy likelihood-ratio WordPiece training.
///
/// Text is NFC-normalized and split on whitespace. The alphabet is every code point
/// seen at least `min_frequency` times, in word-initial form and in "##" continuation
/// form; words with a rarer code point are left out of merge statistics. Each round
/// merges the adjacent pair maximizing count(ab) / (count(a) * count(b)) among pairs
/// seen at least `min_frequency` times; equal scores go to the lexicographically
/// smallest merged string. Training stops at `vocab_size` or when no pair qualifies.
WordPieceResult train_wordpiece_with_merges(const std::vector<Document>& corpus,
                                            const WordPieceOptions& options);

inline Vocabulary train_wordpiece(const std::vector<Document>& corpus, const WordPieceOptions& options) {
    return train_wordpiece_with_merges(corpus, options).vocabulary;
}

/// Longest-prefix-first segmentation of one word. A word with an unmatchable
/// remainder becomes a single [UNK].
std::vector<int> tokenize_word(const Vocabulary& vocab, std::string_view word);

/// Encodes to exactly `max_len` ids: [CLS] pieces [SEP] [PAD]... when `add_specials`.
/// Throws std::invalid_argument when max_len < 3 with specials (or 0 without).
Encoding encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len = 64,
                bool add_specials = true);

/// Drops special tokens and glues "##" pieces onto the preceding word.
std::string decode(const Vocabulary& vocab, std::span<const int> ids);

}  // namespace dialectbert
