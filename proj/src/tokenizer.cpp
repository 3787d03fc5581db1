#include "dialectbert/tokenizer.hpp"

#include "dialectbert/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace dialectbert {

std::vector<std::string> special_tokens() {
    return {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    const auto specials = special_tokens();
    if (tokens.size() < specials.size()) {
        throw std::invalid_argument("vocabulary needs at least the " + std::to_string(specials.size()) +
                                    " special tokens");
    }
    Vocabulary vocab;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        const std::string where = "token " + std::to_string(i);
        if (i < specials.size() && tok != specials[i]) {
            throw std::invalid_argument(where + ": expected " + specials[i] + ", found '" + tok + "'");
        }
        if (tok.empty()) {
            throw std::invalid_argument(where + ": empty token");
        }
        if (!is_valid_utf8(tok)) {
            throw std::invalid_argument(where + ": invalid UTF-8");
        }
        if (split_whitespace(tok).size() != 1 || split_whitespace(tok).front().size() != tok.size()) {
            throw std::invalid_argument(where + ": token contains whitespace");
        }
        if (tok == kContinuationPrefix) {
            throw std::invalid_argument(where + ": bare continuation prefix");
        }
        if (!vocab.index_.emplace(tok, static_cast<int>(i)).second) {
            throw std::invalid_argument(where + ": duplicate token '" + tok + "'");
        }
    }
    vocab.tokens_ = std::move(tokens);
    return vocab;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const std::string& tok : tokens_) {
        out << tok << '\n';
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        tokens.push_back(line);
    }
    try {
        return from_tokens(std::move(tokens));
    } catch (const std::invalid_argument& e) {
        // "token N" -> "line N+1" so the message points into the file.
        std::string msg = e.what();
        if (msg.rfind("token ", 0) == 0) {
            const std::size_t colon = msg.find(':');
            const auto index = std::stoul(msg.substr(6, colon - 6));
            msg = "line " + std::to_string(index + 1) + msg.substr(colon);
        }
        throw std::runtime_error(path.string() + ": " + msg);
    }
}

namespace {

using SymbolId = std::int32_t;

struct PairKey {
    SymbolId left;
    SymbolId right;
    bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.left)) << 32) |
                                          static_cast<std::uint32_t>(k.right));
    }
};

struct Word {
    std::vector<SymbolId> symbols;
    std::uint64_t count = 0;
};

class SymbolTable {
public:
    SymbolId intern(const std::string& s) {
        auto [it, inserted] = ids_.emplace(s, static_cast<SymbolId>(names_.size()));
        if (inserted) {
            names_.push_back(s);
        }
        return it->second;
    }
    const std::string& name(SymbolId id) const { return names_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return names_.size(); }

private:
    std::unordered_map<std::string, SymbolId> ids_;
    std::vector<std::string> names_;
};

std::string merged_name(const std::string& left, const std::string& right) {
    if (right.rfind(kContinuationPrefix, 0) == 0) {
        return left + right.substr(kContinuationPrefix.size());
    }
    return left + right;
}

class MergeState {
public:
    MergeState(std::vector<Word> words, std::size_t num_symbols)
        : words_(std::move(words)), symbol_counts_(num_symbols, 0) {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            account(w, +1);
        }
    }

    // Best qualifying pair, or nullopt.
    std::optional<PairKey> best_pair(const SymbolTable& table, std::uint64_t min_frequency) const {
        std::optional<PairKey> best;
        std::uint64_t best_count = 0;
        std::string best_name;
        for (const auto& [key, count] : pair_counts_) {
            if (count < min_frequency || count == 0) {
                continue;
            }
            if (!best) {
                best = key;
                best_count = count;
                best_name = merged_name(table.name(key.left), table.name(key.right));
                continue;
            }
            // count/(l*r) vs best_count/(bl*br), compared exactly.
            __extension__ typedef unsigned __int128 u128;
            const u128 lhs = static_cast<u128>(count) * symbol_count(best->left) * symbol_count(best->right);
            const u128 rhs = static_cast<u128>(best_count) * symbol_count(key.left) * symbol_count(key.right);
            if (lhs < rhs) {
                continue;
            }
            std::string name = merged_name(table.name(key.left), table.name(key.right));
            if (lhs > rhs || name < best_name) {
                best = key;
                best_count = count;
                best_name = std::move(name);
            }
        }
        return best;
    }

    std::uint64_t pair_count(const PairKey& key) const {
        const auto it = pair_counts_.find(key);
        return it == pair_counts_.end() ? 0 : it->second;
    }

    void apply(const PairKey& key, SymbolId merged) {
        if (static_cast<std::size_t>(merged) >= symbol_counts_.size()) {
            symbol_counts_.resize(static_cast<std::size_t>(merged) + 1, 0);
        }
        auto where = std::move(pair_words_[key]);
        pair_words_.erase(key);
        std::sort(where.begin(), where.end());
        where.erase(std::unique(where.begin(), where.end()), where.end());
        for (const std::size_t w : where) {
            auto& symbols = words_[w].symbols;
            bool present = false;
            for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
                if (symbols[i] == key.left && symbols[i + 1] == key.right) {
                    present = true;
                    break;
                }
            }
            if (!present) {
                continue;
            }
            account(w, -1);
            std::vector<SymbolId> next;
            next.reserve(symbols.size());
            for (std::size_t i = 0; i < symbols.size(); ++i) {
                if (i + 1 < symbols.size() && symbols[i] == key.left && symbols[i + 1] == key.right) {
                    next.push_back(merged);
                    ++i;
                } else {
                    next.push_back(symbols[i]);
                }
            }
            symbols = std::move(next);
            account(w, +1);
        }
    }

private:
    std::uint64_t symbol_count(SymbolId s) const { return symbol_counts_[static_cast<std::size_t>(s)]; }

    void account(std::size_t w, int sign) {
        const Word& word = words_[w];
        for (std::size_t i = 0; i < word.symbols.size(); ++i) {
            auto& sc = symbol_counts_[static_cast<std::size_t>(word.symbols[i])];
            sc = sign > 0 ? sc + word.count : sc - word.count;
            if (i + 1 < word.symbols.size()) {
                const PairKey key{word.symbols[i], word.symbols[i + 1]};
                if (sign > 0) {
                    pair_counts_[key] += word.count;
                    pair_words_[key].push_back(w);
                } else {
                    auto it = pair_counts_.find(key);
                    it->second -= word.count;
                    if (it->second == 0) {
                        pair_counts_.erase(it);
                    }
                }
            }
        }
    }

    std::vector<Word> words_;
    std::vector<std::uint64_t> symbol_counts_;
    std::unordered_map<PairKey, std::uint64_t, PairKeyHash> pair_counts_;
    std::unordered_map<PairKey, std::vector<std::size_t>, PairKeyHash> pair_words_;
};

}  // namespace

WordPieceResult train_wordpiece_with_merges(const std::vector<Document>& corpus, const WordPieceOptions& options) {
    if (corpus.empty()) {
        throw std::invalid_argument("cannot train a tokenizer on an empty corpus");
    }
    if (options.min_frequency == 0) {
        throw std::invalid_argument("min_frequency must be positive");
    }

    std::map<std::string, std::uint64_t> word_counts;
    for (const Document& doc : corpus) {
        const std::string text = nfc(doc.text);
        for (const std::string_view w : split_whitespace(text)) {
            ++word_counts[std::string(w)];
        }
    }
    if (word_counts.empty()) {
        throw std::invalid_argument("cannot train a tokenizer on a corpus without words");
    }

    std::map<std::string, std::uint64_t> char_counts;
    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> split_words;
    for (const auto& [word, count] : word_counts) {
        auto chars = split_code_points(word);
        for (const auto& c : chars) {
            char_counts[c] += count;
        }
        split_words.emplace_back(std::move(chars), count);
    }

    SymbolTable table;
    std::vector<Word> words;
    std::map<std::string, SymbolId> alphabet;
    for (auto& [chars, count] : split_words) {
        const bool keep = std::all_of(chars.begin(), chars.end(), [&](const std::string& c) {
            return char_counts[c] >= options.min_frequency;
        });
        if (!keep) {
            continue;
        }
        Word word;
        word.count = count;
        for (std::size_t i = 0; i < chars.size(); ++i) {
            std::string sym = i == 0 ? chars[i] : std::string(kContinuationPrefix) + chars[i];
            const SymbolId id = table.intern(sym);
            alphabet.emplace(std::move(sym), id);
            word.symbols.push_back(id);
        }
        words.push_back(std::move(word));
    }

    std::vector<std::string> tokens = special_tokens();
    if (options.vocab_size < tokens.size() + alphabet.size()) {
        throw std::invalid_argument("vocab_size " + std::to_string(options.vocab_size) +
                                    " is smaller than alphabet (" + std::to_string(alphabet.size()) +
                                    ") plus special tokens (" + std::to_string(tokens.size()) + ")");
    }
    std::unordered_set<std::string> in_vocab(tokens.begin(), tokens.end());
    for (const auto& [sym, id] : alphabet) {
        if (in_vocab.insert(sym).second) {
            tokens.push_back(sym);
        }
    }

    WordPieceResult result;
    MergeState state(std::move(words), table.size());
    while (tokens.size() < options.vocab_size) {
        const auto best = state.best_pair(table, options.min_frequency);
        if (!best) {
            break;
        }
        const std::string& left = table.name(best->left);
        const std::string& right = table.name(best->right);
        std::string merged = merged_name(left, right);
        result.merges.push_back({left, right, merged, state.pair_count(*best)});
        const SymbolId merged_id = table.intern(merged);
        state.apply(*best, merged_id);
        if (in_vocab.insert(merged).second) {
            tokens.push_back(std::move(merged));
        }
    }
    result.vocabulary = Vocabulary::from_tokens(std::move(tokens));
    return result;
}

std::vector<int> tokenize_word(const Vocabulary& vocab, std::string_view word) {
    const auto chars = split_code_points(word);
    // Byte offset of each code point boundary.
    std::vector<std::size_t> offsets{0};
    for (const auto& c : chars) {
        offsets.push_back(offsets.back() + c.size());
    }
    std::vector<int> ids;
    std::size_t start = 0;
    std::string candidate;
    while (start < chars.size()) {
        std::optional<int> found;
        std::size_t end = chars.size();
        for (; end > start; --end) {
            candidate.clear();
            if (start > 0) {
                candidate.append(kContinuationPrefix);
            }
            candidate.append(word.substr(offsets[start], offsets[end] - offsets[start]));
            found = vocab.find(candidate);
            if (found) {
                break;
            }
        }
        if (!found) {
            return {kUnkId};
        }
        ids.push_back(*found);
        start = end;
    }
    return ids;
}

Encoding encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len, bool add_specials) {
    if (add_specials && max_len < 3) {
        throw std::invalid_argument("max_len must be at least 3 when special tokens are added, got " +
                                    std::to_string(max_len));
    }
    if (max_len == 0) {
        throw std::invalid_argument("max_len must be positive");
    }
    const std::size_t budget = add_specials ? max_len - 2 : max_len;
    std::vector<int> pieces;
    const std::string normalized = nfc(text);
    for (const std::string_view word : split_whitespace(normalized)) {
        if (pieces.size() >= budget) {
            break;
        }
        for (const int id : tokenize_word(vocab, word)) {
            pieces.push_back(id);
        }
    }
    if (pieces.size() > budget) {
        pieces.resize(budget);
    }

    Encoding enc;
    enc.ids.reserve(max_len);
    if (add_specials) {
        enc.ids.push_back(kClsId);
    }
    enc.ids.insert(enc.ids.end(), pieces.begin(), pieces.end());
    if (add_specials) {
        enc.ids.push_back(kSepId);
    }
    enc.attention_mask.assign(enc.ids.size(), 1);
    enc.ids.resize(max_len, kPadId);
    enc.attention_mask.resize(max_len, 0);
    return enc;
}

std::string decode(const Vocabulary& vocab, std::span<const int> ids) {
    std::string out;
    for (const int id : ids) {
        const std::string& piece = vocab.token(id);
        if (is_special_id(id)) {
            continue;
        }
        if (piece.rfind(kContinuationPrefix, 0) == 0) {
            out.append(piece, kContinuationPrefix.size());
        } else {
            if (!out.empty()) {
                out.push_back(' ');
            }
            out.append(piece);
        }
    }
    return out;
}

}  // namespace dialectbert
