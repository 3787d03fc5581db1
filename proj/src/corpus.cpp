#include "dialectbert/corpus.hpp"

#include "dialectbert/rng.hpp"
#include "dialectbert/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dialectbert {

namespace {

// One scan tries link, email, then mention at each position. Mention group 3
// is the (possibly empty) preceding character, kept on replacement.
const std::regex& entity_pattern() {
    static const std::regex re(R"((https?://\S+)|([A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}))"
                               R"(|(^|[^A-Za-z0-9._%+\-])@[A-Za-z0-9_]+)");
    return re;
}

std::string replacement_for(const std::smatch& m) {
    if (m[1].matched) {
        return std::string(kLinkPlaceholder);
    }
    if (m[2].matched) {
        return std::string(kEmailPlaceholder);
    }
    return m[3].str() + std::string(kMentionPlaceholder);
}

std::size_t floor_fraction(double fraction, std::size_t n) {
    // The epsilon keeps products such as 0.29 * 100 from landing just below an integer.
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::vector<Document> pick(const std::vector<Document>& docs, std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end());
    std::vector<Document> out;
    out.reserve(indices.size());
    for (const std::size_t i : indices) {
        out.push_back(docs[i]);
    }
    return out;
}

}  // namespace

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must be strictly between 0 and 1, got " +
                                    std::to_string(train_fraction));
    }
}

namespace {

std::string anonymize_pass(const std::string& text) {
    std::string out;
    auto tail = text.cbegin();
    for (auto it = std::sregex_iterator(text.begin(), text.end(), entity_pattern()); it != std::sregex_iterator();
         ++it) {
        out.append(tail, (*it)[0].first);
        out += replacement_for(*it);
        tail = (*it)[0].second;
    }
    out.append(tail, text.cend());
    return out;
}

}  // namespace

// A placeholder glued to neighbouring text can form a new match (e.g. two
// adjacent emails), so passes repeat until the text is stable.
std::string anonymize(std::string_view text) {
    std::string current(text);
    for (int pass = 0; pass < 16; ++pass) {
        std::string next = anonymize_pass(current);
        if (next == current) {
            break;
        }
        current = std::move(next);
    }
    return current;
}

bool contains_raw_entities(std::string_view text) {
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), entity_pattern()); it != std::sregex_iterator(); ++it) {
        if (it->str() != replacement_for(*it)) {
            return true;
        }
    }
    return false;
}

std::string clean_text(std::string_view text) {
    return collapse_whitespace(nfc(text));
}

std::pair<std::vector<Document>, CorpusStats> filter_and_dedup(const std::vector<Document>& docs) {
    CorpusStats stats;
    std::unordered_set<std::string> seen;
    std::vector<Document> kept;
    for (const Document& doc : docs) {
        if (!seen.insert(clean_text(doc.text)).second) {
            ++stats.duplicate_removed;
            continue;
        }
        if (count_whitespace_tokens(doc.text) < kMinTokens) {
            ++stats.short_removed;
            continue;
        }
        kept.push_back(doc);
    }
    const CorpusStats counts = compute_stats(kept);
    stats.document_count = counts.document_count;
    stats.token_count = counts.token_count;
    return {std::move(kept), stats};
}

CorpusStats compute_stats(const std::vector<Document>& docs) {
    CorpusStats stats;
    stats.document_count = docs.size();
    for (const Document& doc : docs) {
        stats.token_count += count_whitespace_tokens(doc.text);
    }
    return stats;
}

SplitResult split(const std::vector<Document>& docs, const SplitSpec& spec) {
    spec.validate();
    if (!spec.stratified) {
        std::vector<std::size_t> order(docs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(spec.seed);
        rng.shuffle(std::span<std::size_t>(order));
        const std::size_t n_train = floor_fraction(spec.train_fraction, docs.size());
        return {pick(docs, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)}),
                pick(docs, {order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()})};
    }

    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!docs[i].label) {
            throw std::invalid_argument("missing labels");
        }
        by_class[*docs[i].label].push_back(i);
    }

    // Per-class floor, then the shortfall against floor(fraction * N) goes to the
    // classes with the largest fractional remainders (earlier label wins ties).
    struct Quota {
        std::size_t take;
        double remainder;
        std::size_t order;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [label, members] : by_class) {
        const double exact = spec.train_fraction * static_cast<double>(members.size());
        const std::size_t base = floor_fraction(spec.train_fraction, members.size());
        quotas.push_back({base, std::max(0.0, exact - static_cast<double>(base)), quotas.size()});
        assigned += base;
    }
    const std::size_t target = floor_fraction(spec.train_fraction, docs.size());
    std::vector<std::size_t> ranking(quotas.size());
    std::iota(ranking.begin(), ranking.end(), std::size_t{0});
    std::stable_sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
        return quotas[a].remainder > quotas[b].remainder;
    });
    for (std::size_t r = 0; r < ranking.size() && assigned < target; ++r) {
        Quota& q = quotas[ranking[r]];
        if (q.remainder > 0.0) {
            ++q.take;
            ++assigned;
        }
    }

    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    std::size_t class_index = 0;
    for (const auto& [label, members] : by_class) {
        std::vector<std::size_t> shuffled = members;
        Rng rng(derive_seed(spec.seed, class_index));
        rng.shuffle(std::span<std::size_t>(shuffled));
        const std::size_t take = quotas[class_index].take;
        train_idx.insert(train_idx.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(take));
        test_idx.insert(test_idx.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(take), shuffled.end());
        ++class_index;
    }
    return {pick(docs, std::move(train_idx)), pick(docs, std::move(test_idx))};
}

std::pair<std::vector<Document>, CorpusStats> preprocess(const std::vector<Document>& raw) {
    std::vector<Document> cleaned;
    cleaned.reserve(raw.size());
    for (const Document& doc : raw) {
        Document d = doc;
        d.text = clean_text(anonymize(doc.text));
        cleaned.push_back(std::move(d));
    }
    return filter_and_dedup(cleaned);
}

std::vector<Document> parse_corpus(std::istream& in, bool labeled) {
    std::vector<Document> docs;
    std::string line;
    std::int64_t line_index = 0;
    for (; std::getline(in, line); ++line_index) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (const std::size_t bad = find_invalid_utf8(line); bad != std::string::npos) {
            throw std::runtime_error("line " + std::to_string(line_index + 1) + ": invalid UTF-8 at byte " +
                                     std::to_string(bad));
        }
        if (!labeled) {
            docs.push_back({line_index, line, std::nullopt});
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw std::runtime_error("line " + std::to_string(line_index + 1) +
                                     ": expected \"label<TAB>text\"");
        }
        docs.push_back({line_index, line.substr(tab + 1), line.substr(0, tab)});
    }
    return docs;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

}  // namespace

std::vector<Document> read_corpus(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_corpus(in, false);
}

std::vector<Document> read_labeled(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_corpus(in, true);
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
    auto out = open_output(path);
    for (const Document& doc : docs) {
        out << doc.text << '\n';
    }
}

void write_labeled(const std::filesystem::path& path, const std::vector<Document>& docs) {
    auto out = open_output(path);
    for (const Document& doc : docs) {
        if (!doc.label) {
            throw std::invalid_argument("missing labels");
        }
        out << *doc.label << '\t' << doc.text << '\n';
    }
}

std::string format_stats(const CorpusStats& stats) {
    std::ostringstream os;
    os << "document_count: " << stats.document_count << '\n'
       << "token_count: " << stats.token_count << '\n'
       << "duplicate_removed: " << stats.duplicate_removed << '\n'
       << "short_removed: " << stats.short_removed << '\n';
    return os.str();
}

}  // namespace dialectbert
