#include "dialectbert/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace dialectbert {

namespace {

template <typename T>
T parse_number(const std::string& s) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("not a valid number: '" + s + "'");
    }
    return value;
}

template <typename T>
std::string format_number(T value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no") {
        return false;
    }
    throw ConfigError("not a boolean: '" + s + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw ConfigError("empty entry in seed list '" + s + "'");
        }
        out.push_back(parse_number<std::uint64_t>(item.substr(b, e - b + 1)));
    }
    return out;
}

struct Binding {
    const char* section;
    const char* key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

#define DB_NUM(SECTION, KEY, TYPE, EXPR)                                                                     \
    Binding {                                                                                                 \
        SECTION, KEY, [](PipelineConfig& c, const std::string& v) { c.EXPR = parse_number<TYPE>(v); },        \
            [](const PipelineConfig& c) { return format_number<TYPE>(c.EXPR); }                               \
    }
#define DB_BOOL(SECTION, KEY, EXPR)                                                                           \
    Binding {                                                                                                 \
        SECTION, KEY, [](PipelineConfig& c, const std::string& v) { c.EXPR = parse_bool(v); },                \
            [](const PipelineConfig& c) { return std::string(c.EXPR ? "true" : "false"); }                    \
    }

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> table = {
        DB_NUM("run", "seed", std::uint64_t, seed),
        Binding{"paths", "corpus",
                [](PipelineConfig& c, const std::string& v) { c.corpus_path = v; },
                [](const PipelineConfig& c) { return c.corpus_path.generic_string(); }},
        Binding{"paths", "labeled",
                [](PipelineConfig& c, const std::string& v) { c.labeled_path = v; },
                [](const PipelineConfig& c) { return c.labeled_path.generic_string(); }},

        DB_NUM("model", "vocab_size", std::size_t, model.vocab_size),
        DB_NUM("model", "hidden", std::size_t, model.hidden),
        DB_NUM("model", "layers", std::size_t, model.layers),
        DB_NUM("model", "heads", std::size_t, model.heads),
        DB_NUM("model", "intermediate", std::size_t, model.intermediate),
        DB_NUM("model", "max_positions", std::size_t, model.max_positions),
        DB_NUM("model", "type_vocab", std::size_t, model.type_vocab),
        DB_NUM("model", "dropout", double, model.dropout),
        DB_NUM("model", "init_std", double, model.init_std),
        DB_NUM("model", "layer_norm_eps", double, model.layer_norm_eps),
        DB_BOOL("model", "pooled_classifier", model.pooled_classifier),

        DB_NUM("tokenizer", "vocab_size", std::size_t, tokenizer.vocab_size),
        DB_NUM("tokenizer", "min_frequency", std::size_t, tokenizer.min_frequency),

        DB_NUM("pretrain", "mask_probability", double, pretrain.mask_probability),
        DB_NUM("pretrain", "batch_size", std::size_t, pretrain.batch_size),
        DB_NUM("pretrain", "epochs", std::size_t, pretrain.epochs),
        DB_NUM("pretrain", "seed", std::uint64_t, pretrain.seed),
        DB_NUM("pretrain", "learning_rate", double, pretrain.learning_rate),
        DB_NUM("pretrain", "warmup_fraction", double, pretrain.warmup_fraction),
        DB_NUM("pretrain", "checkpoint_interval", std::size_t, pretrain.checkpoint_interval),
        DB_NUM("pretrain", "max_len", std::size_t, pretrain.max_len),

        DB_NUM("finetune", "epochs", std::size_t, finetune.epochs),
        Binding{"finetune", "seeds",
                [](PipelineConfig& c, const std::string& v) { c.finetune.seeds = parse_seed_list(v); },
                [](const PipelineConfig& c) {
                    std::string out;
                    for (const auto s : c.finetune.seeds) {
                        out += (out.empty() ? "" : ",") + format_number(s);
                    }
                    return out;
                }},
        DB_NUM("finetune", "batch_size", std::size_t, finetune.batch_size),
        DB_NUM("finetune", "learning_rate", double, finetune.learning_rate),
        DB_NUM("finetune", "max_len", std::size_t, finetune.max_len),

        DB_NUM("split", "train_fraction", double, split.train_fraction),
        DB_NUM("split", "seed", std::uint64_t, split.seed),
        DB_BOOL("split", "stratified", split.stratified),

        DB_NUM("corpus_split", "train_fraction", double, corpus_split.train_fraction),
        DB_NUM("corpus_split", "seed", std::uint64_t, corpus_split.seed),
        DB_BOOL("corpus_split", "stratified", corpus_split.stratified),
    };
    return table;
}

#undef DB_NUM
#undef DB_BOOL

}  // namespace

void PipelineConfig::override_seed(std::uint64_t s) {
    seed = s;
    pretrain.seed = s;
    split.seed = s;
    corpus_split.seed = s;
}

void PipelineConfig::validate() const {
    try {
        model.validate();
        pretrain.validate();
        finetune.validate();
        split.validate();
        corpus_split.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (tokenizer.min_frequency == 0) {
        throw ConfigError("tokenizer: min_frequency must be at least 1");
    }
    if (tokenizer.vocab_size <= static_cast<std::size_t>(kNumSpecialTokens)) {
        throw ConfigError("tokenizer: vocab_size must exceed the special tokens");
    }
    if (pretrain.max_len > model.max_positions || finetune.max_len > model.max_positions) {
        throw ConfigError("max_len exceeds model.max_positions (" + std::to_string(model.max_positions) + ")");
    }
    for (const auto* p : {&corpus_path, &labeled_path}) {
        if (!p->empty() && !std::filesystem::exists(*p)) {
            throw ConfigError("path does not exist: " + p->string());
        }
    }
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }

    std::map<std::string, std::map<std::string, const Binding*>> index;
    for (const Binding& b : bindings()) {
        index[b.section][b.key] = &b;
    }
    PipelineConfig config;
    for (const auto& [section, keys] : tree) {
        const auto sit = index.find(section);
        if (sit == index.end()) {
            if (keys.empty()) {
                throw ConfigError("key '" + section + "' outside of a section");
            }
            throw ConfigError("unknown section [" + section + "]");
        }
        for (const auto& [key, node] : keys) {
            const auto kit = sit->second.find(key);
            if (kit == sit->second.end()) {
                throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            }
            try {
                kit->second->set(config, node.data());
            } catch (const ConfigError& e) {
                throw ConfigError("[" + section + "] " + key + ": " + e.what());
            }
        }
    }
    for (auto* p : {&config.corpus_path, &config.labeled_path}) {
        if (!p->empty() && p->is_relative() && !base_dir.empty()) {
            *p = (base_dir / *p).lexically_normal();
        }
    }
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string to_ini(const PipelineConfig& config) {
    std::string out;
    std::string current;
    for (const Binding& b : bindings()) {
        if (current != b.section) {
            out += (out.empty() ? "[" : "\n[") + std::string(b.section) + "]\n";
            current = b.section;
        }
        out += std::string(b.key) + " = " + b.get(config) + "\n";
    }
    return out;
}

}  // namespace dialectbert
