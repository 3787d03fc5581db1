// Command-line front end: one subcommand per pipeline stage plus run-all.

#include "dialectbert/config.hpp"
#include "dialectbert/corpus.hpp"
#include "dialectbert/finetune.hpp"
#include "dialectbert/metrics.hpp"
#include "dialectbert/model.hpp"
#include "dialectbert/pretrain.hpp"
#include "dialectbert/sizing.hpp"
#include "dialectbert/tokenizer.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dialectbert;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 2, kMissingFile = 3, kConfig = 4, kProcessing = 5 };

struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path, const char* what) {
    if (path.empty() || !fs::is_regular_file(path)) {
        throw MissingFile(std::string(what) + " not found: " + path.string());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Snapshot sits inside output directories and beside output files.
void write_snapshot(const PipelineConfig& cfg, const fs::path& out, bool out_is_dir) {
    const fs::path target = out_is_dir ? out / "resolved_config.ini"
                                       : out.parent_path() / (out.filename().string() + ".resolved_config.ini");
    write_text(target, to_ini(cfg));
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config, "INI configuration file");
    cmd->add_option("--seed", c.seed, "Overrides every seed in the configuration");
    auto* out = cmd->add_option("--out", c.out, "Output location");
    if (out_required) {
        out->required();
    }
}

PipelineConfig resolve(const Common& c) {
    PipelineConfig cfg;
    if (!c.config.empty()) {
        require_file(c.config, "config");
        cfg = load_config(c.config);
    }
    if (c.seed) {
        cfg.override_seed(*c.seed);
    }
    return cfg;
}

// ---- stages --------------------------------------------------------------

struct PreprocessArgs {
    fs::path input;
    bool labeled = false;
    fs::path out;
};

fs::path run_preprocess(const PipelineConfig& cfg, const PreprocessArgs& a) {
    require_file(a.input, "input");
    const auto raw = a.labeled ? read_labeled(a.input) : read_corpus(a.input);
    const auto [docs, stats] = preprocess(raw);
    fs::create_directories(a.out);
    const fs::path data = a.out / (a.labeled ? "labeled.tsv" : "corpus.txt");
    if (a.labeled) {
        write_labeled(data, docs);
    } else {
        write_corpus(data, docs);
    }
    write_text(a.out / "stats.txt", format_stats(stats));
    write_snapshot(cfg, a.out, true);
    spdlog::info("preprocess: {} of {} documents kept ({} duplicates, {} short)", stats.document_count, raw.size(),
                 stats.duplicate_removed, stats.short_removed);
    return data;
}

struct SplitArgs {
    fs::path input;
    bool labeled = false;
    fs::path out;
};

std::pair<fs::path, fs::path> run_split(const PipelineConfig& cfg, const SplitArgs& a) {
    require_file(a.input, "input");
    const auto docs = a.labeled ? read_labeled(a.input) : read_corpus(a.input);
    const SplitSpec& spec = a.labeled ? cfg.split : cfg.corpus_split;
    const SplitResult parts = split(docs, spec);
    const char* ext = a.labeled ? ".tsv" : ".txt";
    const fs::path train = a.out / (std::string("train") + ext);
    const fs::path test = a.out / (std::string("test") + ext);
    fs::create_directories(a.out);
    if (a.labeled) {
        write_labeled(train, parts.train);
        write_labeled(test, parts.test);
    } else {
        write_corpus(train, parts.train);
        write_corpus(test, parts.test);
    }
    write_snapshot(cfg, a.out, true);
    spdlog::info("split: {} train / {} test", parts.train.size(), parts.test.size());
    return {train, test};
}

struct TokenizerArgs {
    fs::path corpus;
    fs::path out;
};

void run_train_tokenizer(const PipelineConfig& cfg, const TokenizerArgs& a) {
    require_file(a.corpus, "corpus");
    const auto docs = read_corpus(a.corpus);
    const Vocabulary vocab = train_wordpiece(docs, cfg.tokenizer);
    if (a.out.has_parent_path()) {
        fs::create_directories(a.out.parent_path());
    }
    vocab.save(a.out);
    write_snapshot(cfg, a.out, false);
    spdlog::info("train-tokenizer: {} entries", vocab.size());
}

struct PretrainArgs {
    fs::path corpus;
    fs::path vocab;
    fs::path out;
};

fs::path run_pretrain(const PipelineConfig& cfg, const PretrainArgs& a) {
    require_file(a.corpus, "corpus");
    require_file(a.vocab, "vocabulary");
    const auto docs = read_corpus(a.corpus);
    const Vocabulary vocab = Vocabulary::load(a.vocab);
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    EncoderModel model(mc, cfg.seed);
    fs::create_directories(a.out);
    const auto on_checkpoint = [&](const EncoderModel& m, std::size_t step) {
        save_checkpoint(m, a.out / ("step_" + std::to_string(step) + ".ckpt"));
        spdlog::debug("pretrain: checkpoint at step {}", step);
    };
    const PretrainResult r = pretrain_loop(docs, vocab, model, cfg.pretrain, on_checkpoint);
    const fs::path ckpt = a.out / "model.ckpt";
    save_checkpoint(model, ckpt);
    write_text(a.out / "loss_history.csv", format_loss_history(r.history));
    write_snapshot(cfg, a.out, true);
    if (!r.history.empty()) {
        spdlog::info("pretrain: {} steps, first loss {:.4f}, last loss {:.4f}", r.history.size(),
                     r.history.front().loss, r.history.back().loss);
    }
    return ckpt;
}

struct FinetuneArgs {
    fs::path checkpoint;
    fs::path vocab;
    fs::path train;
    fs::path test;
    fs::path out;
};

fs::path predictions_file(const fs::path& dir, std::uint64_t seed) {
    return dir / ("predictions_seed" + std::to_string(seed) + ".csv");
}

void run_finetune(const PipelineConfig& cfg, const FinetuneArgs& a) {
    require_file(a.checkpoint, "checkpoint");
    require_file(a.vocab, "vocabulary");
    require_file(a.train, "training file");
    require_file(a.test, "test file");
    const EncoderModel pretrained = load_checkpoint(a.checkpoint);
    const Vocabulary vocab = Vocabulary::load(a.vocab);
    if (vocab.size() != pretrained.config().vocab_size) {
        throw std::invalid_argument("vocabulary has " + std::to_string(vocab.size()) + " entries, checkpoint expects " +
                                    std::to_string(pretrained.config().vocab_size));
    }
    const auto train_docs = read_labeled(a.train);
    const auto test_docs = read_labeled(a.test);
    const LabelMap labels = LabelMap::from_documents(train_docs);
    const auto train = make_examples(train_docs, vocab, labels, cfg.finetune.max_len);
    const auto test = encode_documents(test_docs, vocab, cfg.finetune.max_len);

    fs::create_directories(a.out);
    std::string label_lines;
    for (const auto& l : labels.labels()) {
        label_lines += l + "\n";
    }
    write_text(a.out / "labels.txt", label_lines);
    for (const RunResult& r : run_protocol(pretrained, train, test, labels.size(), cfg.finetune)) {
        write_text(predictions_file(a.out, r.seed), format_predictions(test_docs, r.predictions, labels));
        std::string losses;
        for (std::size_t i = 0; i < r.train_loss_history.size(); ++i) {
            LossRecord rec{i, r.train_loss_history[i]};
            losses += format_loss_history(std::span(&rec, 1));
        }
        write_text(a.out / ("train_loss_seed" + std::to_string(r.seed) + ".csv"), losses);
        spdlog::info("finetune: seed {} done", r.seed);
    }
    write_snapshot(cfg, a.out, true);
}

struct EvaluateArgs {
    fs::path test;
    std::vector<std::string> predictions;
    std::vector<std::string> names;
    fs::path out;
};

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> lines;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

// Seeds in numeric order, taken from predictions_seed<s>.csv names.
std::vector<std::pair<std::uint64_t, fs::path>> prediction_files(const fs::path& dir) {
    std::vector<std::pair<std::uint64_t, fs::path>> out;
    const std::string prefix = "predictions_seed";
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".csv") {
            continue;
        }
        const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 4);
        std::uint64_t seed = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
        if (ec == std::errc() && ptr == digits.data() + digits.size()) {
            out.emplace_back(seed, entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

EvalReport evaluate_directory(const std::vector<Document>& test, const fs::path& dir, LabelMap& labels_out) {
    if (!fs::is_directory(dir)) {
        throw MissingFile("predictions directory not found: " + dir.string());
    }
    const fs::path label_file = dir / "labels.txt";
    labels_out = fs::exists(label_file) ? LabelMap(read_lines(label_file)) : LabelMap::from_documents(test);

    std::map<std::int64_t, int> truth;
    for (const Document& d : test) {
        truth[d.id] = labels_out.index(d.label.value_or(""));
    }
    std::vector<SeedEvaluation> runs;
    for (const auto& [seed, path] : prediction_files(dir)) {
        std::vector<int> y_true;
        std::vector<int> y_pred;
        std::map<std::int64_t, bool> seen;
        for (const std::string& line : read_lines(path)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) {
                throw std::runtime_error(path.string() + ": malformed line '" + line + "'");
            }
            const std::int64_t id = std::stoll(line.substr(0, comma));
            const auto it = truth.find(id);
            if (it == truth.end() || seen[id]) {
                throw std::runtime_error(path.string() + ": unexpected or repeated document id " + std::to_string(id));
            }
            seen[id] = true;
            y_true.push_back(it->second);
            y_pred.push_back(labels_out.index(line.substr(comma + 1)));
        }
        if (y_true.size() != truth.size()) {
            throw std::runtime_error(path.string() + ": covers " + std::to_string(y_true.size()) + " of " +
                                     std::to_string(truth.size()) + " test documents");
        }
        runs.push_back({seed, confusion(y_true, y_pred, labels_out.size())});
    }
    if (runs.empty()) {
        throw MissingFile("no predictions_seed<s>.csv files in " + dir.string());
    }
    return aggregate(runs);
}

std::string run_evaluate(const PipelineConfig& cfg, const EvaluateArgs& a) {
    require_file(a.test, "test file");
    if (a.predictions.empty()) {
        throw CLI::ValidationError("--predictions", "at least one directory is required");
    }
    if (!a.names.empty() && a.names.size() != a.predictions.size()) {
        throw CLI::ValidationError("--name", "give one name per --predictions directory");
    }
    const auto test = read_labeled(a.test);
    std::vector<std::pair<std::string, Scores>> rows;
    fs::create_directories(a.out);
    for (std::size_t k = 0; k < a.predictions.size(); ++k) {
        const std::string name = a.names.empty() ? fs::path(a.predictions[k]).filename().string() : a.names[k];
        LabelMap labels;
        const EvalReport report = evaluate_directory(test, a.predictions[k], labels);
        write_text(a.out / ("report_" + name + ".txt"), format_report(report, labels.labels()));
        rows.emplace_back(name, report.mean);
    }
    const std::string table = format_score_table(rows);
    write_text(a.out / "scores.csv", table);
    write_snapshot(cfg, a.out, true);
    return table;
}

struct SizeArgs {
    fs::path rows;
    fs::path arch;
};

std::string run_size_report(const SizeArgs& a) {
    require_file(a.rows, "rows file");
    ModelConfig arch = ModelConfig::bert_base(0);
    if (!a.arch.empty()) {
        require_file(a.arch, "architecture config");
        arch = load_config(a.arch).model;
    }
    const auto rows = read_size_rows(a.rows);
    return format_size_table(size_table(rows, arch));
}

void run_all(const PipelineConfig& cfg, const fs::path& out) {
    require_file(cfg.corpus_path, "[paths] corpus");
    require_file(cfg.labeled_path, "[paths] labeled");
    const fs::path corpus = run_preprocess(cfg, {cfg.corpus_path, false, out / "corpus"});
    const auto [pretrain_part, heldout] = run_split(cfg, {corpus, false, out / "corpus_split"});
    const fs::path vocab = out / "vocab.txt";
    run_train_tokenizer(cfg, {pretrain_part, vocab});
    const fs::path ckpt = run_pretrain(cfg, {pretrain_part, vocab, out / "pretrain"});

    const fs::path labeled = run_preprocess(cfg, {cfg.labeled_path, true, out / "labeled"});
    const auto [train, test] = run_split(cfg, {labeled, true, out / "labeled_split"});
    run_finetune(cfg, {ckpt, vocab, train, test, out / "finetune"});
    const std::string table =
        run_evaluate(cfg, {test, {(out / "finetune").string()}, {"demo"}, out / "evaluate"});
    write_snapshot(cfg, out, true);
    std::cout << table;
}

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("dialectbert");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("DIALECTBERT_LOG")) {
        spdlog::set_level(spdlog::level::from_str(env));
    }
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Dialect BERT pipeline: preprocessing, tokenizer, pre-training, fine-tuning, evaluation."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dialectbert 0.1.0");

    Common common;
    std::function<void()> action;

    PreprocessArgs pre;
    auto* c_pre = app.add_subcommand("preprocess", "Anonymize, clean, deduplicate and length-filter a corpus");
    add_common(c_pre, common);
    c_pre->add_option("--input", pre.input, "Corpus file (or label<TAB>text with --labeled)")->required();
    c_pre->add_flag("--labeled", pre.labeled, "Input is label<TAB>text");
    c_pre->callback([&] {
        action = [&] {
            const auto cfg = resolve(common);
            cfg.validate();
            pre.out = common.out;
            run_preprocess(cfg, pre);
        };
    });

    SplitArgs sp;
    std::optional<double> train_fraction;
    auto* c_split = app.add_subcommand("split", "Deterministic train/test split ([split] or [corpus_split])");
    add_common(c_split, common);
    c_split->add_option("--input", sp.input, "Corpus or labeled file")->required();
    c_split->add_flag("--labeled", sp.labeled, "Input is label<TAB>text; uses [split]");
    c_split->add_option("--train-fraction", train_fraction, "Overrides the configured fraction");
    c_split->callback([&] {
        action = [&] {
            auto cfg = resolve(common);
            if (train_fraction) {
                (sp.labeled ? cfg.split : cfg.corpus_split).train_fraction = *train_fraction;
            }
            cfg.validate();
            sp.out = common.out;
            run_split(cfg, sp);
        };
    });

    TokenizerArgs tok;
    std::optional<std::size_t> vocab_size;
    std::optional<std::size_t> min_freq;
    auto* c_tok = app.add_subcommand("train-tokenizer", "Train a WordPiece vocabulary");
    add_common(c_tok, common);
    c_tok->add_option("--corpus", tok.corpus, "Preprocessed corpus file")->required();
    c_tok->add_option("--vocab-size", vocab_size, "Maximum vocabulary size");
    c_tok->add_option("--min-freq", min_freq, "Minimum character and pair frequency");
    c_tok->callback([&] {
        action = [&] {
            auto cfg = resolve(common);
            if (vocab_size) {
                cfg.tokenizer.vocab_size = *vocab_size;
            }
            if (min_freq) {
                cfg.tokenizer.min_frequency = *min_freq;
            }
            cfg.validate();
            tok.out = common.out;
            run_train_tokenizer(cfg, tok);
        };
    });

    PretrainArgs pt;
    auto* c_pt = app.add_subcommand("pretrain", "Masked-language-model pre-training");
    add_common(c_pt, common);
    c_pt->add_option("--corpus", pt.corpus, "Preprocessed corpus file")->required();
    c_pt->add_option("--vocab", pt.vocab, "Vocabulary file")->required();
    c_pt->callback([&] {
        action = [&] {
            const auto cfg = resolve(common);
            cfg.validate();
            pt.out = common.out;
            run_pretrain(cfg, pt);
        };
    });

    FinetuneArgs ft;
    std::vector<std::uint64_t> seeds;
    auto* c_ft = app.add_subcommand("finetune", "Fine-tune a [CLS] classifier once per seed and predict");
    add_common(c_ft, common);
    c_ft->add_option("--checkpoint", ft.checkpoint, "Pre-trained checkpoint")->required();
    c_ft->add_option("--vocab", ft.vocab, "Vocabulary the checkpoint was trained with")->required();
    c_ft->add_option("--train", ft.train, "Labeled training file")->required();
    c_ft->add_option("--test", ft.test, "Labeled test file")->required();
    c_ft->add_option("--seeds", seeds, "Comma-separated seeds (default: [finetune] seeds)")->delimiter(',');
    c_ft->callback([&] {
        action = [&] {
            auto cfg = resolve(common);
            if (!seeds.empty()) {
                cfg.finetune.seeds = seeds;
            }
            cfg.validate();
            ft.out = common.out;
            run_finetune(cfg, ft);
        };
    });

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "Score prediction directories against a labeled test file");
    add_common(c_ev, common);
    c_ev->add_option("--test", ev.test, "Labeled test file")->required();
    c_ev->add_option("--predictions", ev.predictions, "Directory of predictions_seed<s>.csv (repeatable)")
        ->required();
    c_ev->add_option("--name", ev.names, "Model name for each --predictions directory");
    c_ev->callback([&] {
        action = [&] {
            const auto cfg = resolve(common);
            cfg.validate();
            ev.out = common.out;
            std::cout << run_evaluate(cfg, ev);
        };
    });

    SizeArgs sz;
    auto* c_sz = app.add_subcommand("size-report", "Parameter counts and disk sizes per vocabulary");
    add_common(c_sz, common, false);
    c_sz->add_option("--rows", sz.rows, "CSV with model,vocab_label,vocab_size")->required();
    c_sz->add_option("--arch", sz.arch, "Config whose [model] section gives the architecture");
    c_sz->callback([&] {
        action = [&] {
            const std::string table = run_size_report(sz);
            std::cout << table;
            if (!common.out.empty()) {
                fs::create_directories(common.out);
                write_text(fs::path(common.out) / "size_report.txt", table);
            }
        };
    });

    auto* c_all = app.add_subcommand("run-all", "Full pipeline on the corpus and labeled set named in --config");
    add_common(c_all, common);
    c_all->callback([&] {
        action = [&] {
            if (common.config.empty()) {
                throw CLI::RequiredError("--config");
            }
            const auto cfg = resolve(common);
            cfg.validate();
            run_all(cfg, common.out);
        };
    });

    try {
        app.parse(argc, argv);
        action();
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    } catch (const MissingFile& e) {
        spdlog::error("{}", e.what());
        return kMissingFile;
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kProcessing;
    }
    return kOk;
}
