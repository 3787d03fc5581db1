#pragma once

#include "dialectbert/corpus.hpp"
#include "dialectbert/finetune.hpp"
#include "dialectbert/model.hpp"
#include "dialectbert/pretrain.hpp"
#include "dialectbert/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace dialectbert {

/// Bad syntax, unknown section/key, unparsable value or failed validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    /// Model initialisation seed; `--seed` also overrides the pretrain and split seeds.
    std::uint64_t seed = 42;

    /// Inputs for run-all. Relative paths resolve against the config file's directory.
    std::filesystem::path corpus_path;
    std::filesystem::path labeled_path;

    /// vocab_size here is only used by size-report; training takes it from the vocabulary.
    ModelConfig model;
    WordPieceOptions tokenizer;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    SplitSpec split{0.75, 42, true};
    /// Held-out fraction of the unlabeled corpus kept out of pre-training.
    SplitSpec corpus_split{0.9, 42, false};

    void override_seed(std::uint64_t s);
    /// Throws ConfigError. Checks every section and that configured paths exist.
    void validate() const;
};

/// Line-oriented INI: "[section]" headers, "key = value" lines, ';' or '#' comments.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Every field, defaults included, in a form parse_config reads back.
std::string to_ini(const PipelineConfig& config);

}  // namespace dialectbert
