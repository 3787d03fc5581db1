#pragma once

#include "dialectbert/corpus.hpp"
#include "dialectbert/model.hpp"
#include "dialectbert/tokenizer.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dialectbert {

/// Label string <-> class index. Indices follow the sorted label order.
class LabelMap {
public:
    LabelMap() = default;
    /// Throws std::invalid_argument on duplicates or an empty label.
    explicit LabelMap(std::vector<std::string> labels);

    /// Sorted distinct labels of `docs`; every document must carry one.
    static LabelMap from_documents(const std::vector<Document>& docs);

    std::size_t size() const { return labels_.size(); }
    /// Throws std::invalid_argument("unknown label '<x>'").
    int index(const std::string& label) const;
    const std::string& label(int index) const;
    const std::vector<std::string>& labels() const { return labels_; }

    bool operator==(const LabelMap&) const = default;

private:
    std::vector<std::string> labels_;
};

/// Ten fixed seeds used when none are given.
std::vector<std::uint64_t> default_finetune_seeds();

struct FinetuneConfig {
    std::size_t epochs = 1;
    std::vector<std::uint64_t> seeds = default_finetune_seeds();
    std::size_t batch_size = 8;
    double learning_rate = 5e-5;
    std::size_t max_len = 64;

    void validate() const;
};

struct Example {
    Encoding encoding;
    int label = 0;
};

/// Encodes labeled documents; unknown labels throw naming the label.
std::vector<Example> make_examples(const std::vector<Document>& docs, const Vocabulary& vocab,
                                   const LabelMap& labels, std::size_t max_len);
std::vector<Encoding> encode_documents(const std::vector<Document>& docs, const Vocabulary& vocab,
                                       std::size_t max_len);

/// Copy of `pretrained` with a fresh head seeded from `seed`, trained for
/// `config.epochs` passes. The seed also drives shuffling and dropout.
EncoderModel finetune_once(const EncoderModel& pretrained, std::span<const Example> train, std::size_t num_classes,
                           const FinetuneConfig& config, std::uint64_t seed,
                           std::vector<double>* loss_history = nullptr);

/// Argmax of the classifier logits; ties go to the lowest class index.
std::vector<int> predict(const EncoderModel& model, std::span<const Encoding> docs, std::size_t batch_size = 32);

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<int> predictions;
    std::vector<double> train_loss_history;
};

/// One fine-tune + predict per seed, in seed order.
std::vector<RunResult> run_protocol(const EncoderModel& pretrained, std::span<const Example> train,
                                    std::span<const Encoding> test, std::size_t num_classes,
                                    const FinetuneConfig& config);

/// "doc_id,predicted_label" lines.
std::string format_predictions(const std::vector<Document>& test, std::span<const int> predictions,
                               const LabelMap& labels);

}  // namespace dialectbert
