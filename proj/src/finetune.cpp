#include "dialectbert/finetune.hpp"

#include "dialectbert/adam.hpp"
#include "dialectbert/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace dialectbert {

namespace {
constexpr std::uint64_t kHeadStream = 0x48454144;
constexpr std::uint64_t kShuffleStream = 0x53485546;
constexpr std::uint64_t kDropoutStream = 0x44524F50;
}  // namespace

LabelMap::LabelMap(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (const auto& l : labels_) {
        if (l.empty()) {
            throw std::invalid_argument("empty label in label map");
        }
        if (!seen.insert(l).second) {
            throw std::invalid_argument("duplicate label '" + l + "' in label map");
        }
    }
}

LabelMap LabelMap::from_documents(const std::vector<Document>& docs) {
    std::set<std::string> labels;
    for (const Document& d : docs) {
        if (!d.label) {
            throw std::invalid_argument("document " + std::to_string(d.id) + " has no label");
        }
        labels.insert(*d.label);
    }
    return LabelMap(std::vector<std::string>(labels.begin(), labels.end()));
}

int LabelMap::index(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
        throw std::invalid_argument("unknown label '" + label + "'");
    }
    return static_cast<int>(it - labels_.begin());
}

const std::string& LabelMap::label(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= labels_.size()) {
        throw std::out_of_range("class index " + std::to_string(index) + " outside label map of " +
                                std::to_string(labels_.size()));
    }
    return labels_[static_cast<std::size_t>(index)];
}

std::vector<std::uint64_t> default_finetune_seeds() {
    return {1, 7, 42, 123, 1234, 2021, 4096, 31337, 65537, 271828};
}

void FinetuneConfig::validate() const {
    if (seeds.empty()) {
        throw std::invalid_argument("finetune: at least one seed is required");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("finetune: batch_size must be at least 1");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("finetune: learning_rate must be positive");
    }
    if (max_len < 3) {
        throw std::invalid_argument("finetune: max_len must be at least 3");
    }
}

std::vector<Example> make_examples(const std::vector<Document>& docs, const Vocabulary& vocab,
                                   const LabelMap& labels, std::size_t max_len) {
    std::vector<Example> out;
    out.reserve(docs.size());
    for (const Document& d : docs) {
        if (!d.label) {
            throw std::invalid_argument("document " + std::to_string(d.id) + " has no label");
        }
        out.push_back({encode(vocab, d.text, max_len, true), labels.index(*d.label)});
    }
    return out;
}

std::vector<Encoding> encode_documents(const std::vector<Document>& docs, const Vocabulary& vocab,
                                       std::size_t max_len) {
    std::vector<Encoding> out;
    out.reserve(docs.size());
    for (const Document& d : docs) {
        out.push_back(encode(vocab, d.text, max_len, true));
    }
    return out;
}

EncoderModel finetune_once(const EncoderModel& pretrained, std::span<const Example> train, std::size_t num_classes,
                           const FinetuneConfig& config, std::uint64_t seed, std::vector<double>* loss_history) {
    config.validate();
    for (const Example& ex : train) {
        if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= num_classes) {
            throw std::invalid_argument("example label " + std::to_string(ex.label) + " outside " +
                                        std::to_string(num_classes) + " classes");
        }
    }
    EncoderModel model = pretrained.clone();
    model.init_classifier(num_classes, derive_seed(seed, kHeadStream));
    if (config.epochs == 0 || train.empty()) {
        return model;
    }

    std::vector<Tensor> params = model.parameter_tensors();
    AdamState adam = AdamState::for_parameters(params, config.learning_rate);
    Rng dropout_rng(derive_seed(seed, kDropoutStream));

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(derive_seed(seed, kShuffleStream), epoch));
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<Encoding> members;
            std::vector<int> targets;
            for (std::size_t i = start; i < end; ++i) {
                members.push_back(train[order[i]].encoding);
                targets.push_back(train[order[i]].label);
            }
            const TokenBatch batch = TokenBatch::from_encodings(members);
            const Tensor hidden = model.forward_encoder(batch, &dropout_rng);
            const Tensor loss = cross_entropy(model.cls_logits(hidden, &dropout_rng), targets);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw std::runtime_error("non-finite fine-tuning loss (seed " + std::to_string(seed) + ")");
            }
            if (loss_history) {
                loss_history->push_back(value);
            }
            zero_grads(params);
            loss.backward();
            adam_step(params, adam);
        }
    }
    zero_grads(params);
    return model;
}

std::vector<int> predict(const EncoderModel& model, std::span<const Encoding> docs, std::size_t batch_size) {
    if (model.num_classes() == 0) {
        throw std::logic_error("predict: model has no classification head");
    }
    batch_size = std::max<std::size_t>(batch_size, 1);
    NoGradGuard no_grad;
    std::vector<int> out;
    out.reserve(docs.size());
    const std::size_t c = model.num_classes();
    for (std::size_t start = 0; start < docs.size(); start += batch_size) {
        const std::size_t end = std::min(docs.size(), start + batch_size);
        const TokenBatch batch = TokenBatch::from_encodings(docs.subspan(start, end - start));
        const Tensor logits = model.cls_logits(model.forward_encoder(batch));
        const auto values = logits.data();
        for (std::size_t b = 0; b < end - start; ++b) {
            const auto row = values.subspan(b * c, c);
            out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
    }
    return out;
}

std::vector<RunResult> run_protocol(const EncoderModel& pretrained, std::span<const Example> train,
                                    std::span<const Encoding> test, std::size_t num_classes,
                                    const FinetuneConfig& config) {
    config.validate();
    std::vector<RunResult> results;
    results.reserve(config.seeds.size());
    for (const std::uint64_t seed : config.seeds) {
        RunResult r;
        r.seed = seed;
        const EncoderModel tuned = finetune_once(pretrained, train, num_classes, config, seed, &r.train_loss_history);
        r.predictions = predict(tuned, test);
        results.push_back(std::move(r));
    }
    return results;
}

std::string format_predictions(const std::vector<Document>& test, std::span<const int> predictions,
                               const LabelMap& labels) {
    if (test.size() != predictions.size()) {
        throw std::invalid_argument("predictions (" + std::to_string(predictions.size()) +
                                    ") do not align with test set (" + std::to_string(test.size()) + ")");
    }
    std::string out;
    for (std::size_t i = 0; i < test.size(); ++i) {
        out += std::to_string(test[i].id);
        out += ',';
        out += labels.label(predictions[i]);
        out += '\n';
    }
    return out;
}

}  // namespace dialectbert
