#include "dialectbert/pretrain.hpp"

#include "dialectbert/adam.hpp"
#include "dialectbert/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace dialectbert {

namespace {
constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kCollateStream = 0x434F;
constexpr std::uint64_t kDropoutStream = 0x4452;
}  // namespace

void PretrainConfig::validate() const {
    if (!(mask_probability >= 0.0 && mask_probability < 1.0)) {
        throw std::invalid_argument("pretrain: mask_probability must be in [0, 1)");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("pretrain: batch_size must be at least 1");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("pretrain: learning_rate must be positive");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
        throw std::invalid_argument("pretrain: warmup_fraction must be in [0, 1]");
    }
    if (max_len < 3) {
        throw std::invalid_argument("pretrain: max_len must be at least 3");
    }
}

std::vector<std::size_t> MlmBatch::selected_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kIgnoreLabel) {
            out.push_back(i);
        }
    }
    return out;
}

MlmBatch collate_mlm(std::span<const Encoding> encodings, std::size_t vocab_size, double mask_probability,
                     Rng& rng) {
    if (!(mask_probability >= 0.0 && mask_probability <= 1.0)) {
        throw std::invalid_argument("mask_probability must be in [0, 1]");
    }
    const TokenBatch tokens = TokenBatch::from_encodings(encodings);
    MlmBatch out;
    out.batch = tokens.batch;
    out.seq = tokens.seq;
    out.input_ids = tokens.ids;
    out.attention_mask = tokens.attention_mask;
    out.labels.assign(tokens.ids.size(), kIgnoreLabel);

    const bool can_randomize = vocab_size > static_cast<std::size_t>(kNumSpecialTokens);
    std::vector<std::size_t> eligible;
    for (std::size_t b = 0; b < out.batch; ++b) {
        eligible.clear();
        for (std::size_t s = 0; s < out.seq; ++s) {
            const std::size_t i = b * out.seq + s;
            const int id = out.input_ids[i];
            if (out.attention_mask[i] && id != kPadId && id != kClsId && id != kSepId) {
                eligible.push_back(i);
            }
        }
        std::vector<std::size_t> chosen;
        for (const std::size_t i : eligible) {
            if (rng.uniform() < mask_probability) {
                chosen.push_back(i);
            }
        }
        if (chosen.empty() && !eligible.empty() && mask_probability > 0.0) {
            chosen.push_back(eligible[rng.below(eligible.size())]);
        }
        for (const std::size_t i : chosen) {
            out.labels[i] = out.input_ids[i];
            const double r = rng.uniform();
            if (r < 0.8) {
                out.input_ids[i] = kMaskId;
            } else if (r < 0.9 && can_randomize) {
                out.input_ids[i] =
                    kNumSpecialTokens + static_cast<int>(rng.below(vocab_size - kNumSpecialTokens));
            }
        }
    }
    return out;
}

Tensor mlm_loss(const EncoderModel& model, const MlmBatch& batch, Rng* dropout_rng) {
    const auto positions = batch.selected_positions();
    if (positions.empty()) {
        return Tensor::scalar(0.0);
    }
    const Tensor hidden = model.forward_encoder(batch.tokens(), dropout_rng);
    const Tensor logits = model.mlm_logits_at(hidden, positions);
    std::vector<int> targets;
    targets.reserve(positions.size());
    for (const std::size_t p : positions) {
        targets.push_back(batch.labels[p]);
    }
    return cross_entropy(logits, targets);
}

PretrainResult pretrain_loop(std::span<const Encoding> corpus, EncoderModel& model, const PretrainConfig& config,
                             const CheckpointCallback& on_checkpoint) {
    config.validate();
    PretrainResult result;
    if (config.epochs == 0 || corpus.empty()) {
        return result;
    }
    std::vector<Tensor> params = model.parameter_tensors();
    AdamState adam = AdamState::for_parameters(params, config.learning_rate);

    const std::size_t batches_per_epoch = (corpus.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = batches_per_epoch * config.epochs;
    const auto warmup_steps = static_cast<std::size_t>(
        std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(corpus.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(derive_seed(config.seed, kShuffleStream), epoch));
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            ++step;
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<Encoding> members;
            members.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                members.push_back(corpus[order[i]]);
            }
            Rng collate_rng(derive_seed(derive_seed(config.seed, kCollateStream), step));
            Rng dropout_rng(derive_seed(derive_seed(config.seed, kDropoutStream), step));
            const MlmBatch batch = collate_mlm(members, model.config().vocab_size, config.mask_probability,
                                               collate_rng);

            const Tensor loss = mlm_loss(model, batch, &dropout_rng);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw std::runtime_error("non-finite MLM loss at step " + std::to_string(step));
            }
            result.history.push_back({step, value});
            if (loss.requires_grad()) {
                zero_grads(params);
                loss.backward();
                adam.learning_rate =
                    warmup_steps > 0 && step <= warmup_steps
                        ? config.learning_rate * static_cast<double>(step) / static_cast<double>(warmup_steps)
                        : config.learning_rate;
                adam_step(params, adam);
            }
            if (on_checkpoint && config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0) {
                on_checkpoint(model, step);
            }
        }
    }
    zero_grads(params);
    return result;
}

PretrainResult pretrain_loop(const std::vector<Document>& corpus, const Vocabulary& vocab, EncoderModel& model,
                             const PretrainConfig& config, const CheckpointCallback& on_checkpoint) {
    if (vocab.size() != model.config().vocab_size) {
        throw std::invalid_argument("model vocab_size " + std::to_string(model.config().vocab_size) +
                                    " does not match vocabulary of " + std::to_string(vocab.size()) + " tokens");
    }
    std::vector<Encoding> encodings;
    encodings.reserve(corpus.size());
    for (const Document& doc : corpus) {
        encodings.push_back(encode(vocab, doc.text, config.max_len, true));
    }
    return pretrain_loop(encodings, model, config, on_checkpoint);
}

std::string format_loss_history(std::span<const LossRecord> history) {
    std::string out;
    char buf[64];
    for (const LossRecord& r : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", r.step, r.loss);
        out += buf;
    }
    return out;
}

std::vector<double> window_means(std::span<const LossRecord> history, std::size_t window) {
    std::vector<double> out;
    if (window == 0) {
        return out;
    }
    for (std::size_t start = 0; start + window <= history.size(); start += window) {
        double total = 0.0;
        for (std::size_t i = start; i < start + window; ++i) {
            total += history[i].loss;
        }
        out.push_back(total / static_cast<double>(window));
    }
    return out;
}

}  // namespace dialectbert
