#pragma once

#include "dialectbert/corpus.hpp"
#include "dialectbert/model.hpp"
#include "dialectbert/tokenizer.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dialectbert {

class Rng;

inline constexpr int kIgnoreLabel = -1;

struct PretrainConfig {
    double mask_probability = 0.25;
    std::size_t batch_size = 64;
    std::size_t epochs = 1;
    std::uint64_t seed = 42;
    double learning_rate = 5e-5;
    /// Linear warmup over this fraction of all steps, constant afterwards.
    double warmup_fraction = 0.01;
    /// Steps between intermediate checkpoints; 0 disables them.
    std::size_t checkpoint_interval = 0;
    std::size_t max_len = 64;

    void validate() const;
};

/// Corrupted inputs plus labels that hold the original id on selected positions
/// and kIgnoreLabel everywhere else.
struct MlmBatch {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::vector<int> input_ids;
    std::vector<int> labels;
    std::vector<std::uint8_t> attention_mask;

    TokenBatch tokens() const { return {batch, seq, input_ids, attention_mask}; }
    std::vector<std::size_t> selected_positions() const;
};

/// Selects each non-special, non-padding position with `mask_probability`; a
/// sequence with eligible positions but no draw gets one position picked uniformly
/// (only when the probability is positive). Selected positions become [MASK] 80% of
/// the time, a uniform non-special token 10%, and stay unchanged 10%.
MlmBatch collate_mlm(std::span<const Encoding> encodings, std::size_t vocab_size, double mask_probability,
                     Rng& rng);

/// Mean cross-entropy over selected positions. Zero scalar (no graph) when none are selected.
Tensor mlm_loss(const EncoderModel& model, const MlmBatch& batch, Rng* dropout_rng = nullptr);

struct LossRecord {
    std::size_t step = 0;
    double loss = 0.0;

    bool operator==(const LossRecord&) const = default;
};

struct PretrainResult {
    std::vector<LossRecord> history;
};

using CheckpointCallback = std::function<void(const EncoderModel&, std::size_t step)>;

/// epochs x batches of: collate -> forward -> masked cross-entropy -> backward -> Adam.
/// Each batch draws collation and dropout randomness from streams derived from
/// (seed, step), so results do not depend on scheduling. Throws std::runtime_error
/// naming the step when the loss is not finite.
PretrainResult pretrain_loop(std::span<const Encoding> corpus, EncoderModel& model, const PretrainConfig& config,
                             const CheckpointCallback& on_checkpoint = {});

PretrainResult pretrain_loop(const std::vector<Document>& corpus, const Vocabulary& vocab, EncoderModel& model,
                             const PretrainConfig& config, const CheckpointCallback& on_checkpoint = {});

/// "step,loss" lines, losses printed with round-trip precision.
std::string format_loss_history(std::span<const LossRecord> history);

/// Means of consecutive non-overlapping windows (the last partial window is dropped).
std::vector<double> window_means(std::span<const LossRecord> history, std::size_t window);

}  // namespace dialectbert
