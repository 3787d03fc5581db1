#pragma once

#include "dialectbert/tensor.hpp"
#include "dialectbert/tokenizer.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dialectbert {

struct ModelConfig {
    std::size_t vocab_size = 50000;
    std::size_t hidden = 768;
    std::size_t layers = 12;
    std::size_t heads = 12;
    std::size_t intermediate = 3072;
    std::size_t max_positions = 512;
    std::size_t type_vocab = 2;
    double dropout = 0.1;
    double init_std = 0.02;
    double layer_norm_eps = 1e-12;
    /// Route the classifier through the tanh pooler instead of the raw [CLS] state.
    bool pooled_classifier = false;

    /// Throws std::invalid_argument on zero sizes, hidden % heads != 0 or a bad dropout rate.
    void validate() const;

    /// 12 layers, 12 heads, hidden 768, intermediate 3072, 512 positions, 2 segment types.
    static ModelConfig bert_base(std::size_t vocab_size);

    bool operator==(const ModelConfig&) const = default;
};

enum class ParameterGroup { encoder, mlm_head, classifier };

struct NamedParameter {
    std::string name;
    Tensor tensor;
    ParameterGroup group;
};

/// B x S token ids with the matching attention mask, row-major.
struct TokenBatch {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> attention_mask;

    /// All encodings must share one length.
    static TokenBatch from_encodings(std::span<const Encoding> encodings);
};

/// BERT-style encoder: token/position/segment embeddings, post-LN self-attention
/// blocks, tanh pooler, an MLM head whose output projection is tied to the token
/// embeddings, and an optional [CLS] classification head.
///
/// Copying is explicit through `clone()`; parameter tensors are shared handles.
class EncoderModel {
public:
    EncoderModel(const ModelConfig& config, std::uint64_t seed);

    EncoderModel(EncoderModel&&) noexcept = default;
    EncoderModel& operator=(EncoderModel&&) noexcept = default;
    EncoderModel(const EncoderModel&) = delete;
    EncoderModel& operator=(const EncoderModel&) = delete;

    EncoderModel clone() const;

    const ModelConfig& config() const { return config_; }

    /// Fresh linear head H -> num_classes, weights ~ truncated normal, zero bias.
    void init_classifier(std::size_t num_classes, std::uint64_t seed);
    std::size_t num_classes() const { return num_classes_; }

    /// Hidden states [B, S, H]. Dropout is active only when `dropout_rng` is given.
    /// `attention_probs`, when non-null, receives each layer's [B*A, S, S] probabilities.
    Tensor forward_encoder(const TokenBatch& batch, Rng* dropout_rng = nullptr,
                           std::vector<Tensor>* attention_probs = nullptr) const;

    /// MLM logits [B, S, V] at every position.
    Tensor mlm_logits(const Tensor& hidden) const;
    /// MLM logits [k, V] at flat positions (b * S + s) only.
    Tensor mlm_logits_at(const Tensor& hidden, std::span<const std::size_t> flat_positions) const;

    /// Classifier logits [B, C] from hidden[:, 0, :].
    Tensor cls_logits(const Tensor& hidden, Rng* dropout_rng = nullptr) const;

    /// Tanh pooler over the [CLS] state, [B, H].
    Tensor pooled(const Tensor& hidden) const;

    const std::vector<NamedParameter>& parameters() const { return params_; }
    std::vector<Tensor> parameter_tensors() const;
    std::vector<Tensor> parameter_tensors(ParameterGroup group) const;
    std::size_t parameter_count() const;
    std::size_t parameter_count(ParameterGroup group) const;

    const Tensor& word_embeddings() const { return word_embeddings_; }

private:
    EncoderModel() = default;

    struct Layer {
        Tensor query_w, query_b, key_w, key_b, value_w, value_b, attn_out_w, attn_out_b;
        Tensor attn_ln_g, attn_ln_b;
        Tensor ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
        Tensor ffn_ln_g, ffn_ln_b;
    };

    void register_parameters();

    ModelConfig config_;
    std::size_t num_classes_ = 0;

    Tensor word_embeddings_, position_embeddings_, type_embeddings_;
    Tensor embed_ln_g_, embed_ln_b_;
    std::vector<Layer> layers_;
    Tensor pooler_w_, pooler_b_;
    Tensor mlm_dense_w_, mlm_dense_b_, mlm_ln_g_, mlm_ln_b_, mlm_bias_;
    Tensor classifier_w_, classifier_b_;

    std::vector<NamedParameter> params_;
};

/// Binary checkpoint, little-endian:
///   magic "DBCKPT\r\n", u32 version, u32 value width (8 = f64, 4 = f32),
///   config: u64 V H L A I P T, f64 dropout init_std ln_eps, u8 pooled, u64 classes,
///   u64 tensor count, then per tensor: u32 name length, name, u32 rank,
///   u64 dims[rank], values.
/// f64 checkpoints round-trip bit-exactly; f32 is the compact storage option.
void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path, int value_width = 8);
EncoderModel load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace dialectbert
