#include "dialectbert/model.hpp"

#include "dialectbert/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dialectbert {

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) {
            throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
        }
    };
    positive(vocab_size, "vocab_size");
    positive(hidden, "hidden");
    positive(layers, "layers");
    positive(heads, "heads");
    positive(intermediate, "intermediate");
    positive(max_positions, "max_positions");
    positive(type_vocab, "type_vocab");
    if (hidden % heads != 0) {
        throw std::invalid_argument("model config: hidden " + std::to_string(hidden) +
                                    " is not divisible by heads " + std::to_string(heads));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw std::invalid_argument("model config: dropout must be in [0, 1)");
    }
    if (!(init_std > 0.0) || !(layer_norm_eps > 0.0)) {
        throw std::invalid_argument("model config: init_std and layer_norm_eps must be positive");
    }
}

ModelConfig ModelConfig::bert_base(std::size_t vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    return c;
}

TokenBatch TokenBatch::from_encodings(std::span<const Encoding> encodings) {
    TokenBatch batch;
    if (encodings.empty()) {
        throw std::invalid_argument("cannot build a batch from zero encodings");
    }
    batch.batch = encodings.size();
    batch.seq = encodings.front().ids.size();
    for (const Encoding& e : encodings) {
        if (e.ids.size() != batch.seq || e.attention_mask.size() != batch.seq) {
            throw std::invalid_argument("encodings in a batch must share one padded length");
        }
        batch.ids.insert(batch.ids.end(), e.ids.begin(), e.ids.end());
        batch.attention_mask.insert(batch.attention_mask.end(), e.attention_mask.begin(), e.attention_mask.end());
    }
    return batch;
}

namespace {

Tensor init_weight(Rng& rng, Shape shape, double stddev) {
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) {
        v = rng.truncated_normal(stddev);
    }
    return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }
Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace

EncoderModel::EncoderModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const std::size_t V = config_.vocab_size;
    const std::size_t H = config_.hidden;
    const std::size_t I = config_.intermediate;
    const double sd = config_.init_std;

    word_embeddings_ = init_weight(rng, {V, H}, sd);
    position_embeddings_ = init_weight(rng, {config_.max_positions, H}, sd);
    type_embeddings_ = init_weight(rng, {config_.type_vocab, H}, sd);
    embed_ln_g_ = ones_param({H});
    embed_ln_b_ = zeros_param({H});
    for (std::size_t l = 0; l < config_.layers; ++l) {
        Layer layer;
        layer.query_w = init_weight(rng, {H, H}, sd);
        layer.query_b = zeros_param({H});
        layer.key_w = init_weight(rng, {H, H}, sd);
        layer.key_b = zeros_param({H});
        layer.value_w = init_weight(rng, {H, H}, sd);
        layer.value_b = zeros_param({H});
        layer.attn_out_w = init_weight(rng, {H, H}, sd);
        layer.attn_out_b = zeros_param({H});
        layer.attn_ln_g = ones_param({H});
        layer.attn_ln_b = zeros_param({H});
        layer.ffn_in_w = init_weight(rng, {H, I}, sd);
        layer.ffn_in_b = zeros_param({I});
        layer.ffn_out_w = init_weight(rng, {I, H}, sd);
        layer.ffn_out_b = zeros_param({H});
        layer.ffn_ln_g = ones_param({H});
        layer.ffn_ln_b = zeros_param({H});
        layers_.push_back(std::move(layer));
    }
    pooler_w_ = init_weight(rng, {H, H}, sd);
    pooler_b_ = zeros_param({H});
    mlm_dense_w_ = init_weight(rng, {H, H}, sd);
    mlm_dense_b_ = zeros_param({H});
    mlm_ln_g_ = ones_param({H});
    mlm_ln_b_ = zeros_param({H});
    mlm_bias_ = zeros_param({V});
    register_parameters();
}

void EncoderModel::register_parameters() {
    params_.clear();
    auto add = [this](std::string name, const Tensor& t, ParameterGroup g) {
        params_.push_back({std::move(name), t, g});
    };
    using G = ParameterGroup;
    add("embeddings.word_embeddings", word_embeddings_, G::encoder);
    add("embeddings.position_embeddings", position_embeddings_, G::encoder);
    add("embeddings.token_type_embeddings", type_embeddings_, G::encoder);
    add("embeddings.layer_norm.gamma", embed_ln_g_, G::encoder);
    add("embeddings.layer_norm.beta", embed_ln_b_, G::encoder);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const std::string p = "encoder.layer." + std::to_string(l) + ".";
        add(p + "attention.query.weight", layer.query_w, G::encoder);
        add(p + "attention.query.bias", layer.query_b, G::encoder);
        add(p + "attention.key.weight", layer.key_w, G::encoder);
        add(p + "attention.key.bias", layer.key_b, G::encoder);
        add(p + "attention.value.weight", layer.value_w, G::encoder);
        add(p + "attention.value.bias", layer.value_b, G::encoder);
        add(p + "attention.output.weight", layer.attn_out_w, G::encoder);
        add(p + "attention.output.bias", layer.attn_out_b, G::encoder);
        add(p + "attention.layer_norm.gamma", layer.attn_ln_g, G::encoder);
        add(p + "attention.layer_norm.beta", layer.attn_ln_b, G::encoder);
        add(p + "intermediate.weight", layer.ffn_in_w, G::encoder);
        add(p + "intermediate.bias", layer.ffn_in_b, G::encoder);
        add(p + "output.weight", layer.ffn_out_w, G::encoder);
        add(p + "output.bias", layer.ffn_out_b, G::encoder);
        add(p + "output.layer_norm.gamma", layer.ffn_ln_g, G::encoder);
        add(p + "output.layer_norm.beta", layer.ffn_ln_b, G::encoder);
    }
    add("pooler.weight", pooler_w_, G::encoder);
    add("pooler.bias", pooler_b_, G::encoder);
    add("mlm.transform.weight", mlm_dense_w_, G::mlm_head);
    add("mlm.transform.bias", mlm_dense_b_, G::mlm_head);
    add("mlm.transform.layer_norm.gamma", mlm_ln_g_, G::mlm_head);
    add("mlm.transform.layer_norm.beta", mlm_ln_b_, G::mlm_head);
    add("mlm.decoder.bias", mlm_bias_, G::mlm_head);
    if (num_classes_ > 0) {
        add("classifier.weight", classifier_w_, G::classifier);
        add("classifier.bias", classifier_b_, G::classifier);
    }
}

EncoderModel EncoderModel::clone() const {
    EncoderModel copy;
    copy.config_ = config_;
    copy.num_classes_ = num_classes_;
    auto dup = [](const Tensor& t) { return t.defined() ? t.clone() : Tensor(); };
    copy.word_embeddings_ = dup(word_embeddings_);
    copy.position_embeddings_ = dup(position_embeddings_);
    copy.type_embeddings_ = dup(type_embeddings_);
    copy.embed_ln_g_ = dup(embed_ln_g_);
    copy.embed_ln_b_ = dup(embed_ln_b_);
    for (const Layer& layer : layers_) {
        copy.layers_.push_back({dup(layer.query_w), dup(layer.query_b), dup(layer.key_w), dup(layer.key_b),
                                dup(layer.value_w), dup(layer.value_b), dup(layer.attn_out_w),
                                dup(layer.attn_out_b), dup(layer.attn_ln_g), dup(layer.attn_ln_b),
                                dup(layer.ffn_in_w), dup(layer.ffn_in_b), dup(layer.ffn_out_w),
                                dup(layer.ffn_out_b), dup(layer.ffn_ln_g), dup(layer.ffn_ln_b)});
    }
    copy.pooler_w_ = dup(pooler_w_);
    copy.pooler_b_ = dup(pooler_b_);
    copy.mlm_dense_w_ = dup(mlm_dense_w_);
    copy.mlm_dense_b_ = dup(mlm_dense_b_);
    copy.mlm_ln_g_ = dup(mlm_ln_g_);
    copy.mlm_ln_b_ = dup(mlm_ln_b_);
    copy.mlm_bias_ = dup(mlm_bias_);
    copy.classifier_w_ = dup(classifier_w_);
    copy.classifier_b_ = dup(classifier_b_);
    copy.register_parameters();
    return copy;
}

void EncoderModel::init_classifier(std::size_t num_classes, std::uint64_t seed) {
    if (num_classes < 2) {
        throw std::invalid_argument("a classifier needs at least 2 classes, got " + std::to_string(num_classes));
    }
    Rng rng(seed);
    num_classes_ = num_classes;
    classifier_w_ = init_weight(rng, {config_.hidden, num_classes}, config_.init_std);
    classifier_b_ = zeros_param({num_classes});
    register_parameters();
}

Tensor EncoderModel::forward_encoder(const TokenBatch& batch, Rng* dropout_rng,
                                     std::vector<Tensor>* attention_probs) const {
    const std::size_t B = batch.batch;
    const std::size_t S = batch.seq;
    const std::size_t H = config_.hidden;
    const std::size_t A = config_.heads;
    const std::size_t d = H / A;
    if (B == 0 || S == 0 || batch.ids.size() != B * S || batch.attention_mask.size() != B * S) {
        throw std::invalid_argument("token batch of " + std::to_string(B) + "x" + std::to_string(S) +
                                    " has inconsistent ids/mask sizes");
    }
    if (S > config_.max_positions) {
        throw std::invalid_argument("sequence length " + std::to_string(S) + " exceeds max_positions " +
                                    std::to_string(config_.max_positions));
    }
    for (const int id : batch.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
            throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                                    std::to_string(config_.vocab_size));
        }
    }
    const double p = dropout_rng ? config_.dropout : 0.0;
    auto drop = [&](const Tensor& t) { return p > 0.0 ? dropout(t, p, *dropout_rng) : t; };

    std::vector<int> positions(B * S);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = static_cast<int>(i % S);
    }
    const std::vector<int> segments(B * S, 0);
    Tensor x = add(add(embedding(word_embeddings_, batch.ids), embedding(position_embeddings_, positions)),
                   embedding(type_embeddings_, segments));
    x = drop(layer_norm(x, embed_ln_g_, embed_ln_b_, config_.layer_norm_eps));

    auto split_heads = [&](const Tensor& t) {
        return reshape(swap_axes(reshape(t, {B, S, A, d}), 1, 2), {B * A, S, d});
    };
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (const Layer& layer : layers_) {
        const Tensor q = split_heads(linear(x, layer.query_w, layer.query_b));
        const Tensor k = split_heads(linear(x, layer.key_w, layer.key_b));
        const Tensor v = split_heads(linear(x, layer.value_w, layer.value_b));
        Tensor probs = masked_softmax(scale(matmul(q, k, true), inv_sqrt_d), batch.attention_mask, B);
        if (attention_probs) {
            attention_probs->push_back(probs);
        }
        const Tensor context =
            reshape(swap_axes(reshape(matmul(drop(probs), v), {B, A, S, d}), 1, 2), {B * S, H});
        const Tensor attn = drop(linear(context, layer.attn_out_w, layer.attn_out_b));
        x = layer_norm(add(x, attn), layer.attn_ln_g, layer.attn_ln_b, config_.layer_norm_eps);
        const Tensor ffn =
            drop(linear(gelu(linear(x, layer.ffn_in_w, layer.ffn_in_b)), layer.ffn_out_w, layer.ffn_out_b));
        x = layer_norm(add(x, ffn), layer.ffn_ln_g, layer.ffn_ln_b, config_.layer_norm_eps);
    }
    return reshape(x, {B, S, H});
}

namespace {

void require_hidden(const Tensor& hidden, std::size_t H) {
    if (hidden.rank() != 3 || hidden.dim(2) != H) {
        throw std::invalid_argument("expected hidden states [B, S, " + std::to_string(H) + "], got " +
                                    shape_str(hidden.shape()));
    }
}

}  // namespace

Tensor EncoderModel::mlm_logits(const Tensor& hidden) const {
    require_hidden(hidden, config_.hidden);
    const std::size_t B = hidden.dim(0);
    const std::size_t S = hidden.dim(1);
    std::vector<std::size_t> all(B * S);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return reshape(mlm_logits_at(hidden, all), {B, S, config_.vocab_size});
}

Tensor EncoderModel::mlm_logits_at(const Tensor& hidden, std::span<const std::size_t> flat_positions) const {
    require_hidden(hidden, config_.hidden);
    const std::size_t rows = hidden.dim(0) * hidden.dim(1);
    const Tensor selected = gather_rows(reshape(hidden, {rows, config_.hidden}), flat_positions);
    const Tensor transformed = layer_norm(gelu(linear(selected, mlm_dense_w_, mlm_dense_b_)), mlm_ln_g_,
                                          mlm_ln_b_, config_.layer_norm_eps);
    return add_bias(matmul(transformed, word_embeddings_, true), mlm_bias_);
}

namespace {

Tensor cls_states(const Tensor& hidden) {
    const std::size_t B = hidden.dim(0);
    const std::size_t S = hidden.dim(1);
    std::vector<std::size_t> rows(B);
    for (std::size_t b = 0; b < B; ++b) {
        rows[b] = b * S;
    }
    return gather_rows(reshape(hidden, {B * S, hidden.dim(2)}), rows);
}

}  // namespace

Tensor EncoderModel::pooled(const Tensor& hidden) const {
    require_hidden(hidden, config_.hidden);
    return tanh(linear(cls_states(hidden), pooler_w_, pooler_b_));
}

Tensor EncoderModel::cls_logits(const Tensor& hidden, Rng* dropout_rng) const {
    require_hidden(hidden, config_.hidden);
    if (num_classes_ == 0) {
        throw std::logic_error("cls_logits called before init_classifier");
    }
    Tensor features = config_.pooled_classifier ? pooled(hidden) : cls_states(hidden);
    if (dropout_rng && config_.dropout > 0.0) {
        features = dropout(features, config_.dropout, *dropout_rng);
    }
    return linear(features, classifier_w_, classifier_b_);
}

std::vector<Tensor> EncoderModel::parameter_tensors() const {
    std::vector<Tensor> out;
    for (const auto& p : params_) {
        out.push_back(p.tensor);
    }
    return out;
}

std::vector<Tensor> EncoderModel::parameter_tensors(ParameterGroup group) const {
    std::vector<Tensor> out;
    for (const auto& p : params_) {
        if (p.group == group) {
            out.push_back(p.tensor);
        }
    }
    return out;
}

std::size_t EncoderModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.tensor.numel();
    }
    return n;
}

std::size_t EncoderModel::parameter_count(ParameterGroup group) const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        if (p.group == group) {
            n += p.tensor.numel();
        }
    }
    return n;
}

}  // namespace dialectbert
