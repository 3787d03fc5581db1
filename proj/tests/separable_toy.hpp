#pragma once

#include "dialectbert/corpus.hpp"
#include "dialectbert/finetune.hpp"
#include "dialectbert/rng.hpp"

#include <string>
#include <vector>

namespace dbtest {

// 24 short documents; each class owns one cue word and the filler words are shared.
inline std::vector<dialectbert::Document> separable_docs() {
    const std::vector<std::string> cues = {"zwin", "khayeb", "normal"};
    const std::vector<std::string> filler = {"rani", "fel", "dar", "lyoum", "wesh", "khoya", "bezaf", "chwiya"};
    dialectbert::Rng rng(6);
    std::vector<dialectbert::Document> docs;
    for (std::int64_t i = 0; i < 24; ++i) {
        const std::size_t c = static_cast<std::size_t>(i) % cues.size();
        std::string text;
        for (int k = 0; k < 4; ++k) {
            text += filler[rng.below(filler.size())] + " ";
        }
        text.insert(rng.below(2) == 0 ? 0 : text.size(), cues[c] + " ");
        docs.push_back({i, text, cues[c]});
    }
    return docs;
}

inline dialectbert::ModelConfig separable_model(std::size_t vocab) {
    dialectbert::ModelConfig c;
    c.vocab_size = vocab;
    c.hidden = 32;
    c.layers = 1;
    c.heads = 2;
    c.intermediate = 64;
    c.max_positions = 16;
    return c;
}

/// Budget that fits the toy set exactly from a random start.
inline dialectbert::FinetuneConfig separable_budget() {
    dialectbert::FinetuneConfig cfg;
    cfg.epochs = 20;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 4;
    return cfg;
}

}  // namespace dbtest
