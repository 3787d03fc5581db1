#include "dialectbert/pretrain.hpp"
#include "dialectbert/rng.hpp"

#include "overfit_run.hpp"

#include "doctest.h"

#include <cmath>
#include <stdexcept>

using namespace dialectbert;

namespace {

constexpr std::size_t kVocab = 1000;

// [CLS] body [SEP] then padding up to `seq`.
std::vector<Encoding> random_encodings(Rng& rng, std::size_t count, std::size_t seq, std::size_t min_body) {
    std::vector<Encoding> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t body = min_body + rng.below(seq - 2 - min_body + 1);
        Encoding e;
        e.ids.push_back(kClsId);
        for (std::size_t k = 0; k < body; ++k) {
            e.ids.push_back(kNumSpecialTokens + static_cast<int>(rng.below(kVocab - kNumSpecialTokens)));
        }
        e.ids.push_back(kSepId);
        e.attention_mask.assign(e.ids.size(), 1);
        e.ids.resize(seq, kPadId);
        e.attention_mask.resize(seq, 0);
        out.push_back(std::move(e));
    }
    return out;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.vocab_size = kVocab;
    c.hidden = 16;
    c.layers = 1;
    c.heads = 2;
    c.intermediate = 32;
    c.max_positions = 32;
    return c;
}

}  // namespace

TEST_SUITE("pretrain") {
    TEST_CASE("masking statistics at p = 0.25") {
        Rng data_rng(3);
        Rng rng(4);
        std::size_t eligible = 0, selected = 0, masked = 0, replaced = 0, kept = 0;
        while (eligible < 200000) {
            const auto enc = random_encodings(data_rng, 64, 48, 20);
            const MlmBatch b = collate_mlm(enc, kVocab, 0.25, rng);
            for (std::size_t i = 0; i < b.labels.size(); ++i) {
                const int original = enc[i / b.seq].ids[i % b.seq];
                eligible += is_special_id(original) ? 0 : 1;
                if (b.labels[i] == kIgnoreLabel) {
                    continue;
                }
                ++selected;
                if (b.input_ids[i] == kMaskId) {
                    ++masked;
                } else if (b.input_ids[i] == original) {
                    ++kept;
                } else {
                    ++replaced;
                }
            }
        }
        const double rate = static_cast<double>(selected) / static_cast<double>(eligible);
        CHECK(rate >= 0.245);
        CHECK(rate <= 0.255);
        const double n = static_cast<double>(selected);
        CHECK(std::abs(masked / n - 0.8) <= 0.01);
        CHECK(std::abs(replaced / n - 0.1) <= 0.01);
        CHECK(std::abs(kept / n - 0.1) <= 0.01);
    }

    TEST_CASE("special and padding positions are never selected") {
        Rng data_rng(8);
        Rng rng(9);
        for (int trial = 0; trial < 300; ++trial) {
            const auto enc = random_encodings(data_rng, 8, 12, 0);
            const double p = trial % 3 == 0 ? 1.0 : 0.25;
            const MlmBatch b = collate_mlm(enc, kVocab, p, rng);
            for (std::size_t i = 0; i < b.labels.size(); ++i) {
                const int original = enc[i / b.seq].ids[i % b.seq];
                if (is_special_id(original)) {
                    REQUIRE(b.labels[i] == kIgnoreLabel);
                    REQUIRE(b.input_ids[i] == original);
                } else if (b.labels[i] != kIgnoreLabel) {
                    REQUIRE(b.labels[i] == original);
                    REQUIRE(b.input_ids[i] < static_cast<int>(kVocab));
                    REQUIRE((b.input_ids[i] == kMaskId || !is_special_id(b.input_ids[i])));
                }
                REQUIRE(b.attention_mask[i] == enc[i / b.seq].attention_mask[i % b.seq]);
            }
        }
    }

    TEST_CASE("every sequence with content gets a target") {
        Rng data_rng(12);
        Rng rng(13);
        const auto enc = random_encodings(data_rng, 500, 6, 1);
        const MlmBatch b = collate_mlm(enc, kVocab, 0.01, rng);
        for (std::size_t s = 0; s < b.batch; ++s) {
            std::size_t count = 0;
            for (std::size_t t = 0; t < b.seq; ++t) {
                count += b.labels[s * b.seq + t] != kIgnoreLabel ? 1 : 0;
            }
            CHECK(count >= 1);
        }
    }

    TEST_CASE("zero probability selects nothing and the loss is zero") {
        Rng data_rng(1);
        Rng rng(2);
        const auto enc = random_encodings(data_rng, 4, 10, 3);
        const MlmBatch b = collate_mlm(enc, kVocab, 0.0, rng);
        CHECK(b.selected_positions().empty());
        CHECK(b.input_ids.size() == 40);
        EncoderModel model(tiny_config(), 5);
        CHECK(mlm_loss(model, b).item() == 0.0);
    }

    TEST_CASE("collation is a function of the generator state") {
        Rng data_rng(21);
        const auto enc = random_encodings(data_rng, 16, 20, 4);
        Rng a(77), b(77);
        const MlmBatch x = collate_mlm(enc, kVocab, 0.25, a);
        const MlmBatch y = collate_mlm(enc, kVocab, 0.25, b);
        CHECK(x.input_ids == y.input_ids);
        CHECK(x.labels == y.labels);
    }

    TEST_CASE("bad arguments") {
        Rng data_rng(1);
        Rng rng(1);
        const auto enc = random_encodings(data_rng, 2, 8, 2);
        CHECK_THROWS_AS(collate_mlm(enc, kVocab, 1.5, rng), std::invalid_argument);
        CHECK_THROWS_AS(collate_mlm(enc, kVocab, -0.1, rng), std::invalid_argument);
        PretrainConfig c;
        c.batch_size = 0;
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        c = PretrainConfig{};
        c.warmup_fraction = 1.5;
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    }

    TEST_CASE("training loop is deterministic and checkpoints on schedule") {
        Rng data_rng(30);
        const auto enc = random_encodings(data_rng, 20, 12, 3);
        PretrainConfig pc;
        pc.batch_size = 4;
        pc.epochs = 2;
        pc.learning_rate = 1e-3;
        pc.max_len = 12;
        pc.checkpoint_interval = 3;

        EncoderModel m1(tiny_config(), 1);
        std::vector<std::size_t> steps;
        const auto r1 = pretrain_loop(enc, m1, pc, [&](const EncoderModel&, std::size_t step) { steps.push_back(step); });
        EncoderModel m2(tiny_config(), 1);
        const auto r2 = pretrain_loop(enc, m2, pc);

        REQUIRE(r1.history.size() == 10);
        CHECK(r1.history == r2.history);
        CHECK(steps == std::vector<std::size_t>{3, 6, 9});
        for (const auto& rec : r1.history) {
            CHECK(std::isfinite(rec.loss));
        }
        const auto p1 = m1.word_embeddings().data();
        const auto p2 = m2.word_embeddings().data();
        CHECK(std::equal(p1.begin(), p1.end(), p2.begin(), p2.end()));
    }

    TEST_CASE("zero epochs leaves the model untouched") {
        Rng data_rng(31);
        const auto enc = random_encodings(data_rng, 4, 8, 2);
        PretrainConfig pc;
        pc.epochs = 0;
        pc.max_len = 8;
        EncoderModel m(tiny_config(), 2);
        EncoderModel reference(tiny_config(), 2);
        CHECK(pretrain_loop(enc, m, pc).history.empty());
        const auto a = m.word_embeddings().data();
        const auto b = reference.word_embeddings().data();
        CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }

    TEST_CASE("a diverging run stops with an error") {
        Rng data_rng(32);
        const auto enc = random_encodings(data_rng, 8, 8, 2);
        PretrainConfig pc;
        pc.max_len = 8;
        pc.batch_size = 2;
        pc.epochs = 3;
        pc.learning_rate = 1e300;
        EncoderModel m(tiny_config(), 3);
        CHECK_THROWS_AS(pretrain_loop(enc, m, pc), std::exception);
    }

    TEST_CASE("loss history formatting and smoothing") {
        const std::vector<LossRecord> h = {{0, 0.5}, {1, 0.25}, {2, 1.0 / 3.0}, {3, 1.0}, {4, 2.0}};
        CHECK(format_loss_history(std::span(h).first(2)) == "0,0.5\n1,0.25\n");
        const auto line = format_loss_history(std::span(h).subspan(2, 1));
        CHECK(std::stod(line.substr(2)) == 1.0 / 3.0);
        const auto w = window_means(h, 2);
        REQUIRE(w.size() == 2);
        CHECK(w[0] == 0.375);
        CHECK(w[1] == doctest::Approx((1.0 / 3.0 + 1.0) / 2.0));
        CHECK(window_means(h, 10).empty());
    }

    TEST_CASE("memorises the overfit corpus") {
        const auto out = dbtest::run_overfit(std::filesystem::path(DIALECTBERT_SOURCE_DIR) / "configs" / "overfit.ini");
        const double ln_v = std::log(static_cast<double>(out.vocab_size));
        MESSAGE("V=" << out.vocab_size << " initial=" << out.initial_loss << " final=" << out.final_loss
                     << " seconds=" << out.seconds);
        CHECK(std::abs(out.initial_loss - ln_v) <= 0.1 * ln_v);
        CHECK(out.final_loss < 0.1);
        CHECK(out.monotone);
    }
}
