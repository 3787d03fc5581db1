#include "dialectbert/finetune.hpp"
#include "dialectbert/rng.hpp"
#include "separable_toy.hpp"

#include "doctest.h"

#include <set>
#include <stdexcept>

using namespace dialectbert;

namespace {

struct Fixture {
    std::vector<Document> docs = dbtest::separable_docs();
    Vocabulary vocab = train_wordpiece(docs, {200, 1});
    LabelMap labels = LabelMap::from_documents(docs);
    std::vector<Example> examples = make_examples(docs, vocab, labels, 16);
    EncoderModel base{dbtest::separable_model(vocab.size()), 11};

    std::vector<Encoding> encodings() const {
        std::vector<Encoding> out;
        for (const auto& e : examples) {
            out.push_back(e.encoding);
        }
        return out;
    }
};

}  // namespace

TEST_SUITE("finetune") {
    TEST_CASE("label map") {
        const LabelMap m({"b", "a"});
        CHECK(m.labels() == std::vector<std::string>{"b", "a"});
        CHECK(m.index("a") == 1);
        CHECK_THROWS_WITH_AS(m.index("c"), "unknown label 'c'", std::invalid_argument);
        CHECK_THROWS_AS(LabelMap({"a", "a"}), std::invalid_argument);
        CHECK_THROWS_AS(LabelMap({""}), std::invalid_argument);

        const Fixture f;
        CHECK(f.labels.labels() == std::vector<std::string>{"khayeb", "normal", "zwin"});
        std::vector<Document> unlabeled = {{0, "a b c", std::nullopt}};
        CHECK_THROWS(LabelMap::from_documents(unlabeled));
        std::vector<Document> stray = {{0, "a b c", "other"}};
        CHECK_THROWS_WITH(make_examples(stray, f.vocab, f.labels, 16), doctest::Contains("'other'"));
    }

    TEST_CASE("default seeds") {
        const auto seeds = default_finetune_seeds();
        CHECK(seeds.size() == 10);
        CHECK(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == 10);
        CHECK(FinetuneConfig{}.epochs == 1);
    }

    TEST_CASE("separable toy set is fitted exactly") {
        const Fixture f;
        const FinetuneConfig cfg = dbtest::separable_budget();
        for (const std::uint64_t seed : {1, 7, 42, 123}) {
            INFO("seed " << seed);
            std::vector<double> history;
            const EncoderModel tuned = finetune_once(f.base, f.examples, f.labels.size(), cfg, seed, &history);
            CHECK(history.size() == 120);
            const auto preds = predict(tuned, f.encodings());
            for (std::size_t i = 0; i < preds.size(); ++i) {
                CHECK(preds[i] == f.examples[i].label);
            }
        }
    }

    TEST_CASE("same seed, same predictions; different seed, different run") {
        const Fixture f;
        FinetuneConfig cfg;
        cfg.learning_rate = 1e-3;
        cfg.batch_size = 4;
        cfg.seeds = {3, 3, 4};
        const auto runs = run_protocol(f.base, f.examples, f.encodings(), f.labels.size(), cfg);
        REQUIRE(runs.size() == 3);
        CHECK(runs[0].predictions == runs[1].predictions);
        CHECK(runs[0].train_loss_history == runs[1].train_loss_history);
        CHECK(runs[0].train_loss_history != runs[2].train_loss_history);
    }

    TEST_CASE("fine-tuning leaves the pretrained model alone") {
        const Fixture f;
        const std::vector<double> before(f.base.word_embeddings().data().begin(), f.base.word_embeddings().data().end());
        FinetuneConfig cfg;
        cfg.learning_rate = 1e-2;
        finetune_once(f.base, f.examples, f.labels.size(), cfg, 1);
        const auto after = f.base.word_embeddings().data();
        CHECK(std::equal(before.begin(), before.end(), after.begin(), after.end()));
        CHECK(f.base.num_classes() == 0);
    }

    TEST_CASE("zero epochs gives the freshly initialised head") {
        const Fixture f;
        FinetuneConfig cfg;
        cfg.epochs = 0;
        std::vector<double> history;
        const EncoderModel a = finetune_once(f.base, f.examples, f.labels.size(), cfg, 5, &history);
        const EncoderModel b = finetune_once(f.base, f.examples, f.labels.size(), cfg, 5);
        CHECK(history.empty());
        CHECK(a.num_classes() == 3);
        CHECK(predict(a, f.encodings()) == predict(b, f.encodings()));
    }

    TEST_CASE("tied logits predict the lowest class") {
        const Fixture f;
        FinetuneConfig cfg;
        cfg.epochs = 0;
        EncoderModel m = finetune_once(f.base, f.examples, f.labels.size(), cfg, 5);
        for (const auto& p : m.parameters()) {
            if (p.group == ParameterGroup::classifier) {
                Tensor t = p.tensor;
                for (double& v : t.mutable_data()) {
                    v = 0.0;
                }
            }
        }
        for (const int pred : predict(m, f.encodings())) {
            CHECK(pred == 0);
        }
    }

    TEST_CASE("bad inputs") {
        const Fixture f;
        FinetuneConfig cfg;
        std::vector<Example> bad = {f.examples[0]};
        bad[0].label = 3;
        CHECK_THROWS_AS(finetune_once(f.base, bad, 3, cfg, 1), std::invalid_argument);
        CHECK_THROWS_AS(predict(f.base, f.encodings()), std::logic_error);
        cfg.batch_size = 0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
        cfg = FinetuneConfig{};
        cfg.seeds.clear();
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }

    TEST_CASE("predictions file") {
        const LabelMap labels({"neg", "pos"});
        const std::vector<Document> test = {{10, "x", "neg"}, {4, "y", "pos"}};
        const std::vector<int> preds = {1, 0};
        CHECK(format_predictions(test, preds, labels) == "10,pos\n4,neg\n");
        CHECK_THROWS_AS(format_predictions(test, std::vector<int>{1}, labels), std::invalid_argument);
    }
}
