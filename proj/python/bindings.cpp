#include "dialectbert/corpus.hpp"
#include "dialectbert/metrics.hpp"
#include "dialectbert/model.hpp"
#include "dialectbert/sizing.hpp"
#include "dialectbert/tokenizer.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dialectbert;

namespace {

std::vector<Document> to_docs(const std::vector<std::string>& texts) {
    std::vector<Document> docs;
    docs.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        docs.push_back({static_cast<std::int64_t>(i), texts[i], std::nullopt});
    }
    return docs;
}

py::dict stats_dict(const CorpusStats& s) {
    py::dict d;
    d["document_count"] = s.document_count;
    d["token_count"] = s.token_count;
    d["duplicate_removed"] = s.duplicate_removed;
    d["short_removed"] = s.short_removed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_dialectbert, m) {
    m.doc() = "Bindings for the dialectbert C++ core.";

    m.def("anonymize", [](const std::string& s) { return anonymize(s); }, py::arg("text"));
    m.def("contains_raw_entities", [](const std::string& s) { return contains_raw_entities(s); }, py::arg("text"));
    m.def("clean_text", [](const std::string& s) { return clean_text(s); }, py::arg("text"));
    m.def(
        "preprocess",
        [](const std::vector<std::string>& texts) {
            const auto [docs, stats] = preprocess(to_docs(texts));
            std::vector<std::string> out;
            for (const auto& d : docs) {
                out.push_back(d.text);
            }
            return py::make_tuple(out, stats_dict(stats));
        },
        py::arg("texts"), "Anonymize, clean, dedup and length-filter. Returns (texts, stats).");

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("load", &Vocabulary::load, py::arg("path"))
        .def("save", &Vocabulary::save, py::arg("path"))
        .def("__len__", &Vocabulary::size)
        .def_property_readonly("tokens", &Vocabulary::tokens)
        .def("find", [](const Vocabulary& v, const std::string& t) { return v.find(t); }, py::arg("token"))
        .def("encode",
             [](const Vocabulary& v, const std::string& text, std::size_t max_len, bool add_specials) {
                 const Encoding e = encode(v, text, max_len, add_specials);
                 return py::make_tuple(e.ids, std::vector<int>(e.attention_mask.begin(), e.attention_mask.end()));
             },
             py::arg("text"), py::arg("max_len") = 64, py::arg("add_specials") = true,
             "Returns (ids, attention_mask).")
        .def("decode", [](const Vocabulary& v, const std::vector<int>& ids) { return decode(v, ids); },
             py::arg("ids"));

    m.def(
        "train_wordpiece",
        [](const std::vector<std::string>& texts, std::size_t vocab_size, std::size_t min_frequency) {
            return train_wordpiece(to_docs(texts), {vocab_size, min_frequency});
        },
        py::arg("texts"), py::arg("vocab_size"), py::arg("min_frequency") = 2);

    m.def(
        "count_parameters",
        [](std::size_t vocab_size, std::size_t hidden, std::size_t layers, std::size_t intermediate,
           std::size_t max_positions, std::size_t type_vocab) {
            ModelConfig c;
            c.vocab_size = vocab_size;
            c.hidden = hidden;
            c.layers = layers;
            c.intermediate = intermediate;
            c.max_positions = max_positions;
            c.type_vocab = type_vocab;
            return count_parameters(c);
        },
        py::arg("vocab_size"), py::arg("hidden") = 768, py::arg("layers") = 12, py::arg("intermediate") = 3072,
        py::arg("max_positions") = 512, py::arg("type_vocab") = 2);
    m.def("round_to_millions", &round_to_millions, py::arg("count"));
    m.def("disk_estimate_mb", &disk_estimate_mb, py::arg("count"), py::arg("bytes_per_param") = 4u);

    m.def(
        "macro_scores",
        [](const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t num_classes) {
            const Scores s = macro_scores(confusion(y_true, y_pred, num_classes));
            py::dict d;
            d["accuracy"] = s.accuracy;
            d["macro_precision"] = s.macro_precision;
            d["macro_recall"] = s.macro_recall;
            d["macro_f1"] = s.macro_f1;
            return d;
        },
        py::arg("y_true"), py::arg("y_pred"), py::arg("num_classes"));
}
