#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "userhan/attention.hpp"
#include "userhan/baselines.hpp"
#include "userhan/corpus.hpp"
#include "userhan/experiment.hpp"
#include "userhan/metrics.hpp"

namespace py = pybind11;
using namespace userhan;

namespace {

std::vector<double> py_softmax(const std::vector<double>& xs) {
    Tape t;
    return softmax(t, Tensor::vector(xs)).data();
}

py::tuple py_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
    auto to_labels = [](const std::vector<int>& v) {
        std::vector<Label> out;
        for (int x : v) out.push_back(x ? Label::diagnosed : Label::control);
        return out;
    };
    Metrics m = f1_score(to_labels(preds), to_labels(labels));
    return py::make_tuple(m.precision, m.recall, m.f1);
}

py::list py_top2(const std::vector<std::string>& tokens, const std::vector<double>& weights) {
    PostTrace post{tokens, weights};
    py::list out;
    for (const auto& g : top2(post))
        out.append(py::make_tuple(g.text, g.kind == NgramKind::bigram ? "bigram" : "unigram"));
    return out;
}

void py_gen_synthetic(py::dict kwargs, std::uint64_t seed, const std::string& path) {
    SyntheticConfig cfg;
    if (kwargs.contains("n_diagnosed")) cfg.n_diagnosed = kwargs["n_diagnosed"].cast<int>();
    if (kwargs.contains("controls_per_diagnosed"))
        cfg.controls_per_diagnosed = kwargs["controls_per_diagnosed"].cast<int>();
    if (kwargs.contains("posts_per_user_mean"))
        cfg.posts_per_user_mean = kwargs["posts_per_user_mean"].cast<double>();
    if (kwargs.contains("post_len_mean")) cfg.post_len_mean = kwargs["post_len_mean"].cast<double>();
    if (kwargs.contains("vocab_size")) cfg.vocab_size = kwargs["vocab_size"].cast<int>();
    if (kwargs.contains("signal_strength"))
        cfg.signal_strength = kwargs["signal_strength"].cast<double>();
    if (kwargs.contains("signal_lexicon"))
        cfg.signal_lexicon = kwargs["signal_lexicon"].cast<std::vector<std::string>>();
    if (kwargs.contains("condition")) cfg.condition = kwargs["condition"].cast<std::string>();
    save_corpus(generate_synthetic(cfg, seed), path);
}

py::list py_load_corpus(const std::string& path) {
    py::list out;
    for (const auto& u : load_corpus(path)) {
        py::dict d;
        d["user_id"] = u.user_id;
        d["label"] = label_name(u.label);
        if (u.condition) d["condition"] = *u.condition;
        d["posts"] = u.posts;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core operations of the user-level hierarchical attention toolkit";

    m.def("tokenize", &tokenize, py::arg("text"),
          "Lower-case, whitespace-split, edge-punctuation-stripped tokens");
    m.def("softmax", &py_softmax, py::arg("values"));
    m.def("f1", &py_f1, py::arg("predictions"), py::arg("labels"),
          "(precision, recall, f1) with class 1 as positive");
    m.def("char_ngrams", &char_ngrams, py::arg("word"),
          "Character 3-6 grams of '<word>'");
    m.def("top2", &py_top2, py::arg("tokens"), py::arg("weights"),
          "Top-2 attended n-grams of one post");
    m.def("generate_synthetic", &py_gen_synthetic, py::arg("config"), py::arg("seed"),
          py::arg("path"), "Write a synthetic JSONL corpus");
    m.def("load_corpus", &py_load_corpus, py::arg("path"));

    py::class_<TfidfVectorizer>(m, "TfidfVectorizer")
        .def(py::init<>())
        .def("fit_transform",
             [](TfidfVectorizer& self, const std::vector<std::vector<std::string>>& docs) {
                 py::list out;
                 for (const auto& row : self.fit_transform(docs)) {
                     py::dict d;
                     for (const auto& [col, v] : row.entries)
                         d[py::str(self.feature_names()[col])] = v;
                     out.append(d);
                 }
                 return out;
             })
        .def("transform", [](const TfidfVectorizer& self, const std::vector<std::string>& doc) {
            py::dict d;
            for (const auto& [col, v] : self.transform(doc).entries)
                d[py::str(self.feature_names()[col])] = v;
            return d;
        });
}
