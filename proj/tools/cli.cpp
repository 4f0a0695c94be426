#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "userhan/attention.hpp"
#include "userhan/experiment.hpp"

using namespace userhan;

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t b = item.find_first_not_of(" \t");
        std::size_t e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

ExperimentConfig config_or_default(const std::string& path) {
    if (path.empty()) return {};
    return load_experiment_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical-attention user classification toolkit"};
    app.require_subcommand(1);

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic JSONL corpus");
    std::string gen_config, gen_out = "corpus.jsonl";
    std::uint64_t gen_seed = 1;
    gen->add_option("--config", gen_config, "flat key=value generator config");
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "output corpus path");

    // prepare
    auto* prep = app.add_subcommand("prepare", "Select controls and splits into a manifest");
    std::string prep_corpus, prep_condition, prep_out = "manifest.json";
    std::uint64_t prep_seed = 1;
    int prep_cpd = 9;
    prep->add_option("--corpus", prep_corpus)->required();
    prep->add_option("--condition", prep_condition, "condition to model (default: all diagnosed)");
    prep->add_option("--seed", prep_seed, "control-selection and split seed")->required();
    prep->add_option("--controls-per-diagnosed", prep_cpd);
    prep->add_option("--out", prep_out);

    // train
    auto* train = app.add_subcommand("train", "Train one model on a prepared sub-dataset");
    std::string tr_model, tr_config, tr_corpus, tr_manifest, tr_ckpt = "model.ckpt",
                tr_report;
    int tr_cap = 0;
    train->add_option("--model", tr_model, "han|logreg|svm|charngram")->required();
    train->add_option("--config", tr_config, "flat key=value training config");
    train->add_option("--corpus", tr_corpus)->required();
    train->add_option("--manifest", tr_manifest)->required();
    train->add_option("--checkpoint", tr_ckpt, "checkpoint output path");
    train->add_option("--report", tr_report, "run report CSV output path");
    train->add_option("--post-cap", tr_cap, "cap posts per user before training");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
    std::string ev_model, ev_ckpt, ev_corpus, ev_manifest, ev_traces, ev_report;
    eval->add_option("--model", ev_model, "han|logreg|svm|charngram")->required();
    eval->add_option("--checkpoint", ev_ckpt)->required();
    eval->add_option("--corpus", ev_corpus)->required();
    eval->add_option("--manifest", ev_manifest)->required();
    eval->add_option("--traces", ev_traces,
                     "write attention traces of test users predicted diagnosed (han only)");
    eval->add_option("--report", ev_report, "metrics CSV output path");

    // protocol
    auto* proto = app.add_subcommand("protocol", "Full resampling protocol");
    std::string pr_corpus, pr_condition, pr_models = "han,logreg,svm,charngram", pr_config,
                pr_csv;
    int pr_n = 5;
    proto->add_option("--corpus", pr_corpus)->required();
    proto->add_option("--condition", pr_condition);
    proto->add_option("--models", pr_models, "comma-separated model kinds");
    proto->add_option("--config", pr_config);
    proto->add_option("--resamplings", pr_n, "number of control groups");
    proto->add_option("--csv", pr_csv, "CSV output path");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Posts-per-user ablation of the HAN");
    std::string ab_corpus, ab_condition, ab_config, ab_csv, ab_caps = "50,100,150,200,250";
    int ab_seeds = 3;
    abl->add_option("--corpus", ab_corpus)->required();
    abl->add_option("--condition", ab_condition);
    abl->add_option("--config", ab_config);
    abl->add_option("--caps", ab_caps, "comma-separated post caps");
    abl->add_option("--seeds", ab_seeds, "control seeds per cap");
    abl->add_option("--csv", ab_csv, "CSV output path");

    // attention-report
    auto* att = app.add_subcommand("attention-report", "Top attended n-grams from traces");
    std::string at_traces, at_lexicon, at_csv;
    int at_top = 100;
    att->add_option("--traces", at_traces, "attention trace JSONL")->required();
    att->add_option("--lexicon", at_lexicon, "category lexicon file");
    att->add_option("--csv", at_csv, "CSV output path");
    att->add_option("--top", at_top, "number of ranked n-grams");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            SyntheticConfig cfg =
                gen_config.empty() ? SyntheticConfig{} : load_synthetic_config(gen_config);
            Corpus corpus = generate_synthetic(cfg, gen_seed);
            save_corpus(corpus, gen_out);
            std::cout << "wrote " << corpus.size() << " users to " << gen_out << "\n";
        } else if (prep->parsed()) {
            Corpus corpus = load_corpus(prep_corpus);
            std::vector<const UserRecord*> diagnosed, pool;
            for (const auto& u : corpus) {
                if (u.label == Label::diagnosed) {
                    if (prep_condition.empty() ||
                        (u.condition && *u.condition == prep_condition))
                        diagnosed.push_back(&u);
                } else {
                    pool.push_back(&u);
                }
            }
            SubDataset ds = select_controls(diagnosed, pool, prep_seed, prep_cpd);
            if (!prep_condition.empty()) ds.condition = prep_condition;
            assign_splits(ds, 0.8, 0.1, 0.1, prep_seed);
            save_manifest(ds, prep_out);
            std::cout << "wrote manifest with " << ds.diagnosed_ids.size() << " diagnosed and "
                      << ds.control_ids.size() << " control users to " << prep_out << "\n";
        } else if (train->parsed()) {
            ExperimentConfig cfg = config_or_default(tr_config);
            Corpus corpus = load_corpus(tr_corpus);
            SubDataset ds = load_manifest(tr_manifest);
            ResolvedData data = resolve_subdataset(corpus, ds, tr_cap);
            RunReport report = train_run(parse_model_kind(tr_model), data, cfg.train, cfg.han,
                                         ds.condition, ds.seed, tr_ckpt);
            std::ostringstream csv;
            write_report_csv({report}, csv);
            if (!tr_report.empty()) write_text_file(tr_report, csv.str());
            write_report_table({report}, std::cout);
        } else if (eval->parsed()) {
            ExperimentConfig cfg;
            Corpus corpus = load_corpus(ev_corpus);
            SubDataset ds = load_manifest(ev_manifest);
            ResolvedData data = resolve_subdataset(corpus, ds);
            ModelKind kind = parse_model_kind(ev_model);
            std::vector<AttentionTrace> traces;
            Metrics m = evaluate_checkpoint(kind, ev_ckpt, data, cfg.han,
                                            ev_traces.empty() ? nullptr : &traces);
            if (!ev_traces.empty()) export_traces(traces, ev_traces);
            RunReport report;
            report.condition = ds.condition;
            report.model = ev_model;
            report.control_seed = ds.seed;
            report.test = m;
            std::ostringstream csv;
            write_report_csv({report}, csv);
            if (!ev_report.empty()) write_text_file(ev_report, csv.str());
            write_report_table({report}, std::cout);
        } else if (proto->parsed()) {
            ExperimentConfig cfg = config_or_default(pr_config);
            Corpus corpus = load_corpus(pr_corpus);
            std::vector<ModelKind> kinds;
            for (const auto& m : split_csv_list(pr_models)) kinds.push_back(parse_model_kind(m));
            ProtocolResult result =
                run_protocol(corpus, pr_condition, kinds, pr_n, cfg.train, cfg.han);
            std::ostringstream csv;
            write_report_csv(result.runs, csv);
            if (!pr_csv.empty()) write_text_file(pr_csv, csv.str());
            write_report_table(result.runs, std::cout);
        } else if (abl->parsed()) {
            ExperimentConfig cfg = config_or_default(ab_config);
            Corpus corpus = load_corpus(ab_corpus);
            std::vector<int> caps;
            for (const auto& c : split_csv_list(ab_caps)) caps.push_back(std::stoi(c));
            AblationReport report =
                run_ablation(corpus, ab_condition, caps, ab_seeds, cfg.train, cfg.han);
            std::ostringstream csv;
            write_ablation_csv(report, csv);
            if (!ab_csv.empty()) write_text_file(ab_csv, csv.str());
            write_ablation_table(report, std::cout);
        } else if (att->parsed()) {
            auto traces = load_traces(at_traces);
            CategoryLexicon lexicon;
            if (!at_lexicon.empty()) lexicon = load_lexicon(at_lexicon);
            auto ranked = accumulate(traces, nullptr, at_top);
            std::ostringstream csv;
            csv << "ngram,kind,count,categories\n";
            for (const auto& nc : ranked) {
                auto cats = categories_of(nc.ngram, lexicon);
                std::string joined;
                for (std::size_t i = 0; i < cats.size(); ++i)
                    joined += (i ? ";" : "") + cats[i];
                csv << nc.ngram.text << ','
                    << (nc.ngram.kind == NgramKind::bigram ? "bigram" : "unigram") << ','
                    << nc.count << ',' << joined << '\n';
            }
            if (!at_csv.empty()) write_text_file(at_csv, csv.str());
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-30s %-8s %8s  %s\n", "ngram", "kind", "count",
                          "categories");
            std::cout << buf;
            for (const auto& nc : ranked) {
                auto cats = categories_of(nc.ngram, lexicon);
                std::string joined;
                for (std::size_t i = 0; i < cats.size(); ++i)
                    joined += (i ? ";" : "") + cats[i];
                std::snprintf(buf, sizeof(buf), "%-30s %-8s %8lld  %s\n", nc.ngram.text.c_str(),
                              nc.ngram.kind == NgramKind::bigram ? "bigram" : "unigram",
                              nc.count, joined.c_str());
                std::cout << buf;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
