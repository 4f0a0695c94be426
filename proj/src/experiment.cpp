#include "userhan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace userhan {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (learning_rate <= 0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (selection_metric != "f1")
        throw std::invalid_argument("TrainConfig: unsupported selection_metric '" +
                                    selection_metric + "'");
}

void adam_step(std::vector<Tensor>& params, AdamState& state, long long t,
               const TrainConfig& cfg) {
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state/parameter count mismatch");
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (state.m[i].size() != static_cast<std::size_t>(p.size()))
            throw std::invalid_argument("adam_step: gradient shape mismatch at parameter " +
                                        std::to_string(i));
        auto& grad = p.grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        auto& data = p.data();
        for (int j = 0; j < p.size(); ++j) {
            double g = grad[j];
            m[j] = cfg.beta1 * m[j] + (1 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1 - cfg.beta2) * g * g;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            data[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "han") return ModelKind::han;
    if (s == "logreg") return ModelKind::logreg;
    if (s == "svm") return ModelKind::svm;
    if (s == "charngram") return ModelKind::charngram;
    throw std::invalid_argument("unknown model kind: " + s);
}

std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::han: return "han";
        case ModelKind::logreg: return "logreg";
        case ModelKind::svm: return "svm";
        default: return "charngram";
    }
}

ResolvedData resolve_subdataset(const Corpus& corpus, const SubDataset& ds, int post_cap) {
    std::unordered_map<std::string, const UserRecord*> by_id;
    for (const auto& u : corpus) by_id[u.user_id] = &u;
    ResolvedData out;
    auto place = [&](const std::string& id) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::runtime_error("manifest user " + id + " not found in corpus");
        auto sit = ds.split_of.find(id);
        if (sit == ds.split_of.end())
            throw std::runtime_error("manifest user " + id + " has no split assignment");
        UserRecord rec = post_cap > 0 ? truncate_posts(*it->second, post_cap) : *it->second;
        bool usable = false;
        for (const auto& p : rec.posts)
            if (!tokenize(p).empty()) {
                usable = true;
                break;
            }
        if (!usable) {
            std::cerr << "warning: excluding user " << id << " (no usable posts)\n";
            return;
        }
        switch (sit->second) {
            case Split::train: out.train.push_back(std::move(rec)); break;
            case Split::dev: out.dev.push_back(std::move(rec)); break;
            case Split::test: out.test.push_back(std::move(rec)); break;
        }
    };
    for (const auto& id : ds.diagnosed_ids) place(id);
    for (const auto& id : ds.control_ids) place(id);
    if (out.train.empty() || out.dev.empty() || out.test.empty())
        throw std::runtime_error("resolve_subdataset: a split is empty");
    return out;
}

namespace {

std::vector<Label> gold_labels(const std::vector<UserRecord>& users) {
    std::vector<Label> out;
    out.reserve(users.size());
    for (const auto& u : users) out.push_back(u.label);
    return out;
}

struct HanTrainResult {
    HanParams best;
    Vocabulary vocab;
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

Metrics eval_han(const HanParams& params, const Vocabulary& vocab,
                 const std::vector<UserRecord>& users,
                 std::vector<AttentionTrace>* traces_out = nullptr) {
    std::vector<Label> preds, gold;
    for (const auto& u : users) {
        PreparedUser pu = prepare_user(u, vocab, params.config);
        Prediction pr = predict(pu, params);
        preds.push_back(pr.label);
        gold.push_back(u.label);
        if (traces_out && pr.label == Label::diagnosed) {
            Tape t;
            traces_out->push_back(encode_user(t, pu, params).trace);
        }
    }
    return f1_score(preds, gold);
}

HanTrainResult train_han(const ResolvedData& data, const TrainConfig& cfg,
                         const HanConfig& han_cfg) {
    std::vector<std::vector<std::string>> train_docs;
    for (const auto& u : data.train) train_docs.push_back(user_document(u));
    Vocabulary vocab = build_vocab(train_docs, cfg.min_freq);

    Rng rng(cfg.seed);
    HanParams params = HanParams::init(han_cfg, vocab.size(), rng);
    std::vector<Tensor> plist = params.parameters();
    AdamState adam;
    long long t = 0;

    std::vector<PreparedUser> train_users;
    for (const auto& u : data.train) {
        try {
            train_users.push_back(prepare_user(u, vocab, han_cfg));
        } catch (const std::runtime_error& e) {
            std::cerr << "warning: " << e.what() << ", skipping\n";
        }
    }
    if (train_users.empty()) throw std::runtime_error("train_han: no usable training users");

    HanTrainResult result;
    result.vocab = vocab;
    double best_dev = -1;
    std::vector<std::size_t> order(train_users.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            std::size_t end = std::min(pos + static_cast<std::size_t>(cfg.batch_size), order.size());
            double inv = 1.0 / static_cast<double>(end - pos);
            for (std::size_t k = pos; k < end; ++k) {
                const PreparedUser& u = train_users[order[k]];
                Tape tape;
                Tensor loss = bce_loss(tape, encode_user(tape, u, params).logit, u.label);
                double lv = loss.item();
                if (!std::isfinite(lv))
                    throw std::runtime_error("train_han: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", user " + u.user_id);
                epoch_loss += lv;
                tape.backward(scale(tape, loss, inv));
            }
            adam_step(plist, adam, ++t, cfg);
            for (auto& p : plist) p.zero_grad();
            pos = end;
        }
        EpochStats stats;
        stats.train_loss = epoch_loss / static_cast<double>(train_users.size());
        stats.dev = eval_han(params, vocab, data.dev);
        result.history.push_back(stats);
        if (stats.dev.f1 > best_dev) {  // strict: ties keep the earlier epoch
            best_dev = stats.dev.f1;
            result.best = params.clone();
            result.best_epoch = epoch;
        }
    }
    return result;
}

std::vector<std::vector<std::string>> docs_of(const std::vector<UserRecord>& users) {
    std::vector<std::vector<std::string>> out;
    out.reserve(users.size());
    for (const auto& u : users) out.push_back(user_document(u));
    return out;
}

std::vector<int> int_labels(const std::vector<UserRecord>& users) {
    std::vector<int> out;
    out.reserve(users.size());
    for (const auto& u : users) out.push_back(u.label == Label::diagnosed ? 1 : 0);
    return out;
}

}  // namespace

RunReport train_run(ModelKind kind, const ResolvedData& data, const TrainConfig& cfg,
                    const HanConfig& han_cfg, const std::string& condition,
                    std::uint64_t control_seed, const std::string& checkpoint_path) {
    cfg.validate();
    auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.condition = condition;
    report.model = model_kind_name(kind);
    report.control_seed = control_seed;

    if (kind == ModelKind::han) {
        HanTrainResult r = train_han(data, cfg, han_cfg);
        report.history = r.history;
        report.best_epoch = r.best_epoch;
        report.test = eval_han(r.best, r.vocab, data.test);
        if (!checkpoint_path.empty()) save_han_checkpoint(r.best, r.vocab, checkpoint_path);
    } else if (kind == ModelKind::logreg || kind == ModelKind::svm) {
        LinearLoss loss = kind == ModelKind::logreg ? LinearLoss::logistic : LinearLoss::hinge;
        auto train_docs = docs_of(data.train);
        TfidfVectorizer vec;
        auto x_train = vec.fit_transform(train_docs);
        std::vector<SparseVec> x_dev, x_test;
        for (const auto& d : docs_of(data.dev)) x_dev.push_back(vec.transform(d));
        for (const auto& d : docs_of(data.test)) x_test.push_back(vec.transform(d));
        auto y_train = int_labels(data.train);
        double c = grid_search(x_train, y_train, x_dev, int_labels(data.dev), loss,
                               vec.num_features());
        LinearModel model = train_linear(x_train, y_train, c, loss, vec.num_features());
        std::vector<Label> preds;
        for (const auto& x : x_test) preds.push_back(model.predict(x));
        report.test = f1_score(preds, gold_labels(data.test));
        if (!checkpoint_path.empty()) save_linear_checkpoint(model, vec, checkpoint_path);
    } else {
        CharNgramConfig ccfg;
        ccfg.buckets = cfg.charngram_buckets;
        ccfg.epochs = cfg.charngram_epochs;
        ccfg.learning_rate = cfg.charngram_lr;
        ccfg.seed = cfg.seed;
        CharNgramClassifier model(ccfg);
        model.fit(docs_of(data.train), int_labels(data.train));
        std::vector<Label> preds;
        for (const auto& d : docs_of(data.test)) preds.push_back(model.predict(d));
        report.test = f1_score(preds, gold_labels(data.test));
        if (!checkpoint_path.empty()) save_charngram_checkpoint(model, checkpoint_path);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

Metrics evaluate_checkpoint(ModelKind kind, const std::string& checkpoint_path,
                            const ResolvedData& data, const HanConfig&,
                            std::vector<AttentionTrace>* traces_out) {
    if (kind == ModelKind::han) {
        HanCheckpoint ckpt = load_han_checkpoint(checkpoint_path);
        return eval_han(ckpt.params, ckpt.vocab, data.test, traces_out);
    }
    if (kind == ModelKind::logreg || kind == ModelKind::svm) {
        LinearLoss loss = kind == ModelKind::logreg ? LinearLoss::logistic : LinearLoss::hinge;
        LinearCheckpoint ckpt = load_linear_checkpoint(checkpoint_path, loss);
        std::vector<Label> preds;
        for (const auto& u : data.test)
            preds.push_back(ckpt.model.predict(ckpt.vectorizer.transform(user_document(u))));
        return f1_score(preds, gold_labels(data.test));
    }
    CharNgramClassifier model = load_charngram_checkpoint(checkpoint_path);
    std::vector<Label> preds;
    for (const auto& u : data.test) preds.push_back(model.predict(user_document(u)));
    return f1_score(preds, gold_labels(data.test));
}

namespace {

void partition_corpus(const Corpus& corpus, const std::string& condition,
                      std::vector<const UserRecord*>& diagnosed,
                      std::vector<const UserRecord*>& pool) {
    for (const auto& u : corpus) {
        if (u.label == Label::diagnosed) {
            if (condition.empty() || (u.condition && *u.condition == condition))
                diagnosed.push_back(&u);
        } else {
            pool.push_back(&u);
        }
    }
    if (diagnosed.empty())
        throw std::runtime_error("no diagnosed users for condition '" + condition + "'");
}

}  // namespace

ProtocolResult run_protocol(const Corpus& corpus, const std::string& condition,
                            const std::vector<ModelKind>& kinds, int n_resamplings,
                            const TrainConfig& cfg, const HanConfig& han_cfg) {
    if (n_resamplings < 1) throw std::invalid_argument("run_protocol: n_resamplings must be >= 1");
    std::vector<const UserRecord*> diagnosed, pool;
    partition_corpus(corpus, condition, diagnosed, pool);
    ProtocolResult result;
    for (int s = 1; s <= n_resamplings; ++s) {
        SubDataset ds = select_controls(diagnosed, pool, static_cast<std::uint64_t>(s));
        if (!condition.empty()) ds.condition = condition;
        assign_splits(ds, 0.8, 0.1, 0.1, static_cast<std::uint64_t>(s));
        ResolvedData data = resolve_subdataset(corpus, ds);
        for (ModelKind kind : kinds) {
            TrainConfig run_cfg = cfg;
            run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(s);
            result.runs.push_back(train_run(kind, data, run_cfg, han_cfg, ds.condition,
                                            static_cast<std::uint64_t>(s), ""));
        }
    }
    return result;
}

AblationReport run_ablation(const Corpus& corpus, const std::string& condition,
                            const std::vector<int>& caps, int n_seeds, const TrainConfig& cfg,
                            const HanConfig& han_cfg) {
    if (caps.empty()) throw std::invalid_argument("run_ablation: empty cap grid");
    std::vector<const UserRecord*> diagnosed, pool;
    partition_corpus(corpus, condition, diagnosed, pool);
    AblationReport report;
    report.condition = condition;
    for (int cap : caps) {
        AblationCell cell;
        cell.cap = cap;
        for (int s = 1; s <= n_seeds; ++s) {
            SubDataset ds = select_controls(diagnosed, pool, static_cast<std::uint64_t>(s));
            if (!condition.empty()) ds.condition = condition;
            assign_splits(ds, 0.8, 0.1, 0.1, static_cast<std::uint64_t>(s));
            ResolvedData data = resolve_subdataset(corpus, ds, cap);
            TrainConfig run_cfg = cfg;
            run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(s);
            cell.runs.push_back(train_run(ModelKind::han, data, run_cfg, han_cfg, ds.condition,
                                          static_cast<std::uint64_t>(s), ""));
        }
        report.cells.push_back(std::move(cell));
    }
    return report;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean_std: empty input");
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());  // population
    return {mean, std::sqrt(var)};
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

struct Group {
    std::string condition, model;
    std::vector<const RunReport*> runs;
};

std::vector<Group> group_runs(const std::vector<RunReport>& runs) {
    std::vector<Group> groups;
    for (const auto& r : runs) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return g.condition == r.condition && g.model == r.model;
        });
        if (it == groups.end()) {
            groups.push_back({r.condition, r.model, {}});
            it = groups.end() - 1;
        }
        it->runs.push_back(&r);
    }
    return groups;
}

}  // namespace

void write_report_csv(const std::vector<RunReport>& runs, std::ostream& os) {
    os << "condition,model,control_seed,precision,recall,f1\n";
    for (const auto& r : runs)
        os << r.condition << ',' << r.model << ',' << r.control_seed << ','
           << fmt6(r.test.precision) << ',' << fmt6(r.test.recall) << ',' << fmt6(r.test.f1)
           << '\n';
    for (const auto& g : group_runs(runs)) {
        std::vector<double> p, rr, f;
        for (const auto* r : g.runs) {
            p.push_back(r->test.precision);
            rr.push_back(r->test.recall);
            f.push_back(r->test.f1);
        }
        auto [pm, ps] = mean_std(p);
        auto [rm, rs] = mean_std(rr);
        auto [fm, fs] = mean_std(f);
        os << g.condition << ',' << g.model << ",mean," << fmt6(pm) << ',' << fmt6(rm) << ','
           << fmt6(fm) << '\n';
        os << g.condition << ',' << g.model << ",std," << fmt6(ps) << ',' << fmt6(rs) << ','
           << fmt6(fs) << '\n';
    }
}

void write_report_table(const std::vector<RunReport>& runs, std::ostream& os) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %-10s %-6s %10s %10s %10s\n", "condition", "model",
                  "seed", "precision", "recall", "f1");
    os << buf;
    for (const auto& r : runs) {
        std::snprintf(buf, sizeof(buf), "%-14s %-10s %-6llu %10.4f %10.4f %10.4f\n",
                      r.condition.c_str(), r.model.c_str(),
                      static_cast<unsigned long long>(r.control_seed), r.test.precision,
                      r.test.recall, r.test.f1);
        os << buf;
    }
    for (const auto& g : group_runs(runs)) {
        std::vector<double> f;
        for (const auto* r : g.runs) f.push_back(r->test.f1);
        auto [m, s] = mean_std(f);
        std::snprintf(buf, sizeof(buf), "%-14s %-10s %-6s %10s %10s %6.4f +/- %.4f\n",
                      g.condition.c_str(), g.model.c_str(), "all", "", "", m, s);
        os << buf;
    }
}

void write_ablation_csv(const AblationReport& report, std::ostream& os) {
    os << "condition,cap,control_seed,precision,recall,f1\n";
    for (const auto& cell : report.cells)
        for (const auto& r : cell.runs)
            os << report.condition << ',' << cell.cap << ',' << r.control_seed << ','
               << fmt6(r.test.precision) << ',' << fmt6(r.test.recall) << ',' << fmt6(r.test.f1)
               << '\n';
    for (const auto& cell : report.cells) {
        std::vector<double> f;
        for (const auto& r : cell.runs) f.push_back(r.test.f1);
        auto [m, s] = mean_std(f);
        os << report.condition << ',' << cell.cap << ",mean,,," << fmt6(m) << '\n';
        os << report.condition << ',' << cell.cap << ",std,,," << fmt6(s) << '\n';
    }
}

void write_ablation_table(const AblationReport& report, std::ostream& os) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-14s %6s %10s %10s\n", "condition", "cap", "mean_f1",
                  "std_f1");
    os << buf;
    for (const auto& cell : report.cells) {
        std::vector<double> f;
        for (const auto& r : cell.runs) f.push_back(r.test.f1);
        auto [m, s] = mean_std(f);
        std::snprintf(buf, sizeof(buf), "%-14s %6d %10.4f %10.4f\n", report.condition.c_str(),
                      cell.cap, m, s);
        os << buf;
    }
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": expected key=value");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "learning_rate") cfg.train.learning_rate = std::stod(value);
        else if (key == "batch_size") cfg.train.batch_size = std::stoi(value);
        else if (key == "epochs") cfg.train.epochs = std::stoi(value);
        else if (key == "beta1") cfg.train.beta1 = std::stod(value);
        else if (key == "beta2") cfg.train.beta2 = std::stod(value);
        else if (key == "epsilon") cfg.train.epsilon = std::stod(value);
        else if (key == "selection_metric") cfg.train.selection_metric = value;
        else if (key == "seed") cfg.train.seed = std::stoull(value);
        else if (key == "min_freq") cfg.train.min_freq = std::stoi(value);
        else if (key == "charngram_buckets") cfg.train.charngram_buckets = std::stoi(value);
        else if (key == "charngram_epochs") cfg.train.charngram_epochs = std::stoi(value);
        else if (key == "charngram_lr") cfg.train.charngram_lr = std::stod(value);
        else if (key == "embed_dim") cfg.han.embed_dim = std::stoi(value);
        else if (key == "gru_hidden") cfg.han.gru_hidden = std::stoi(value);
        else if (key == "attn_dim") cfg.han.attn_dim = std::stoi(value);
        else if (key == "penultimate_dim") cfg.han.penultimate_dim = std::stoi(value);
        else if (key == "max_tokens_per_post") cfg.han.max_tokens_per_post = std::stoi(value);
        else if (key == "max_posts_per_user") cfg.han.max_posts_per_user = std::stoi(value);
        else throw std::runtime_error("unknown config key: " + key);
    }
    cfg.train.validate();
    cfg.han.validate();
    return cfg;
}

SyntheticConfig load_synthetic_config(const std::string& path) {
    SyntheticConfig cfg;
    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "n_diagnosed") cfg.n_diagnosed = std::stoi(value);
        else if (key == "controls_per_diagnosed") cfg.controls_per_diagnosed = std::stoi(value);
        else if (key == "posts_per_user_mean") cfg.posts_per_user_mean = std::stod(value);
        else if (key == "post_len_mean") cfg.post_len_mean = std::stod(value);
        else if (key == "vocab_size") cfg.vocab_size = std::stoi(value);
        else if (key == "signal_strength") cfg.signal_strength = std::stod(value);
        else if (key == "condition") cfg.condition = value;
        else if (key == "signal_lexicon") {
            cfg.signal_lexicon.clear();
            std::istringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                std::size_t b = tok.find_first_not_of(" \t");
                std::size_t e = tok.find_last_not_of(" \t");
                if (b != std::string::npos) cfg.signal_lexicon.push_back(tok.substr(b, e - b + 1));
            }
        } else {
            throw std::runtime_error("unknown synthetic config key: " + key);
        }
    }
    return cfg;
}

}  // namespace userhan
