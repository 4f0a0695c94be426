#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "userhan/experiment.hpp"

using namespace userhan;

namespace {

Corpus small_synthetic(double delta, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.n_diagnosed = 10;
    cfg.posts_per_user_mean = 4;
    cfg.post_len_mean = 8;
    cfg.vocab_size = 60;
    cfg.signal_strength = delta;
    return generate_synthetic(cfg, seed);
}

HanConfig tiny_han() {
    HanConfig cfg;
    cfg.embed_dim = 4;
    cfg.gru_hidden = 3;
    cfg.attn_dim = 3;
    cfg.penultimate_dim = 2;
    return cfg;
}

}  // namespace

TEST_CASE("adam_step") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    SUBCASE("first step moves by about the learning rate") {
        Tensor p = Tensor::vector({1.0, -2.0}, true);
        p.grad() = {1.0, 1.0};
        std::vector<Tensor> params{p};
        AdamState state;
        adam_step(params, state, 1, cfg);
        // m_hat = g, v_hat = g^2 -> step = lr * g/(|g| + eps) ~= lr
        CHECK(p.data()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
        CHECK(p.data()[1] == doctest::Approx(-2.0 - 0.1).epsilon(1e-6));
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        Tensor p = Tensor::vector({3.0}, true);
        p.grad() = {0.0};
        std::vector<Tensor> params{p};
        AdamState state;
        adam_step(params, state, 1, cfg);
        CHECK(p.data()[0] == 3.0);
    }
    SUBCASE("two-step scalar recurrence oracle") {
        Rng rng(21);
        for (int trial = 0; trial < 100; ++trial) {
            double g1 = rng.uniform(-2, 2), g2 = rng.uniform(-2, 2);
            double x0 = rng.uniform(-1, 1);
            Tensor p = Tensor::vector({x0}, true);
            std::vector<Tensor> params{p};
            AdamState state;
            p.grad() = {g1};
            adam_step(params, state, 1, cfg);
            p.zero_grad();
            p.grad() = {g2};
            adam_step(params, state, 2, cfg);
            // independent scalar recurrence
            double m = 0, v = 0, x = x0;
            for (int t = 1; t <= 2; ++t) {
                double g = t == 1 ? g1 : g2;
                m = cfg.beta1 * m + (1 - cfg.beta1) * g;
                v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
                double mh = m / (1 - std::pow(cfg.beta1, t));
                double vh = v / (1 - std::pow(cfg.beta2, t));
                x -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
            }
            CHECK(std::abs(p.data()[0] - x) <= 1e-12);
        }
    }
    SUBCASE("shape mismatch against existing state") {
        Tensor p = Tensor::vector({1.0, 2.0}, true);
        p.grad() = {1.0, 1.0};
        std::vector<Tensor> params{p};
        AdamState state;
        adam_step(params, state, 1, cfg);
        Tensor q = Tensor::vector({1.0, 2.0, 3.0}, true);
        std::vector<Tensor> bad{q};
        CHECK_THROWS_AS(adam_step(bad, state, 2, cfg), std::invalid_argument);
    }
}

TEST_CASE("f1_score") {
    using L = Label;
    SUBCASE("perfect predictions") {
        Metrics m = f1_score({L::diagnosed, L::control}, {L::diagnosed, L::control});
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    SUBCASE("hand case TP=3 FP=1 FN=2") {
        std::vector<L> labels = {L::diagnosed, L::diagnosed, L::diagnosed, L::diagnosed,
                                 L::diagnosed, L::control};
        std::vector<L> preds = {L::diagnosed, L::diagnosed, L::diagnosed, L::control,
                                L::control, L::diagnosed};
        Metrics m = f1_score(preds, labels);
        CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(m.recall == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(m.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-12));
        CHECK(m.f1 == doctest::Approx(0.6667).epsilon(1e-4));
    }
    SUBCASE("no positive predictions gives zeros") {
        Metrics m = f1_score({L::control, L::control}, {L::diagnosed, L::control});
        CHECK(m.precision == 0.0);
        CHECK(m.f1 == 0.0);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(f1_score({L::control}, {}), std::invalid_argument);
    }
    SUBCASE("brute-force confusion-matrix fuzz") {
        Rng rng(22);
        for (int trial = 0; trial < 1000; ++trial) {
            int n = 1 + static_cast<int>(rng.index(20));
            std::vector<L> preds(n), labels(n);
            for (int i = 0; i < n; ++i) {
                preds[i] = rng.index(2) ? L::diagnosed : L::control;
                labels[i] = rng.index(2) ? L::diagnosed : L::control;
            }
            int tp = 0, fp = 0, fn = 0;
            for (int i = 0; i < n; ++i) {
                if (preds[i] == L::diagnosed && labels[i] == L::diagnosed) ++tp;
                if (preds[i] == L::diagnosed && labels[i] == L::control) ++fp;
                if (preds[i] == L::control && labels[i] == L::diagnosed) ++fn;
            }
            double p = tp + fp ? double(tp) / (tp + fp) : 0.0;
            double r = tp + fn ? double(tp) / (tp + fn) : 0.0;
            double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
            Metrics m = f1_score(preds, labels);
            CHECK(m.precision == p);
            CHECK(m.recall == r);
            CHECK(m.f1 == f);
        }
    }
}

TEST_CASE("mean_std worked example") {
    auto [mean, std] = mean_std({68.0, 69.0, 67.0, 68.5, 68.0});
    CHECK(mean == doctest::Approx(68.1).epsilon(1e-12));
    CHECK(std == doctest::Approx(0.663325).epsilon(1e-4));
    auto [m1, s1] = mean_std({5.0});
    CHECK(m1 == 5.0);
    CHECK(s1 == 0.0);
}

TEST_CASE("model kind names round-trip") {
    for (const char* name : {"han", "logreg", "svm", "charngram"}) {
        CHECK(model_kind_name(parse_model_kind(name)) == name);
    }
    CHECK_THROWS_AS(parse_model_kind("mystery"), std::invalid_argument);
}

TEST_CASE("config file parsing") {
    const char* path = "exp_cfg.txt";
    SUBCASE("valid keys accepted") {
        {
            std::ofstream out(path);
            out << "learning_rate = 0.001\n";
            out << "# comment line\n";
            out << "epochs = 3\n";
            out << "gru_hidden = 5\n";
        }
        ExperimentConfig cfg = load_experiment_config(path);
        CHECK(cfg.train.learning_rate == 0.001);
        CHECK(cfg.train.epochs == 3);
        CHECK(cfg.han.gru_hidden == 5);
        CHECK(cfg.train.batch_size == 32);  // defaults survive
    }
    SUBCASE("unknown key rejected") {
        {
            std::ofstream out(path);
            out << "learning_rote = 0.1\n";
        }
        CHECK_THROWS_WITH_AS(load_experiment_config(path), doctest::Contains("learning_rote"),
                             std::runtime_error);
    }
    SUBCASE("synthetic config") {
        {
            std::ofstream out(path);
            out << "n_diagnosed = 7\n";
            out << "signal_strength = 0.25\n";
            out << "signal_lexicon = red,green,blue\n";
        }
        SyntheticConfig cfg = load_synthetic_config(path);
        CHECK(cfg.n_diagnosed == 7);
        CHECK(cfg.signal_strength == 0.25);
        CHECK(cfg.signal_lexicon == std::vector<std::string>{"red", "green", "blue"});
    }
    std::remove(path);
}

TEST_CASE("resolve_subdataset honors the post cap") {
    Corpus corpus = small_synthetic(0.0, 31);
    std::vector<const UserRecord*> diag, pool;
    for (const auto& u : corpus)
        (u.label == Label::diagnosed ? diag : pool).push_back(&u);
    SubDataset ds = select_controls(diag, pool, 1);
    ds.condition = "synthetic";
    assign_splits(ds, 0.6, 0.2, 0.2, 1);
    ResolvedData plain = resolve_subdataset(corpus, ds);
    ResolvedData capped = resolve_subdataset(corpus, ds, 2);
    CHECK(plain.train.size() == capped.train.size());
    for (const auto& u : capped.train) CHECK(u.num_posts() <= 2);
    int total = int(plain.train.size() + plain.dev.size() + plain.test.size());
    CHECK(total == 100);  // 10 + 90 users
}

TEST_CASE("training runs are deterministic per seed") {
    Corpus corpus = small_synthetic(0.4, 33);
    std::vector<const UserRecord*> diag, pool;
    for (const auto& u : corpus)
        (u.label == Label::diagnosed ? diag : pool).push_back(&u);
    SubDataset ds = select_controls(diag, pool, 2);
    ds.condition = "synthetic";
    assign_splits(ds, 0.6, 0.2, 0.2, 2);
    ResolvedData data = resolve_subdataset(corpus, ds);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 5;
    cfg.learning_rate = 0.01;
    cfg.charngram_buckets = 2000;
    cfg.charngram_epochs = 5;
    HanConfig han = tiny_han();
    for (ModelKind kind :
         {ModelKind::han, ModelKind::logreg, ModelKind::svm, ModelKind::charngram}) {
        CAPTURE(model_kind_name(kind));
        RunReport a = train_run(kind, data, cfg, han, "synthetic", 2, "");
        RunReport b = train_run(kind, data, cfg, han, "synthetic", 2, "");
        CHECK(a.test.precision == b.test.precision);
        CHECK(a.test.recall == b.test.recall);
        CHECK(a.test.f1 == b.test.f1);
        CHECK(a.model == model_kind_name(kind));
    }
}

TEST_CASE("han selection keeps the best dev epoch") {
    Corpus corpus = small_synthetic(0.5, 34);
    std::vector<const UserRecord*> diag, pool;
    for (const auto& u : corpus)
        (u.label == Label::diagnosed ? diag : pool).push_back(&u);
    SubDataset ds = select_controls(diag, pool, 3);
    ds.condition = "synthetic";
    assign_splits(ds, 0.6, 0.2, 0.2, 3);
    ResolvedData data = resolve_subdataset(corpus, ds);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 6;
    cfg.learning_rate = 0.05;
    RunReport r = train_run(ModelKind::han, data, cfg, tiny_han(), "synthetic", 3, "");
    REQUIRE(r.history.size() == 3);
    REQUIRE(r.best_epoch >= 1);  // 1-based epoch number
    const EpochStats& best = r.history[r.best_epoch - 1];
    for (const auto& e : r.history) CHECK(best.dev.f1 >= e.dev.f1);
    // strict-argmax ties keep the earlier epoch
    for (int i = 0; i < r.best_epoch - 1; ++i) CHECK(best.dev.f1 > r.history[i].dev.f1);
}

TEST_CASE("checkpoint evaluation matches the training report") {
    Corpus corpus = small_synthetic(0.4, 35);
    std::vector<const UserRecord*> diag, pool;
    for (const auto& u : corpus)
        (u.label == Label::diagnosed ? diag : pool).push_back(&u);
    SubDataset ds = select_controls(diag, pool, 4);
    ds.condition = "synthetic";
    assign_splits(ds, 0.6, 0.2, 0.2, 4);
    ResolvedData data = resolve_subdataset(corpus, ds);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 7;
    cfg.learning_rate = 0.01;
    HanConfig han = tiny_han();
    const char* path = "exp_ckpt.json";
    RunReport r = train_run(ModelKind::han, data, cfg, han, "synthetic", 4, path);
    std::vector<AttentionTrace> traces;
    Metrics m = evaluate_checkpoint(ModelKind::han, path, data, han, &traces);
    CHECK(m.f1 == r.test.f1);
    CHECK(m.precision == r.test.precision);
    std::remove(path);
}

TEST_CASE("report csv formatting is stable") {
    RunReport r;
    r.condition = "synthetic";
    r.model = "han";
    r.control_seed = 1;
    r.test = {0.5, 0.25, 1.0 / 3};
    RunReport r2 = r;
    r2.control_seed = 2;
    r2.test = {0.75, 0.5, 0.6};
    std::ostringstream a, b;
    write_report_csv({r, r2}, a);
    write_report_csv({r, r2}, b);
    CHECK(a.str() == b.str());
    CHECK(a.str().find("condition,model,control_seed,precision,recall,f1") == 0);
    CHECK(a.str().find("0.333333") != std::string::npos);
    CHECK(a.str().find("mean") != std::string::npos);
    std::ostringstream table;
    write_report_table({r, r2}, table);
    CHECK(table.str().find("han") != std::string::npos);
}
