#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "userhan/han.hpp"

using namespace userhan;

namespace {

HanConfig tiny_config() {
    HanConfig cfg;
    cfg.embed_dim = 4;
    cfg.gru_hidden = 3;
    cfg.attn_dim = 3;
    cfg.penultimate_dim = 2;
    return cfg;
}

Vocabulary tiny_vocab() {
    return build_vocab({{"alpha", "alpha", "beta", "gamma", "delta"}}, 1);
}

UserRecord user_of(std::vector<std::string> posts, Label label = Label::control) {
    UserRecord u;
    u.user_id = "u";
    u.label = label;
    if (label == Label::diagnosed) u.condition = "depression";
    u.posts = std::move(posts);
    return u;
}

}  // namespace

TEST_CASE("prepare_user") {
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    SUBCASE("maps tokens, drops empty posts") {
        PreparedUser pu = prepare_user(user_of({"Alpha beta", "...", "unknown gamma"}), vocab, cfg);
        CHECK(pu.post_ids.size() == 2);  // "..." tokenizes to nothing
        CHECK(pu.post_ids[0] == std::vector<int>{vocab.encode("alpha"), vocab.encode("beta")});
        CHECK(pu.post_ids[1][0] == kUnkId);
    }
    SUBCASE("caps tokens and posts") {
        cfg.max_tokens_per_post = 2;
        cfg.max_posts_per_user = 1;
        PreparedUser pu = prepare_user(user_of({"alpha beta gamma", "delta"}), vocab, cfg);
        CHECK(pu.post_ids.size() == 1);
        CHECK(pu.post_ids[0].size() == 2);
    }
    SUBCASE("no usable posts") {
        CHECK_THROWS_AS(prepare_user(user_of({"...", "!!"}), vocab, cfg), std::runtime_error);
    }
}

TEST_CASE("attention trace structure") {
    Rng rng(11);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    SUBCASE("single post gets weight exactly 1") {
        Tape t;
        auto enc = encode_user(t, prepare_user(user_of({"alpha beta"}), vocab, cfg), p);
        REQUIRE(enc.trace.post_weights.size() == 1);
        CHECK(enc.trace.post_weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("identical tokens split word attention evenly") {
        // pin the update gate open and cut the recurrent paths so a token's
        // hidden state no longer depends on its position
        for (GruParams* g : {&p.word_fwd, &p.word_bwd}) {
            for (Tensor w : {g->u_update, g->u_reset, g->u_cand})
                std::fill(w.data().begin(), w.data().end(), 0.0);
            std::fill(g->b_update.data().begin(), g->b_update.data().end(), 50.0);
        }
        Tape t;
        auto enc = encode_user(t, prepare_user(user_of({"alpha alpha alpha"}), vocab, cfg), p);
        for (double w : enc.trace.posts[0].word_weights)
            CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-9));
    }
    SUBCASE("weights sum to 1 at both levels") {
        Tape t;
        auto enc = encode_user(
            t, prepare_user(user_of({"alpha beta gamma", "delta alpha", "beta beta gamma alpha"}),
                            vocab, cfg),
            p);
        double ps = 0;
        for (double w : enc.trace.post_weights) ps += w;
        CHECK(ps == doctest::Approx(1.0).epsilon(1e-9));
        for (const auto& post : enc.trace.posts) {
            double ws = 0;
            for (double w : post.word_weights) ws += w;
            CHECK(ws == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("trace mirrors the prepared tokens") {
        Tape t;
        PreparedUser pu = prepare_user(user_of({"alpha beta", "gamma"}), vocab, cfg);
        auto enc = encode_user(t, pu, p);
        REQUIRE(enc.trace.posts.size() == 2);
        CHECK(enc.trace.posts[0].tokens == std::vector<std::string>{"alpha", "beta"});
        CHECK(enc.trace.posts[1].tokens == std::vector<std::string>{"gamma"});
        CHECK(enc.trace.posts[0].word_weights.size() == 2);
    }
}

TEST_CASE("zeroed output head gives probability one half") {
    Rng rng(12);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    std::fill(p.output.weight.data().begin(), p.output.weight.data().end(), 0.0);
    std::fill(p.output.bias.data().begin(), p.output.bias.data().end(), 0.0);
    Prediction pred = predict(prepare_user(user_of({"alpha beta"}), vocab, cfg), p);
    CHECK(pred.probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pred.label == Label::diagnosed);  // threshold ties read as diagnosed
}

TEST_CASE("predict threshold boundary") {
    Rng rng(13);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    PreparedUser pu = prepare_user(user_of({"alpha beta gamma"}), vocab, cfg);
    Prediction pred = predict(pu, p);
    Tape t;
    double prob = 1.0 / (1.0 + std::exp(-encode_user(t, pu, p).logit.item()));
    CHECK(pred.probability == doctest::Approx(prob).epsilon(1e-12));
    CHECK(predict(pu, p, prob).label == Label::diagnosed);        // tie inclusive
    CHECK(predict(pu, p, prob + 1e-9).label == Label::control);   // just above
}

TEST_CASE("forward_batch equals per-user encoding") {
    Rng rng(14);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    std::vector<PreparedUser> users{
        prepare_user(user_of({"alpha beta", "gamma delta"}), vocab, cfg),
        prepare_user(user_of({"delta delta alpha"}), vocab, cfg),
        prepare_user(user_of({"beta", "beta gamma", "alpha"}), vocab, cfg),
    };
    Tape t;
    BatchOutput batch = forward_batch(t, users, p);
    REQUIRE(batch.logits.size() == 3);
    for (std::size_t i = 0; i < users.size(); ++i) {
        Tape ti;
        auto single = encode_user(ti, users[i], p);
        CHECK(std::abs(batch.logits[i].item() - single.logit.item()) <= 1e-9);
        for (std::size_t k = 0; k < single.trace.post_weights.size(); ++k)
            CHECK(std::abs(batch.traces[i].post_weights[k] - single.trace.post_weights[k]) <=
                  1e-9);
    }
}

TEST_CASE("truncation independence") {
    // capping posts at n gives the same logit as feeding only the first n posts
    Rng rng(15);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    UserRecord full = user_of({"alpha beta", "gamma", "delta alpha", "beta beta"});
    cfg.max_posts_per_user = 2;
    Tape t1, t2;
    double capped = encode_user(t1, prepare_user(full, vocab, cfg), p).logit.item();
    cfg.max_posts_per_user = 0;
    double manual =
        encode_user(t2, prepare_user(truncate_posts(full, 2), vocab, cfg), p).logit.item();
    CHECK(capped == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("end-to-end grad check on a 2-post toy user") {
    Rng rng(16);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    // move params off tiny init so no gradient sits at the differencing floor
    Rng jitter(17);
    for (Tensor w : p.parameters())
        for (auto& v : w.data()) v = jitter.uniform(-0.5, 0.5);
    for (int j = 0; j < cfg.embed_dim; ++j) p.embedding.matrix.data()[kPadId * cfg.embed_dim + j] = 0;
    PreparedUser pu = prepare_user(user_of({"alpha beta gamma", "delta alpha beta"}), vocab, cfg);
    double err = grad_check(
        [&](Tape& t) { return bce_loss(t, encode_user(t, pu, p).logit, 1); }, p.parameters(),
        1e-4);
    CHECK(err <= 1e-6);
}

TEST_CASE("checkpoint round-trip is bit-identical") {
    Rng rng(18);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    const char* path = "han_ckpt.json";
    save_han_checkpoint(p, vocab, path);
    HanCheckpoint back = load_han_checkpoint(path);
    CHECK(back.vocab.id_to_token == vocab.id_to_token);
    CHECK(back.params.config.gru_hidden == cfg.gru_hidden);
    auto orig = p.parameters();
    auto loaded = back.params.parameters();
    REQUIRE(orig.size() == loaded.size());
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(orig[i].data() == loaded[i].data());
    // identical logits on the same input
    PreparedUser pu = prepare_user(user_of({"alpha beta", "gamma"}), vocab, cfg);
    Tape t1, t2;
    CHECK(encode_user(t1, pu, p).logit.item() ==
          encode_user(t2, pu, back.params).logit.item());
    std::remove(path);
}

TEST_CASE("trace export round-trip") {
    Rng rng(19);
    Vocabulary vocab = tiny_vocab();
    HanConfig cfg = tiny_config();
    HanParams p = HanParams::init(cfg, vocab.size(), rng);
    Tape t;
    auto enc = encode_user(t, prepare_user(user_of({"alpha beta", "gamma delta"}), vocab, cfg), p);
    const char* path = "traces.jsonl";
    export_traces({enc.trace}, path);
    auto back = load_traces(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].user_id == enc.trace.user_id);
    CHECK(back[0].post_weights == enc.trace.post_weights);
    REQUIRE(back[0].posts.size() == 2);
    CHECK(back[0].posts[1].tokens == enc.trace.posts[1].tokens);
    CHECK(back[0].posts[1].word_weights == enc.trace.posts[1].word_weights);
    std::remove(path);
}
