#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "userhan/attention.hpp"
#include "userhan/rng.hpp"

using namespace userhan;

namespace {

PostTrace post(std::vector<std::string> tokens, std::vector<double> weights) {
    return {std::move(tokens), std::move(weights)};
}

AttentionTrace trace_of(const std::string& id, std::vector<PostTrace> posts) {
    AttentionTrace t;
    t.user_id = id;
    t.post_weights.assign(posts.size(), 1.0 / posts.size());
    t.posts = std::move(posts);
    return t;
}

}  // namespace

TEST_CASE("top2") {
    SUBCASE("adjacent winners form a bigram in text order") {
        auto out = top2(post({"a", "b", "c"}, {0.1, 0.5, 0.4}));
        REQUIRE(out.size() == 1);
        CHECK(out[0].text == "b c");
        CHECK(out[0].kind == NgramKind::bigram);
    }
    SUBCASE("non-adjacent winners stay unigrams") {
        auto out = top2(post({"a", "b", "c"}, {0.5, 0.1, 0.4}));
        REQUIRE(out.size() == 2);
        CHECK(out[0].kind == NgramKind::unigram);
        CHECK(out[1].kind == NgramKind::unigram);
        CHECK(((out[0].text == "a" && out[1].text == "c") ||
               (out[0].text == "c" && out[1].text == "a")));
    }
    SUBCASE("single token post") {
        auto out = top2(post({"a"}, {1.0}));
        REQUIRE(out.size() == 1);
        CHECK(out[0].text == "a");
        CHECK(out[0].kind == NgramKind::unigram);
    }
    SUBCASE("two-token post is always a bigram") {
        auto out = top2(post({"x", "y"}, {0.9, 0.1}));
        REQUIRE(out.size() == 1);
        CHECK(out[0].text == "x y");
        CHECK(out[0].kind == NgramKind::bigram);
    }
    SUBCASE("weight ties resolve to lower positions") {
        // equal weights everywhere: positions 0 and 1 win -> adjacent bigram
        auto out = top2(post({"p", "q", "r", "s"}, {0.25, 0.25, 0.25, 0.25}));
        REQUIRE(out.size() == 1);
        CHECK(out[0].text == "p q");
    }
    SUBCASE("invariant under uniform weight rescaling") {
        PostTrace a = post({"a", "b", "c", "d"}, {0.4, 0.1, 0.3, 0.2});
        PostTrace b = a;
        for (auto& w : b.word_weights) w *= 7.5;
        CHECK(top2(a) == top2(b));
    }
    SUBCASE("empty post rejected") {
        CHECK_THROWS_AS(top2(post({}, {})), std::invalid_argument);
        CHECK_THROWS_AS(top2(post({"a"}, {0.5, 0.5})), std::invalid_argument);
    }
}

TEST_CASE("accumulate") {
    SUBCASE("one user one post") {
        auto counts = accumulate({trace_of("u", {post({"a"}, {1.0})})});
        REQUIRE(counts.size() == 1);
        CHECK(counts[0].ngram.text == "a");
        CHECK(counts[0].count == 1);
    }
    SUBCASE("repeated bigrams count up") {
        auto counts = accumulate({trace_of("u", {post({"a", "b", "c"}, {0.1, 0.5, 0.4}),
                                                 post({"x", "b", "c"}, {0.0, 0.6, 0.4})})});
        REQUIRE(counts.size() == 1);
        CHECK(counts[0].ngram.text == "b c");
        CHECK(counts[0].count == 2);
    }
    SUBCASE("conservation: totals match per-post contributions") {
        Rng rng(41);
        std::vector<AttentionTrace> traces;
        long long expected = 0;
        for (int u = 0; u < 5; ++u) {
            std::vector<PostTrace> posts;
            for (int p = 0; p < 6; ++p) {
                int len = 1 + static_cast<int>(rng.index(5));
                std::vector<std::string> toks(len);
                std::vector<double> ws(len);
                for (int i = 0; i < len; ++i) {
                    toks[i] = std::string(1, char('a' + rng.index(6)));
                    ws[i] = rng.uniform(0, 1);
                }
                posts.push_back(post(toks, ws));
                expected += static_cast<long long>(top2(posts.back()).size());
            }
            traces.push_back(trace_of("u" + std::to_string(u), std::move(posts)));
        }
        long long total = 0;
        for (const auto& c : accumulate(traces, nullptr, 1000)) total += c.count;
        CHECK(total == expected);
    }
    SUBCASE("ranking is count desc then text asc, limit applies") {
        std::vector<PostTrace> posts;
        for (int i = 0; i < 3; ++i) posts.push_back(post({"zz"}, {1.0}));
        for (int i = 0; i < 3; ++i) posts.push_back(post({"aa"}, {1.0}));
        posts.push_back(post({"mm"}, {1.0}));
        auto counts = accumulate({trace_of("u", posts)});
        REQUIRE(counts.size() == 3);
        CHECK(counts[0].ngram.text == "aa");  // tie with zz broken by text
        CHECK(counts[1].ngram.text == "zz");
        CHECK(counts[2].ngram.text == "mm");
        auto limited = accumulate({trace_of("u", posts)}, nullptr, 2);
        REQUIRE(limited.size() == 2);
        CHECK(limited[1].ngram.text == "zz");
    }
    SUBCASE("user filter restricts the scope") {
        std::vector<AttentionTrace> traces{
            trace_of("keep", {post({"a"}, {1.0})}),
            trace_of("drop", {post({"b"}, {1.0})}),
        };
        std::unordered_set<std::string> keep{"keep"};
        auto counts = accumulate(traces, &keep);
        REQUIRE(counts.size() == 1);
        CHECK(counts[0].ngram.text == "a");
    }
}

TEST_CASE("lexicon") {
    const char* path = "lexicon_test.txt";
    {
        std::ofstream out(path);
        out << "pronoun: i, my, her\n";
        out << "\n";
        out << "# social words\n";
        out << "social: friend*, family\n";
    }
    CategoryLexicon lex = load_lexicon(path);
    REQUIRE(lex.categories.size() == 2);
    CHECK(lex.categories[0].name == "pronoun");
    CHECK(lex.categories[1].patterns == std::vector<std::string>{"friend*", "family"});

    SUBCASE("pattern matching") {
        CHECK(pattern_matches("my", "my"));
        CHECK(!pattern_matches("my", "myself"));
        CHECK(pattern_matches("friend*", "friend"));
        CHECK(pattern_matches("friend*", "friends"));
        CHECK(!pattern_matches("friend*", "fried"));
    }
    SUBCASE("unigram categories") {
        CHECK(categories_of({"my", NgramKind::unigram}, lex) ==
              std::vector<std::string>{"pronoun"});
        CHECK(categories_of({"friends", NgramKind::unigram}, lex) ==
              std::vector<std::string>{"social"});
        CHECK(categories_of({"zzz", NgramKind::unigram}, lex) ==
              std::vector<std::string>{"Other"});
    }
    SUBCASE("bigram matches through either token") {
        CHECK(categories_of({"my friend", NgramKind::bigram}, lex) ==
              std::vector<std::string>{"pronoun", "social"});
        CHECK(categories_of({"the weather", NgramKind::bigram}, lex) ==
              std::vector<std::string>{"Other"});
    }
    std::remove(path);
}

TEST_CASE("lexicon parse errors carry line numbers") {
    const char* path = "lexicon_bad.txt";
    {
        std::ofstream out(path);
        out << "pronoun: i\n";
        out << "no-colon-here\n";
    }
    CHECK_THROWS_WITH_AS(load_lexicon(path), doctest::Contains("line 2"), std::runtime_error);
    {
        std::ofstream out(path);
        out << "pronoun: i\n";
        out << "pronoun: my\n";
    }
    CHECK_THROWS_AS(load_lexicon(path), std::runtime_error);  // duplicate category
    {
        std::ofstream out(path);
        out << "empty:\n";
    }
    CHECK_THROWS_AS(load_lexicon(path), std::runtime_error);
    std::remove(path);
}

TEST_CASE("deterministic accumulation bytes") {
    std::vector<AttentionTrace> traces{
        trace_of("u1", {post({"a", "b"}, {0.6, 0.4}), post({"c"}, {1.0})}),
        trace_of("u2", {post({"a", "b"}, {0.5, 0.5})}),
    };
    auto render = [&]() {
        std::string s;
        for (const auto& c : accumulate(traces)) {
            s += c.ngram.text + "|" + (c.ngram.kind == NgramKind::bigram ? "2" : "1") + "|" +
                 std::to_string(c.count) + "\n";
        }
        return s;
    };
    CHECK(render() == render());
}
