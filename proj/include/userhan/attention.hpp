#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "userhan/han.hpp"

namespace userhan {

enum class NgramKind { unigram, bigram };

struct Ngram {
    std::string text;  // bigram tokens space-joined in text order
    NgramKind kind = NgramKind::unigram;

    bool operator==(const Ngram& o) const { return text == o.text && kind == o.kind; }
};

struct NgramCount {
    Ngram ngram;
    long long count = 0;
};

// The two highest-weight positions of one post (ties toward the lower
// index). Adjacent positions merge into one bigram; a single-token post
// yields one unigram.
std::vector<Ngram> top2(const PostTrace& post);

// top2 over every post of every in-scope user, counted and ranked by count
// desc then text asc, unigrams and bigrams jointly; at most `limit` entries.
std::vector<NgramCount> accumulate(const std::vector<AttentionTrace>& traces,
                                   const std::unordered_set<std::string>* user_filter = nullptr,
                                   int limit = 100);

struct Category {
    std::string name;
    std::vector<std::string> patterns;  // literal token or prefix ending in '*'
};

struct CategoryLexicon {
    std::vector<Category> categories;
};

// File format: one `category_name: pattern, pattern, ...` per line.
CategoryLexicon load_lexicon(const std::string& path);

bool pattern_matches(const std::string& pattern, const std::string& token);

// Every matching category, in lexicon order; "Other" when none match. A
// bigram matches through either of its tokens.
std::vector<std::string> categories_of(const Ngram& ngram, const CategoryLexicon& lexicon);

}  // namespace userhan
