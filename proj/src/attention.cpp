#include "userhan/attention.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace userhan {

std::vector<Ngram> top2(const PostTrace& post) {
    std::size_t n = post.tokens.size();
    if (n == 0 || post.word_weights.size() != n)
        throw std::invalid_argument("top2: post must have tokens with matching weights");
    if (n == 1) return {{post.tokens[0], NgramKind::unigram}};
    std::size_t first = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (post.word_weights[i] > post.word_weights[first]) first = i;
    std::size_t second = first == 0 ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == first) continue;
        if (post.word_weights[i] > post.word_weights[second]) second = i;
    }
    std::size_t lo = std::min(first, second), hi = std::max(first, second);
    if (hi == lo + 1) return {{post.tokens[lo] + " " + post.tokens[hi], NgramKind::bigram}};
    return {{post.tokens[first], NgramKind::unigram}, {post.tokens[second], NgramKind::unigram}};
}

std::vector<NgramCount> accumulate(const std::vector<AttentionTrace>& traces,
                                   const std::unordered_set<std::string>* user_filter,
                                   int limit) {
    if (traces.empty()) throw std::invalid_argument("accumulate: empty trace set");
    // ordered map keyed by (text, kind) for a deterministic tie order
    std::map<std::pair<std::string, int>, long long> counts;
    for (const auto& tr : traces) {
        if (user_filter && !user_filter->count(tr.user_id)) continue;
        for (const auto& post : tr.posts)
            for (const auto& g : top2(post)) ++counts[{g.text, static_cast<int>(g.kind)}];
    }
    std::vector<NgramCount> ranked;
    for (const auto& [key, c] : counts)
        ranked.push_back({{key.first, static_cast<NgramKind>(key.second)}, c});
    std::stable_sort(ranked.begin(), ranked.end(), [](const NgramCount& a, const NgramCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.ngram.text < b.ngram.text;
    });
    if (limit > 0 && static_cast<int>(ranked.size()) > limit) ranked.resize(limit);
    return ranked;
}

CategoryLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
    CategoryLexicon lex;
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
        std::size_t colon = t.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": expected 'category: pattern, ...'");
        Category cat;
        cat.name = trim(t.substr(0, colon));
        if (cat.name.empty())
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": empty category name");
        for (const auto& c : lex.categories)
            if (c.name == cat.name)
                throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                         ": duplicate category '" + cat.name + "'");
        std::string rest = t.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            std::size_t comma = rest.find(',', pos);
            std::string pat = trim(rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                               : comma - pos));
            if (!pat.empty()) cat.patterns.push_back(pat);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cat.patterns.empty())
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": category '" + cat.name + "' has no patterns");
        lex.categories.push_back(std::move(cat));
    }
    return lex;
}

bool pattern_matches(const std::string& pattern, const std::string& token) {
    if (pattern.empty()) return false;
    if (pattern.back() == '*') {
        std::string prefix = pattern.substr(0, pattern.size() - 1);
        return token.compare(0, prefix.size(), prefix) == 0;
    }
    return token == pattern;
}

std::vector<std::string> categories_of(const Ngram& ngram, const CategoryLexicon& lexicon) {
    std::vector<std::string> tokens;
    std::size_t space = ngram.text.find(' ');
    if (ngram.kind == NgramKind::bigram && space != std::string::npos) {
        tokens.push_back(ngram.text.substr(0, space));
        tokens.push_back(ngram.text.substr(space + 1));
    } else {
        tokens.push_back(ngram.text);
    }
    std::vector<std::string> out;
    for (const auto& cat : lexicon.categories) {
        bool hit = false;
        for (const auto& pat : cat.patterns) {
            for (const auto& tok : tokens)
                if (pattern_matches(pat, tok)) {
                    hit = true;
                    break;
                }
            if (hit) break;
        }
        if (hit) out.push_back(cat.name);
    }
    if (out.empty()) out.push_back("Other");
    return out;
}

}  // namespace userhan
