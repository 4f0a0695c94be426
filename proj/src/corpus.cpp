#include "userhan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace userhan {

std::string label_name(Label l) { return l == Label::diagnosed ? "diagnosed" : "control"; }

Label parse_label(const std::string& s) {
    if (s == "diagnosed") return Label::diagnosed;
    if (s == "control") return Label::control;
    throw std::runtime_error("unknown label: " + s);
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        default: return "test";
    }
}

static Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw std::runtime_error("unknown split: " + s);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0, n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            std::string piece = text.substr(i, j - i);
            for (auto& c : piece) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            std::size_t b = 0, e = piece.size();
            while (b < e && !std::isalnum(static_cast<unsigned char>(piece[b]))) ++b;
            while (e > b && !std::isalnum(static_cast<unsigned char>(piece[e - 1]))) --e;
            if (e > b) out.push_back(piece.substr(b, e - b));
        }
        i = j;
    }
    return out;
}

int Vocabulary::encode(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnkId : it->second;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs, int min_freq) {
    if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
    if (docs.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    std::unordered_map<std::string, long long> counts;
    for (const auto& doc : docs)
        for (const auto& tok : doc) ++counts[tok];
    std::vector<std::pair<std::string, long long>> kept;
    for (const auto& [tok, c] : counts)
        if (c >= min_freq) kept.emplace_back(tok, c);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    v.min_freq = min_freq;
    v.id_to_token = {"<pad>", "<unk>"};
    for (const auto& [tok, c] : kept) v.id_to_token.push_back(tok);
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i)
        v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
    return v;
}

SubDataset select_controls(const std::vector<const UserRecord*>& diagnosed,
                           const std::vector<const UserRecord*>& pool, std::uint64_t seed,
                           int controls_per_diagnosed) {
    if (diagnosed.empty()) throw std::invalid_argument("select_controls: no diagnosed users");
    std::size_t need = diagnosed.size() * static_cast<std::size_t>(controls_per_diagnosed);
    if (pool.size() < need)
        throw std::runtime_error("select_controls: need " + std::to_string(need) +
                                 " controls but pool has only " + std::to_string(pool.size()));
    SubDataset ds;
    ds.seed = seed;
    if (diagnosed.front()->condition) ds.condition = *diagnosed.front()->condition;
    for (const auto* u : diagnosed) ds.diagnosed_ids.push_back(u->user_id);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    for (std::size_t i = 0; i < need; ++i) ds.control_ids.push_back(pool[order[i]]->user_id);
    return ds;
}

static std::vector<int> split_counts(int n, double r_train, double r_dev) {
    int n_train = static_cast<int>(std::llround(r_train * n));
    int n_dev = static_cast<int>(std::llround(r_dev * n));
    int n_test = n - n_train - n_dev;
    return {n_train, n_dev, n_test};
}

void assign_splits(SubDataset& ds, double train_ratio, double dev_ratio, double test_ratio,
                   std::uint64_t seed) {
    if (std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9)
        throw std::invalid_argument("assign_splits: ratios must sum to 1");
    Rng rng(seed);
    ds.split_of.clear();
    for (auto* ids : {&ds.diagnosed_ids, &ds.control_ids}) {
        std::vector<std::string> shuffled = *ids;
        rng.shuffle(shuffled);
        auto counts = split_counts(static_cast<int>(shuffled.size()), train_ratio, dev_ratio);
        if (counts[0] <= 0 || counts[1] <= 0 || counts[2] <= 0)
            throw std::runtime_error("assign_splits: a split would receive zero " +
                                     std::string(ids == &ds.diagnosed_ids ? "diagnosed" : "control") +
                                     " users");
        int k = 0;
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < counts[s]; ++i) ds.split_of[shuffled[k++]] = static_cast<Split>(s);
    }
}

UserRecord truncate_posts(const UserRecord& user, int n) {
    if (n < 1) throw std::invalid_argument("truncate_posts: n must be >= 1");
    UserRecord out = user;
    if (user.num_posts() > n) out.posts.resize(n);
    return out;
}

Corpus generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.signal_strength < 0.0 || cfg.signal_strength >= 1.0)
        throw std::invalid_argument("signal_strength must lie in [0, 1)");
    std::vector<std::string> signal = cfg.signal_lexicon;
    if (signal.empty())
        for (int i = 0; i < 20; ++i) signal.push_back("sig" + std::to_string(i));
    int v = cfg.vocab_size;
    int s = static_cast<int>(signal.size());
    if (v <= s) throw std::invalid_argument("vocab_size must exceed the signal lexicon size");
    if (cfg.n_diagnosed < 1) throw std::invalid_argument("n_diagnosed must be >= 1");

    // Signal tokens occupy the rarest ranks of the base Zipf distribution, so
    // they occur in control text too (identical classes at delta=0).
    std::vector<std::string> tokens(v);
    for (int i = 0; i < v; ++i) tokens[i] = "w" + std::to_string(i);
    for (int j = 0; j < s; ++j) tokens[v - s + j] = signal[j];
    std::vector<double> cum(v);
    double total = 0;
    for (int i = 0; i < v; ++i) {
        total += 1.0 / (i + 1.0);
        cum[i] = total;
    }
    for (auto& c : cum) c /= total;

    Rng rng(seed);
    auto base_draw = [&]() {
        double u = rng.uniform();
        return tokens[std::lower_bound(cum.begin(), cum.end(), u) - cum.begin()];
    };
    auto count_around = [&](double mean) {
        return std::max(1, static_cast<int>(std::llround(mean * (0.5 + rng.uniform()))));
    };
    auto make_user = [&](const std::string& id, bool diagnosed) {
        UserRecord u;
        u.user_id = id;
        u.label = diagnosed ? Label::diagnosed : Label::control;
        if (diagnosed) u.condition = cfg.condition;
        int n_posts = count_around(cfg.posts_per_user_mean);
        for (int p = 0; p < n_posts; ++p) {
            int len = count_around(cfg.post_len_mean);
            std::string post;
            for (int w = 0; w < len; ++w) {
                std::string tok;
                if (diagnosed && rng.uniform() < cfg.signal_strength)
                    tok = signal[rng.index(signal.size())];
                else
                    tok = base_draw();
                if (w) post += ' ';
                post += tok;
            }
            u.posts.push_back(std::move(post));
        }
        return u;
    };

    Corpus corpus;
    char buf[32];
    for (int i = 0; i < cfg.n_diagnosed; ++i) {
        std::snprintf(buf, sizeof(buf), "diag_%05d", i);
        corpus.push_back(make_user(buf, true));
    }
    int n_controls = cfg.n_diagnosed * cfg.controls_per_diagnosed;
    for (int i = 0; i < n_controls; ++i) {
        std::snprintf(buf, sizeof(buf), "ctrl_%05d", i);
        corpus.push_back(make_user(buf, false));
    }
    return corpus;
}

static UserRecord record_from_json(const json& j, int line_no) {
    auto fail = [&](const std::string& msg) -> std::runtime_error {
        return std::runtime_error("corpus line " + std::to_string(line_no) + ": " + msg);
    };
    if (!j.is_object()) throw fail("expected a JSON object");
    UserRecord u;
    if (!j.contains("user_id") || !j["user_id"].is_string()) throw fail("missing user_id");
    u.user_id = j["user_id"].get<std::string>();
    if (!j.contains("label") || !j["label"].is_string()) throw fail("missing label");
    try {
        u.label = parse_label(j["label"].get<std::string>());
    } catch (const std::exception& e) {
        throw fail(e.what());
    }
    if (j.contains("condition")) u.condition = j["condition"].get<std::string>();
    if (u.label == Label::diagnosed && !u.condition)
        throw fail("diagnosed user without condition");
    if (u.label == Label::control && u.condition)
        throw fail("control user must not carry a condition");
    if (!j.contains("posts") || !j["posts"].is_array() || j["posts"].empty())
        throw fail("posts must be a non-empty array");
    for (const auto& p : j["posts"]) u.posts.push_back(p.get<std::string>());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "user_id" || it.key() == "label" || it.key() == "condition" ||
            it.key() == "posts")
            continue;
        u.extra[it.key()] = it.value().dump();
    }
    return u;
}

static json record_to_json(const UserRecord& u) {
    json j;
    j["user_id"] = u.user_id;
    j["label"] = label_name(u.label);
    if (u.condition) j["condition"] = *u.condition;
    j["posts"] = u.posts;
    for (const auto& [k, v] : u.extra) j[k] = json::parse(v);
    return j;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        corpus.push_back(record_from_json(j, line_no));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const auto& u : corpus) out << record_to_json(u).dump() << '\n';
}

void save_manifest(const SubDataset& ds, const std::string& path) {
    json j;
    j["condition"] = ds.condition;
    j["seed"] = ds.seed;
    json users = json::array();
    auto emit = [&](const std::vector<std::string>& ids, const char* role) {
        for (const auto& id : ids) {
            json e;
            e["user_id"] = id;
            e["role"] = role;
            auto it = ds.split_of.find(id);
            if (it != ds.split_of.end()) e["split"] = split_name(it->second);
            users.push_back(e);
        }
    };
    emit(ds.diagnosed_ids, "diagnosed");
    emit(ds.control_ids, "control");
    j["users"] = users;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

SubDataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    json j = json::parse(in);
    SubDataset ds;
    ds.condition = j.at("condition").get<std::string>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("users")) {
        std::string id = e.at("user_id").get<std::string>();
        std::string role = e.at("role").get<std::string>();
        if (role == "diagnosed")
            ds.diagnosed_ids.push_back(id);
        else
            ds.control_ids.push_back(id);
        if (e.contains("split")) ds.split_of[id] = parse_split(e.at("split").get<std::string>());
    }
    return ds;
}

}  // namespace userhan
