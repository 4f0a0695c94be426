#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "userhan/rng.hpp"

namespace userhan {

constexpr int kPadId = 0;
constexpr int kUnkId = 1;

enum class Label { control = 0, diagnosed = 1 };

std::string label_name(Label l);
Label parse_label(const std::string& s);

struct UserRecord {
    std::string user_id;
    Label label = Label::control;
    std::optional<std::string> condition;  // present iff diagnosed
    std::vector<std::string> posts;
    // Unknown JSONL fields, preserved on round-trip (serialized nlohmann objects).
    std::map<std::string, std::string> extra;

    int num_posts() const { return static_cast<int>(posts.size()); }
};

using Corpus = std::vector<UserRecord>;

// Lower-case, split on whitespace, strip leading/trailing non-alphanumeric
// characters from each piece, drop empties.
std::vector<std::string> tokenize(const std::string& text);

struct Vocabulary {
    std::unordered_map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;  // [0]=PAD, [1]=UNK
    int min_freq = 1;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int encode(const std::string& token) const;
};

// Built from training text only: tokens with frequency >= min_freq, ordered
// by frequency desc then lexicographic.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs, int min_freq);

enum class Split { train = 0, dev = 1, test = 2 };
std::string split_name(Split s);

struct SubDataset {
    std::string condition;
    std::uint64_t seed = 0;
    std::vector<std::string> diagnosed_ids;
    std::vector<std::string> control_ids;
    std::unordered_map<std::string, Split> split_of;  // filled by assign_splits
};

// Draws exactly controls_per_diagnosed controls per diagnosed user, uniformly
// without replacement across the whole sub-dataset (a control serves at most
// one diagnosed user). Deterministic per seed.
SubDataset select_controls(const std::vector<const UserRecord*>& diagnosed,
                           const std::vector<const UserRecord*>& pool, std::uint64_t seed,
                           int controls_per_diagnosed = 9);

// User-level stratified split, deterministic per seed. Throws if any split
// ends up without users of either label.
void assign_splits(SubDataset& ds, double train_ratio, double dev_ratio, double test_ratio,
                   std::uint64_t seed);

// First min(n, num_posts) posts, in stored order.
UserRecord truncate_posts(const UserRecord& user, int n);

struct SyntheticConfig {
    int n_diagnosed = 100;
    int controls_per_diagnosed = 9;
    double posts_per_user_mean = 160.0;
    double post_len_mean = 20.0;
    int vocab_size = 1000;
    std::vector<std::string> signal_lexicon;  // defaults to sig0..sig19 when empty
    double signal_strength = 0.0;             // delta in [0, 1)
    std::string condition = "synthetic";
};

// Controls draw tokens from a Zipf-ish base distribution; diagnosed users
// from (1-delta)*base + delta*uniform(signal_lexicon). Fully deterministic
// per seed.
Corpus generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

// JSON Lines corpus IO. Required fields: user_id, label, posts; condition
// when diagnosed. Unknown fields are preserved.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Manifest IO for prepared sub-datasets.
void save_manifest(const SubDataset& ds, const std::string& path);
SubDataset load_manifest(const std::string& path);

}  // namespace userhan
