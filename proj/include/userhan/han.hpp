#pragma once

#include <string>
#include <vector>

#include "userhan/corpus.hpp"
#include "userhan/layers.hpp"

namespace userhan {

struct HanConfig {
    int embed_dim = 300;
    int gru_hidden = 150;        // per direction
    int attn_dim = 100;
    int penultimate_dim = 50;
    int max_tokens_per_post = 128;
    int max_posts_per_user = 0;  // 0 = no cap

    void validate() const;
    int encoder_dim() const { return 2 * gru_hidden; }
};

struct HanParams {
    HanConfig config;
    EmbeddingTable embedding;
    GruParams word_fwd, word_bwd;
    AttentionParams word_attn;
    GruParams post_fwd, post_bwd;
    AttentionParams post_attn;
    DenseParams hidden;  // encoder_dim -> penultimate, tanh
    DenseParams output;  // penultimate -> 1, raw logit

    static HanParams init(const HanConfig& cfg, int vocab_size, Rng& rng);
    std::vector<Tensor> parameters() const;
    HanParams clone() const;
};

// Token-id view of one user, ready for the encoders. Posts that tokenized to
// nothing have already been dropped; token and post caps applied.
struct PreparedUser {
    std::string user_id;
    int label = 0;  // 1 = diagnosed
    std::vector<std::vector<int>> post_ids;
    std::vector<std::vector<std::string>> post_tokens;
};

// Throws when the user has no usable posts; the caller decides whether to
// skip or abort.
PreparedUser prepare_user(const UserRecord& user, const Vocabulary& vocab,
                          const HanConfig& cfg);

struct PostTrace {
    std::vector<std::string> tokens;
    std::vector<double> word_weights;
};

struct AttentionTrace {
    std::string user_id;
    std::vector<double> post_weights;
    std::vector<PostTrace> posts;
};

struct PostEncoding {
    Tensor vec;           // [encoder_dim]
    Tensor word_weights;  // [len]
};

struct UserEncoding {
    Tensor logit;  // scalar
    AttentionTrace trace;
};

PostEncoding encode_post(Tape& t, const std::vector<int>& ids, const HanParams& p);
UserEncoding encode_user(Tape& t, const PreparedUser& user, const HanParams& p);

struct Prediction {
    Label label;
    double probability;
};

// sigma(logit) >= threshold reads as diagnosed (ties inclusive).
Prediction predict(const PreparedUser& user, const HanParams& p, double threshold = 0.5);

struct BatchOutput {
    std::vector<Tensor> logits;
    std::vector<AttentionTrace> traces;
};

// Same results as mapping encode_user over the batch.
BatchOutput forward_batch(Tape& t, const std::vector<PreparedUser>& users, const HanParams& p);

// Checkpoint container (JSON, kind tag "han"); doubles round-trip exactly.
void save_han_checkpoint(const HanParams& p, const Vocabulary& vocab, const std::string& path);
struct HanCheckpoint {
    HanParams params;
    Vocabulary vocab;
};
HanCheckpoint load_han_checkpoint(const std::string& path);

// JSON Lines, one user per line.
void export_traces(const std::vector<AttentionTrace>& traces, const std::string& path);
std::vector<AttentionTrace> load_traces(const std::string& path);

}  // namespace userhan
