#pragma once

#include <string>
#include <vector>

#include "userhan/corpus.hpp"
#include "userhan/rng.hpp"
#include "userhan/tensor.hpp"

namespace userhan {

// Word embedding matrix. Row 0 is the padding row: it starts at zero and
// never receives gradient.
struct EmbeddingTable {
    int vocab_size = 0;
    int dim = 300;
    Tensor matrix;  // [vocab_size, dim]
    bool trainable = true;

    static EmbeddingTable init(int vocab_size, int dim, Rng& rng, bool trainable = true);
    std::vector<Tensor> parameters() const;
};

// Parses the common plain-text pretrained embedding format: one token per
// line followed by `dim` space-separated floats. Rows for tokens present in
// id_to_token are overwritten; others keep their random init.
void load_pretrained_embeddings(EmbeddingTable& table,
                                const std::vector<std::string>& id_to_token,
                                const std::string& path);

struct GruParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Tensor w_update, w_reset, w_cand;  // [hidden, input]
    Tensor u_update, u_reset, u_cand;  // [hidden, hidden]
    Tensor b_update, b_reset, b_cand;  // [hidden]

    static GruParams init(int input_dim, int hidden_dim, Rng& rng);
    std::vector<Tensor> parameters() const;
};

struct AttentionParams {
    Tensor proj;     // [attn_dim, encoder_dim]
    Tensor bias;     // [attn_dim]
    Tensor context;  // [attn_dim]

    static AttentionParams init(int encoder_dim, int attn_dim, Rng& rng);
    std::vector<Tensor> parameters() const;
};

struct DenseParams {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    static DenseParams init(int in, int out, Rng& rng);
    std::vector<Tensor> parameters() const;
};

struct AttentionOutput {
    Tensor context;  // [d]
    Tensor weights;  // [T], positive, sums to 1
};

// Row-gather. Gradient flows back to the gathered rows when the table is
// trainable; the pad row stays frozen.
Tensor embed(Tape& t, const std::vector<int>& ids, const EmbeddingTable& table);

// Update/reset gate cell. Convention (fixed, tested):
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   c = tanh(W_h x + U_h (r*h) + b_h)
//   h' = (1 - z) * h + z * c
Tensor gru_cell(Tape& t, const Tensor& x, const Tensor& h_prev, const GruParams& p);

// Bidirectional encoding: position t is concat(forward state through x_t,
// backward state through x_t). Zero initial states.
Tensor bigru_encode(Tape& t, const Tensor& xs, const GruParams& fwd, const GruParams& bwd);

// Additive attention pooling: score each row of H with tanh(proj h + bias)
// against the context vector, softmax, return the weighted sum and weights.
AttentionOutput attention_pool(Tape& t, const Tensor& h, const AttentionParams& p);

Tensor dense(Tape& t, const Tensor& x, const DenseParams& p);

// Numerically stable binary cross entropy on a raw logit, label in {0,1}.
Tensor bce_loss(Tape& t, const Tensor& logit, int label);

}  // namespace userhan
