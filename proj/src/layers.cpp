#include "userhan/layers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace userhan {

namespace {

Tensor uniform_init(std::vector<int> shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (auto& v : t.data()) v = rng.uniform(-0.05, 0.05);
    return t;
}

}  // namespace

EmbeddingTable EmbeddingTable::init(int vocab_size, int dim, Rng& rng, bool trainable) {
    if (vocab_size < 1 || dim < 1)
        throw std::invalid_argument("embedding table dimensions must be positive");
    EmbeddingTable e;
    e.vocab_size = vocab_size;
    e.dim = dim;
    e.trainable = trainable;
    e.matrix = uniform_init({vocab_size, dim}, rng);
    e.matrix.set_requires_grad(trainable);
    for (int j = 0; j < dim; ++j) e.matrix.data()[kPadId * dim + j] = 0.0;  // pad row
    return e;
}

std::vector<Tensor> EmbeddingTable::parameters() const {
    if (!trainable) return {};
    return {matrix};
}

void load_pretrained_embeddings(EmbeddingTable& table,
                                const std::vector<std::string>& id_to_token,
                                const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    std::unordered_map<std::string, int> lookup;
    for (std::size_t i = 0; i < id_to_token.size(); ++i) lookup.emplace(id_to_token[i], (int)i);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vec;
        double v;
        while (ls >> v) vec.push_back(v);
        if (static_cast<int>(vec.size()) != table.dim)
            throw std::runtime_error("embedding file " + path + " line " +
                                     std::to_string(line_no) + ": expected " +
                                     std::to_string(table.dim) + " values, got " +
                                     std::to_string(vec.size()));
        auto it = lookup.find(token);
        if (it == lookup.end() || it->second == kPadId) continue;
        std::copy(vec.begin(), vec.end(), table.matrix.data().begin() + it->second * table.dim);
    }
}

GruParams GruParams::init(int input_dim, int hidden_dim, Rng& rng) {
    if (input_dim < 1 || hidden_dim < 1)
        throw std::invalid_argument("gru dimensions must be positive");
    GruParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.w_update = uniform_init({hidden_dim, input_dim}, rng);
    p.w_reset = uniform_init({hidden_dim, input_dim}, rng);
    p.w_cand = uniform_init({hidden_dim, input_dim}, rng);
    p.u_update = uniform_init({hidden_dim, hidden_dim}, rng);
    p.u_reset = uniform_init({hidden_dim, hidden_dim}, rng);
    p.u_cand = uniform_init({hidden_dim, hidden_dim}, rng);
    p.b_update = Tensor::zeros({hidden_dim}, true);
    p.b_reset = Tensor::zeros({hidden_dim}, true);
    p.b_cand = Tensor::zeros({hidden_dim}, true);
    return p;
}

std::vector<Tensor> GruParams::parameters() const {
    return {w_update, w_reset, w_cand, u_update, u_reset, u_cand, b_update, b_reset, b_cand};
}

AttentionParams AttentionParams::init(int encoder_dim, int attn_dim, Rng& rng) {
    if (attn_dim < 1) throw std::invalid_argument("attention dimension must be positive");
    AttentionParams p;
    p.proj = uniform_init({attn_dim, encoder_dim}, rng);
    p.bias = Tensor::zeros({attn_dim}, true);
    p.context = uniform_init({attn_dim}, rng);
    return p;
}

std::vector<Tensor> AttentionParams::parameters() const { return {proj, bias, context}; }

DenseParams DenseParams::init(int in, int out, Rng& rng) {
    DenseParams p;
    p.weight = uniform_init({out, in}, rng);
    p.bias = Tensor::zeros({out}, true);
    return p;
}

std::vector<Tensor> DenseParams::parameters() const { return {weight, bias}; }

Tensor embed(Tape& t, const std::vector<int>& ids, const EmbeddingTable& table) {
    if (ids.empty()) throw std::invalid_argument("embed: empty id sequence");
    int len = static_cast<int>(ids.size());
    int d = table.dim;
    for (int id : ids)
        if (id < 0 || id >= table.vocab_size)
            throw std::out_of_range("embed: token id " + std::to_string(id) +
                                    " out of range [0, " + std::to_string(table.vocab_size) + ")");
    Tensor y = Tensor::zeros({len, d});
    const auto& m = table.matrix.data();
    for (int i = 0; i < len; ++i)
        std::copy(m.begin() + ids[i] * d, m.begin() + (ids[i] + 1) * d, y.data().begin() + i * d);
    if (table.trainable) {
        Tensor mc = table.matrix, yc = y;
        std::vector<int> idc = ids;
        t.record(y, [mc, yc, idc, len, d]() mutable {
            const auto& gy = yc.grad();
            auto& gm = mc.grad();
            for (int i = 0; i < len; ++i) {
                if (idc[i] == kPadId) continue;  // pad row stays frozen
                for (int j = 0; j < d; ++j) gm[idc[i] * d + j] += gy[i * d + j];
            }
        });
    }
    return y;
}

Tensor gru_cell(Tape& t, const Tensor& x, const Tensor& h_prev, const GruParams& p) {
    if (x.shape() != std::vector<int>{p.input_dim} ||
        h_prev.shape() != std::vector<int>{p.hidden_dim})
        throw std::invalid_argument("gru_cell: input shapes do not match parameters");
    Tensor z = sigmoid_op(
        t, add(t, add(t, matvec(t, p.w_update, x), matvec(t, p.u_update, h_prev)), p.b_update));
    Tensor r = sigmoid_op(
        t, add(t, add(t, matvec(t, p.w_reset, x), matvec(t, p.u_reset, h_prev)), p.b_reset));
    Tensor cand = tanh_op(
        t, add(t, add(t, matvec(t, p.w_cand, x), matvec(t, p.u_cand, mul(t, r, h_prev))),
               p.b_cand));
    Tensor ones = Tensor::from({p.hidden_dim}, std::vector<double>(p.hidden_dim, 1.0));
    return add(t, mul(t, sub(t, ones, z), h_prev), mul(t, z, cand));
}

Tensor bigru_encode(Tape& t, const Tensor& xs, const GruParams& fwd, const GruParams& bwd) {
    if (xs.shape().size() != 2 || xs.shape()[0] < 1)
        throw std::invalid_argument("bigru_encode: input must be a non-empty [T, d] tensor");
    if (fwd.hidden_dim != bwd.hidden_dim)
        throw std::invalid_argument("bigru_encode: direction hidden sizes differ");
    int T = xs.shape()[0];
    std::vector<Tensor> fstates(T), bstates(T);
    Tensor h = Tensor::zeros({fwd.hidden_dim});
    for (int i = 0; i < T; ++i) {
        h = gru_cell(t, row(t, xs, i), h, fwd);
        fstates[i] = h;
    }
    h = Tensor::zeros({bwd.hidden_dim});
    for (int i = T - 1; i >= 0; --i) {
        h = gru_cell(t, row(t, xs, i), h, bwd);
        bstates[i] = h;
    }
    std::vector<Tensor> rows(T);
    for (int i = 0; i < T; ++i) rows[i] = concat(t, fstates[i], bstates[i]);
    return stack_rows(t, rows);
}

AttentionOutput attention_pool(Tape& t, const Tensor& h, const AttentionParams& p) {
    if (h.shape().size() != 2 || h.shape()[0] < 1)
        throw std::invalid_argument("attention_pool: input must be a non-empty [T, d] tensor");
    int T = h.shape()[0];
    std::vector<Tensor> scores(T);
    for (int i = 0; i < T; ++i) {
        Tensor u = tanh_op(t, add(t, matvec(t, p.proj, row(t, h, i)), p.bias));
        scores[i] = dot(t, u, p.context);
    }
    Tensor alpha = softmax(t, stack_scalars(t, scores));
    return {vecmat(t, alpha, h), alpha};
}

Tensor dense(Tape& t, const Tensor& x, const DenseParams& p) {
    return add(t, matvec(t, p.weight, x), p.bias);
}

Tensor bce_loss(Tape& t, const Tensor& logit, int label) {
    if (label != 0 && label != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
    if (!logit.is_scalar()) throw std::invalid_argument("bce_loss: logit must be a scalar");
    double z = logit.item();
    if (!std::isfinite(z)) throw std::runtime_error("bce_loss: non-finite logit");
    // log(1 + e^-|z|) + max(z, 0) - z*y
    double loss = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * label;
    Tensor y = Tensor::scalar(loss);
    Tensor lc = logit, yc = y;
    t.record(y, [lc, yc, z, label]() mutable {
        double p = 1.0 / (1.0 + std::exp(-z));
        lc.grad()[0] += yc.grad()[0] * (p - label);
    });
    return y;
}

}  // namespace userhan
