#include "userhan/han.hpp"

#include <cmath>
#include <stdexcept>

#include "checkpoint_util.hpp"

using nlohmann::json;

namespace userhan {

void HanConfig::validate() const {
    if (embed_dim < 1 || gru_hidden < 1 || attn_dim < 1 || penultimate_dim < 1)
        throw std::invalid_argument("HanConfig: all dimensions must be positive");
    if (max_tokens_per_post < 1)
        throw std::invalid_argument("HanConfig: max_tokens_per_post must be >= 1");
    if (max_posts_per_user < 0)
        throw std::invalid_argument("HanConfig: max_posts_per_user must be >= 0");
}

HanParams HanParams::init(const HanConfig& cfg, int vocab_size, Rng& rng) {
    cfg.validate();
    HanParams p;
    p.config = cfg;
    p.embedding = EmbeddingTable::init(vocab_size, cfg.embed_dim, rng);
    p.word_fwd = GruParams::init(cfg.embed_dim, cfg.gru_hidden, rng);
    p.word_bwd = GruParams::init(cfg.embed_dim, cfg.gru_hidden, rng);
    p.word_attn = AttentionParams::init(cfg.encoder_dim(), cfg.attn_dim, rng);
    p.post_fwd = GruParams::init(cfg.encoder_dim(), cfg.gru_hidden, rng);
    p.post_bwd = GruParams::init(cfg.encoder_dim(), cfg.gru_hidden, rng);
    p.post_attn = AttentionParams::init(cfg.encoder_dim(), cfg.attn_dim, rng);
    p.hidden = DenseParams::init(cfg.encoder_dim(), cfg.penultimate_dim, rng);
    p.output = DenseParams::init(cfg.penultimate_dim, 1, rng);
    return p;
}

std::vector<Tensor> HanParams::parameters() const {
    std::vector<Tensor> out;
    auto append = [&](const std::vector<Tensor>& v) { out.insert(out.end(), v.begin(), v.end()); };
    append(embedding.parameters());
    append(word_fwd.parameters());
    append(word_bwd.parameters());
    append(word_attn.parameters());
    append(post_fwd.parameters());
    append(post_bwd.parameters());
    append(post_attn.parameters());
    append(hidden.parameters());
    append(output.parameters());
    return out;
}

HanParams HanParams::clone() const {
    HanParams p = *this;
    p.embedding.matrix = embedding.matrix.clone();
    auto cg = [](GruParams& g) {
        for (Tensor* t : {&g.w_update, &g.w_reset, &g.w_cand, &g.u_update, &g.u_reset, &g.u_cand,
                          &g.b_update, &g.b_reset, &g.b_cand})
            *t = t->clone();
    };
    cg(p.word_fwd);
    cg(p.word_bwd);
    cg(p.post_fwd);
    cg(p.post_bwd);
    auto ca = [](AttentionParams& a) {
        a.proj = a.proj.clone();
        a.bias = a.bias.clone();
        a.context = a.context.clone();
    };
    ca(p.word_attn);
    ca(p.post_attn);
    auto cd = [](DenseParams& d) {
        d.weight = d.weight.clone();
        d.bias = d.bias.clone();
    };
    cd(p.hidden);
    cd(p.output);
    return p;
}

PreparedUser prepare_user(const UserRecord& user, const Vocabulary& vocab, const HanConfig& cfg) {
    PreparedUser out;
    out.user_id = user.user_id;
    out.label = user.label == Label::diagnosed ? 1 : 0;
    for (const auto& post : user.posts) {
        if (cfg.max_posts_per_user > 0 &&
            static_cast<int>(out.post_ids.size()) >= cfg.max_posts_per_user)
            break;
        auto tokens = tokenize(post);
        if (tokens.empty()) continue;
        if (static_cast<int>(tokens.size()) > cfg.max_tokens_per_post)
            tokens.resize(cfg.max_tokens_per_post);
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& tok : tokens) ids.push_back(vocab.encode(tok));
        out.post_ids.push_back(std::move(ids));
        out.post_tokens.push_back(std::move(tokens));
    }
    if (out.post_ids.empty())
        throw std::runtime_error("user " + user.user_id + " has no usable posts");
    return out;
}

PostEncoding encode_post(Tape& t, const std::vector<int>& ids, const HanParams& p) {
    Tensor x = embed(t, ids, p.embedding);
    Tensor h = bigru_encode(t, x, p.word_fwd, p.word_bwd);
    AttentionOutput pooled = attention_pool(t, h, p.word_attn);
    return {pooled.context, pooled.weights};
}

// dense(penultimate->1) yields a length-1 vector; reinterpret as the scalar logit.
static Tensor as_scalar(Tape& t, const Tensor& v) {
    if (v.size() != 1) throw std::invalid_argument("expected a length-1 tensor");
    return sum(t, v);
}

UserEncoding encode_user(Tape& t, const PreparedUser& user, const HanParams& p) {
    if (user.post_ids.empty()) throw std::invalid_argument("encode_user: user has no posts");
    UserEncoding out;
    out.trace.user_id = user.user_id;
    std::vector<Tensor> post_vecs;
    for (std::size_t i = 0; i < user.post_ids.size(); ++i) {
        PostEncoding pe = encode_post(t, user.post_ids[i], p);
        post_vecs.push_back(pe.vec);
        out.trace.posts.push_back({user.post_tokens[i], pe.word_weights.data()});
    }
    Tensor stacked = stack_rows(t, post_vecs);
    Tensor encoded = bigru_encode(t, stacked, p.post_fwd, p.post_bwd);
    AttentionOutput pooled = attention_pool(t, encoded, p.post_attn);
    out.trace.post_weights = pooled.weights.data();
    Tensor hid = tanh_op(t, dense(t, pooled.context, p.hidden));
    out.logit = as_scalar(t, dense(t, hid, p.output));
    return out;
}

Prediction predict(const PreparedUser& user, const HanParams& p, double threshold) {
    Tape t;
    UserEncoding enc = encode_user(t, user, p);
    double prob = 1.0 / (1.0 + std::exp(-enc.logit.item()));
    return {prob >= threshold ? Label::diagnosed : Label::control, prob};
}

BatchOutput forward_batch(Tape& t, const std::vector<PreparedUser>& users, const HanParams& p) {
    if (users.empty()) throw std::invalid_argument("forward_batch: empty batch");
    BatchOutput out;
    for (const auto& u : users) {
        UserEncoding enc = encode_user(t, u, p);
        out.logits.push_back(enc.logit);
        out.traces.push_back(std::move(enc.trace));
    }
    return out;
}

void save_han_checkpoint(const HanParams& p, const Vocabulary& vocab, const std::string& path) {
    json j;
    j["kind"] = "han";
    json cfg;
    cfg["embed_dim"] = p.config.embed_dim;
    cfg["gru_hidden"] = p.config.gru_hidden;
    cfg["attn_dim"] = p.config.attn_dim;
    cfg["penultimate_dim"] = p.config.penultimate_dim;
    cfg["max_tokens_per_post"] = p.config.max_tokens_per_post;
    cfg["max_posts_per_user"] = p.config.max_posts_per_user;
    j["config"] = cfg;
    j["vocab"] = detail::vocab_to_json(vocab);
    json tensors;
    tensors["embedding"] = detail::tensor_to_json(p.embedding.matrix);
    auto put_gru = [&](const char* name, const GruParams& g) {
        json gj;
        gj["w_update"] = detail::tensor_to_json(g.w_update);
        gj["w_reset"] = detail::tensor_to_json(g.w_reset);
        gj["w_cand"] = detail::tensor_to_json(g.w_cand);
        gj["u_update"] = detail::tensor_to_json(g.u_update);
        gj["u_reset"] = detail::tensor_to_json(g.u_reset);
        gj["u_cand"] = detail::tensor_to_json(g.u_cand);
        gj["b_update"] = detail::tensor_to_json(g.b_update);
        gj["b_reset"] = detail::tensor_to_json(g.b_reset);
        gj["b_cand"] = detail::tensor_to_json(g.b_cand);
        tensors[name] = gj;
    };
    put_gru("word_fwd", p.word_fwd);
    put_gru("word_bwd", p.word_bwd);
    put_gru("post_fwd", p.post_fwd);
    put_gru("post_bwd", p.post_bwd);
    auto put_attn = [&](const char* name, const AttentionParams& a) {
        json aj;
        aj["proj"] = detail::tensor_to_json(a.proj);
        aj["bias"] = detail::tensor_to_json(a.bias);
        aj["context"] = detail::tensor_to_json(a.context);
        tensors[name] = aj;
    };
    put_attn("word_attn", p.word_attn);
    put_attn("post_attn", p.post_attn);
    auto put_dense = [&](const char* name, const DenseParams& d) {
        json dj;
        dj["weight"] = detail::tensor_to_json(d.weight);
        dj["bias"] = detail::tensor_to_json(d.bias);
        tensors[name] = dj;
    };
    put_dense("hidden", p.hidden);
    put_dense("output", p.output);
    j["tensors"] = tensors;
    detail::write_checkpoint_file(j, path);
}

HanCheckpoint load_han_checkpoint(const std::string& path) {
    json j = detail::read_checkpoint_file(path, "han");
    HanCheckpoint ckpt;
    const json& cfg = j.at("config");
    ckpt.params.config.embed_dim = cfg.at("embed_dim").get<int>();
    ckpt.params.config.gru_hidden = cfg.at("gru_hidden").get<int>();
    ckpt.params.config.attn_dim = cfg.at("attn_dim").get<int>();
    ckpt.params.config.penultimate_dim = cfg.at("penultimate_dim").get<int>();
    ckpt.params.config.max_tokens_per_post = cfg.at("max_tokens_per_post").get<int>();
    ckpt.params.config.max_posts_per_user = cfg.at("max_posts_per_user").get<int>();
    ckpt.vocab = detail::vocab_from_json(j.at("vocab"));
    const json& tensors = j.at("tensors");
    ckpt.params.embedding.matrix = detail::tensor_from_json(tensors.at("embedding"));
    ckpt.params.embedding.vocab_size = ckpt.params.embedding.matrix.shape()[0];
    ckpt.params.embedding.dim = ckpt.params.embedding.matrix.shape()[1];
    auto get_gru = [&](const char* name, int input_dim) {
        const json& gj = tensors.at(name);
        GruParams g;
        g.input_dim = input_dim;
        g.hidden_dim = ckpt.params.config.gru_hidden;
        g.w_update = detail::tensor_from_json(gj.at("w_update"));
        g.w_reset = detail::tensor_from_json(gj.at("w_reset"));
        g.w_cand = detail::tensor_from_json(gj.at("w_cand"));
        g.u_update = detail::tensor_from_json(gj.at("u_update"));
        g.u_reset = detail::tensor_from_json(gj.at("u_reset"));
        g.u_cand = detail::tensor_from_json(gj.at("u_cand"));
        g.b_update = detail::tensor_from_json(gj.at("b_update"));
        g.b_reset = detail::tensor_from_json(gj.at("b_reset"));
        g.b_cand = detail::tensor_from_json(gj.at("b_cand"));
        return g;
    };
    ckpt.params.word_fwd = get_gru("word_fwd", ckpt.params.config.embed_dim);
    ckpt.params.word_bwd = get_gru("word_bwd", ckpt.params.config.embed_dim);
    ckpt.params.post_fwd = get_gru("post_fwd", ckpt.params.config.encoder_dim());
    ckpt.params.post_bwd = get_gru("post_bwd", ckpt.params.config.encoder_dim());
    auto get_attn = [&](const char* name) {
        const json& aj = tensors.at(name);
        AttentionParams a;
        a.proj = detail::tensor_from_json(aj.at("proj"));
        a.bias = detail::tensor_from_json(aj.at("bias"));
        a.context = detail::tensor_from_json(aj.at("context"));
        return a;
    };
    ckpt.params.word_attn = get_attn("word_attn");
    ckpt.params.post_attn = get_attn("post_attn");
    auto get_dense = [&](const char* name) {
        const json& dj = tensors.at(name);
        DenseParams d;
        d.weight = detail::tensor_from_json(dj.at("weight"));
        d.bias = detail::tensor_from_json(dj.at("bias"));
        return d;
    };
    ckpt.params.hidden = get_dense("hidden");
    ckpt.params.output = get_dense("output");
    return ckpt;
}

void export_traces(const std::vector<AttentionTrace>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    for (const auto& tr : traces) {
        json j;
        j["user_id"] = tr.user_id;
        j["post_weights"] = tr.post_weights;
        json posts = json::array();
        for (const auto& p : tr.posts) {
            json pj;
            pj["tokens"] = p.tokens;
            pj["word_weights"] = p.word_weights;
            posts.push_back(pj);
        }
        j["posts"] = posts;
        out << j.dump() << '\n';
    }
}

std::vector<AttentionTrace> load_traces(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    std::vector<AttentionTrace> traces;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        AttentionTrace tr;
        tr.user_id = j.at("user_id").get<std::string>();
        tr.post_weights = j.at("post_weights").get<std::vector<double>>();
        for (const auto& pj : j.at("posts")) {
            PostTrace p;
            p.tokens = pj.at("tokens").get<std::vector<std::string>>();
            p.word_weights = pj.at("word_weights").get<std::vector<double>>();
            tr.posts.push_back(std::move(p));
        }
        traces.push_back(std::move(tr));
    }
    return traces;
}

}  // namespace userhan
