#include "userhan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

#include "checkpoint_util.hpp"
#include "userhan/metrics.hpp"
#include "userhan/rng.hpp"

using nlohmann::json;

namespace userhan {

std::vector<std::string> user_document(const UserRecord& user) {
    std::vector<std::string> out;
    for (const auto& post : user.posts) {
        auto toks = tokenize(post);
        out.insert(out.end(), toks.begin(), toks.end());
    }
    return out;
}

std::vector<SparseVec> TfidfVectorizer::fit_transform(
    const std::vector<std::vector<std::string>>& docs) {
    if (docs.empty()) throw std::invalid_argument("tfidf: empty corpus");
    std::map<std::string, int> df;  // ordered, so column ids are deterministic
    for (const auto& doc : docs) {
        std::map<std::string, int> seen;
        for (const auto& tok : doc) seen[tok] = 1;
        for (const auto& [tok, one] : seen) df[tok] += one;
    }
    vocabulary_.clear();
    feature_names_.clear();
    idf_.clear();
    double n = static_cast<double>(docs.size());
    for (const auto& [tok, d] : df) {
        vocabulary_[tok] = static_cast<int>(feature_names_.size());
        feature_names_.push_back(tok);
        idf_.push_back(std::log((1.0 + n) / (1.0 + d)) + 1.0);
    }
    fitted_ = true;
    std::vector<SparseVec> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) out.push_back(transform(doc));
    return out;
}

SparseVec TfidfVectorizer::transform(const std::vector<std::string>& doc) const {
    if (!fitted_) throw std::runtime_error("tfidf: transform called before fit");
    std::map<int, double> counts;
    for (const auto& tok : doc) {
        auto it = vocabulary_.find(tok);
        if (it != vocabulary_.end()) counts[it->second] += 1.0;
    }
    SparseVec v;
    double norm2 = 0;
    for (const auto& [col, tf] : counts) {
        double w = tf * idf_[col];
        v.entries.emplace_back(col, w);
        norm2 += w * w;
    }
    if (norm2 > 0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (auto& [col, w] : v.entries) w *= inv;
    }
    return v;
}

TfidfVectorizer TfidfVectorizer::restore(std::vector<std::string> feature_names,
                                         std::vector<double> idf) {
    TfidfVectorizer v;
    v.feature_names_ = std::move(feature_names);
    v.idf_ = std::move(idf);
    for (std::size_t i = 0; i < v.feature_names_.size(); ++i)
        v.vocabulary_[v.feature_names_[i]] = static_cast<int>(i);
    v.fitted_ = true;
    return v;
}

double LinearModel::decision(const SparseVec& x) const {
    double z = bias;
    for (const auto& [col, v] : x.entries) z += weights[col] * v;
    return z;
}

Label LinearModel::predict(const SparseVec& x) const {
    return decision(x) >= 0 ? Label::diagnosed : Label::control;
}

namespace {

// loss and d(loss)/dz for y in {-1, +1}
double point_loss(LinearLoss kind, double z, int y) {
    if (kind == LinearLoss::logistic) {
        double m = -y * z;
        return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    }
    return std::max(0.0, 1.0 - y * z);
}

double point_dloss(LinearLoss kind, double z, int y) {
    if (kind == LinearLoss::logistic) return -y / (1.0 + std::exp(y * z));
    return (1.0 - y * z) > 0 ? -static_cast<double>(y) : 0.0;  // subgradient
}

}  // namespace

double linear_objective(const LinearModel& m, const std::vector<SparseVec>& x,
                        const std::vector<int>& y) {
    double n = static_cast<double>(x.size());
    double obj = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        obj += point_loss(m.loss, m.decision(x[i]), y[i] ? 1 : -1);
    obj /= n;
    double w2 = 0;
    for (double w : m.weights) w2 += w * w;
    return obj + w2 / (2.0 * m.C * n);
}

LinearModel train_linear(const std::vector<SparseVec>& x, const std::vector<int>& y, double C,
                         LinearLoss loss, int num_features) {
    if (x.empty()) throw std::invalid_argument("train_linear: empty dataset");
    if (x.size() != y.size()) throw std::invalid_argument("train_linear: X/y length mismatch");
    if (C <= 0) throw std::invalid_argument("train_linear: C must be positive");
    bool has0 = false, has1 = false;
    for (int v : y) (v ? has1 : has0) = true;
    if (!has0 || !has1)
        std::cerr << "warning: train_linear received a single-class label vector\n";

    LinearModel m;
    m.weights.assign(num_features, 0.0);
    m.bias = 0;
    m.C = C;
    m.loss = loss;

    double n = static_cast<double>(x.size());
    std::vector<double> gw(num_features);
    double step = 1.0;
    double obj = linear_objective(m, x, y);
    for (int iter = 0; iter < 1000; ++iter) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = point_dloss(loss, m.decision(x[i]), y[i] ? 1 : -1) / n;
            for (const auto& [col, v] : x[i].entries) gw[col] += d * v;
            gb += d;
        }
        double gnorm2 = gb * gb;
        for (int j = 0; j < num_features; ++j) {
            gw[j] += m.weights[j] / (C * n);
            gnorm2 += gw[j] * gw[j];
        }
        if (std::sqrt(gnorm2) < 1e-6) break;

        // Backtracking keeps the objective non-increasing.
        LinearModel cand = m;
        double new_obj = obj;
        for (int bt = 0; bt < 60; ++bt) {
            for (int j = 0; j < num_features; ++j) cand.weights[j] = m.weights[j] - step * gw[j];
            cand.bias = m.bias - step * gb;
            new_obj = linear_objective(cand, x, y);
            if (new_obj <= obj) break;
            step *= 0.5;
        }
        if (new_obj > obj) break;  // no descent direction progress left
        m = cand;
        obj = new_obj;
        step *= 1.2;
    }
    return m;
}

double grid_search(const std::vector<SparseVec>& x_train, const std::vector<int>& y_train,
                   const std::vector<SparseVec>& x_dev, const std::vector<int>& y_dev,
                   LinearLoss loss, int num_features, const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    double best_c = sorted.front();
    double best_f1 = -1;
    for (double c : sorted) {
        LinearModel m = train_linear(x_train, y_train, c, loss, num_features);
        std::vector<Label> preds, gold;
        for (std::size_t i = 0; i < x_dev.size(); ++i) {
            preds.push_back(m.predict(x_dev[i]));
            gold.push_back(y_dev[i] ? Label::diagnosed : Label::control);
        }
        double f = f1_score(preds, gold).f1;
        if (f > best_f1) {  // strict: ties keep the smaller C
            best_f1 = f;
            best_c = c;
        }
    }
    return best_c;
}

std::vector<std::string> char_ngrams(const std::string& word) {
    if (word.empty()) throw std::invalid_argument("char_ngrams: empty word");
    std::string decorated = "<" + word + ">";
    std::vector<std::string> out;
    int len = static_cast<int>(decorated.size());
    for (int n = 3; n <= 6; ++n)
        for (int i = 0; i + n <= len; ++i) out.push_back(decorated.substr(i, n));
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

CharNgramClassifier::CharNgramClassifier(CharNgramConfig cfg) : cfg_(cfg) {
    if (cfg_.buckets < 1 || cfg_.dim < 1 || cfg_.epochs < 1)
        throw std::invalid_argument("charngram: buckets, dim, epochs must be positive");
    Rng rng(cfg_.seed);
    emb_.resize(static_cast<std::size_t>(cfg_.buckets) * cfg_.dim);
    double r = 1.0 / cfg_.dim;
    for (auto& v : emb_) v = rng.uniform(-r, r);
    out_w_.assign(2 * static_cast<std::size_t>(cfg_.dim), 0.0);
    out_b_.assign(2, 0.0);
}

std::vector<int> CharNgramClassifier::bucket_ids(const std::vector<std::string>& doc) const {
    std::vector<int> ids;
    for (const auto& word : doc) {
        if (word.empty()) continue;
        for (const auto& g : char_ngrams(word))
            ids.push_back(static_cast<int>(fnv1a(g) % cfg_.buckets));
    }
    return ids;
}

namespace {

// softmax over two logits; returns P(class 1)
double two_class_prob(double z0, double z1) {
    double m = std::max(z0, z1);
    double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
    return e1 / (e0 + e1);
}

}  // namespace

double CharNgramClassifier::predict_prob(const std::vector<std::string>& doc) const {
    auto ids = bucket_ids(doc);
    std::vector<double> h(cfg_.dim, 0.0);
    if (!ids.empty()) {
        for (int id : ids)
            for (int j = 0; j < cfg_.dim; ++j) h[j] += emb_[static_cast<std::size_t>(id) * cfg_.dim + j];
        for (auto& v : h) v /= static_cast<double>(ids.size());
    }
    double z0 = out_b_[0], z1 = out_b_[1];
    for (int j = 0; j < cfg_.dim; ++j) {
        z0 += out_w_[j] * h[j];
        z1 += out_w_[cfg_.dim + j] * h[j];
    }
    return two_class_prob(z0, z1);
}

Label CharNgramClassifier::predict(const std::vector<std::string>& doc) const {
    return predict_prob(doc) >= 0.5 ? Label::diagnosed : Label::control;
}

void CharNgramClassifier::fit(const std::vector<std::vector<std::string>>& docs,
                              const std::vector<int>& labels) {
    if (docs.empty()) throw std::invalid_argument("charngram: empty corpus");
    if (docs.size() != labels.size())
        throw std::invalid_argument("charngram: docs/labels length mismatch");
    std::vector<std::vector<int>> doc_ids(docs.size());
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        doc_ids[i] = bucket_ids(docs[i]);
        if (doc_ids[i].empty())
            std::cerr << "warning: charngram skipping empty document " << i << "\n";
        else
            usable.push_back(i);
    }
    if (usable.empty()) throw std::invalid_argument("charngram: no non-empty documents");

    Rng rng(cfg_.seed + 1);
    long long total_steps = static_cast<long long>(cfg_.epochs) * usable.size();
    long long step = 0;
    std::vector<double> h(cfg_.dim);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng.shuffle(usable);
        for (std::size_t i : usable) {
            double lr = cfg_.learning_rate * (1.0 - static_cast<double>(step) / total_steps);
            ++step;
            const auto& ids = doc_ids[i];
            std::fill(h.begin(), h.end(), 0.0);
            for (int id : ids)
                for (int j = 0; j < cfg_.dim; ++j)
                    h[j] += emb_[static_cast<std::size_t>(id) * cfg_.dim + j];
            double inv = 1.0 / static_cast<double>(ids.size());
            for (auto& v : h) v *= inv;
            double z0 = out_b_[0], z1 = out_b_[1];
            for (int j = 0; j < cfg_.dim; ++j) {
                z0 += out_w_[j] * h[j];
                z1 += out_w_[cfg_.dim + j] * h[j];
            }
            double p1 = two_class_prob(z0, z1);
            // d(CE)/dz = p - onehot(y)
            double d0 = (1.0 - p1) - (labels[i] ? 0.0 : 1.0);
            double d1 = p1 - (labels[i] ? 1.0 : 0.0);
            std::vector<double> gh(cfg_.dim);
            for (int j = 0; j < cfg_.dim; ++j) {
                gh[j] = d0 * out_w_[j] + d1 * out_w_[cfg_.dim + j];
                out_w_[j] -= lr * d0 * h[j];
                out_w_[cfg_.dim + j] -= lr * d1 * h[j];
            }
            out_b_[0] -= lr * d0;
            out_b_[1] -= lr * d1;
            double scale = lr * inv;
            for (int id : ids)
                for (int j = 0; j < cfg_.dim; ++j)
                    emb_[static_cast<std::size_t>(id) * cfg_.dim + j] -= scale * gh[j];
        }
    }
}

void CharNgramClassifier::restore(std::vector<double> emb, std::vector<double> out_w,
                                  std::vector<double> out_b) {
    if (emb.size() != static_cast<std::size_t>(cfg_.buckets) * cfg_.dim ||
        out_w.size() != 2 * static_cast<std::size_t>(cfg_.dim) || out_b.size() != 2)
        throw std::invalid_argument("charngram restore: size mismatch");
    emb_ = std::move(emb);
    out_w_ = std::move(out_w);
    out_b_ = std::move(out_b);
}

void save_linear_checkpoint(const LinearModel& m, const TfidfVectorizer& vec,
                            const std::string& path) {
    json j;
    j["kind"] = m.loss == LinearLoss::logistic ? "logreg" : "svm";
    j["weights"] = m.weights;
    j["bias"] = m.bias;
    j["C"] = m.C;
    j["features"] = vec.feature_names();
    j["idf"] = vec.idf();
    detail::write_checkpoint_file(j, path);
}

LinearCheckpoint load_linear_checkpoint(const std::string& path, LinearLoss expected) {
    json j = detail::read_checkpoint_file(path, expected == LinearLoss::logistic ? "logreg" : "svm");
    LinearCheckpoint out;
    out.model.weights = j.at("weights").get<std::vector<double>>();
    out.model.bias = j.at("bias").get<double>();
    out.model.C = j.at("C").get<double>();
    out.model.loss = expected;
    out.vectorizer = TfidfVectorizer::restore(j.at("features").get<std::vector<std::string>>(),
                                              j.at("idf").get<std::vector<double>>());
    return out;
}

void save_charngram_checkpoint(const CharNgramClassifier& m, const std::string& path) {
    json j;
    j["kind"] = "charngram";
    const auto& cfg = m.config();
    j["buckets"] = cfg.buckets;
    j["dim"] = cfg.dim;
    j["epochs"] = cfg.epochs;
    j["learning_rate"] = cfg.learning_rate;
    j["seed"] = cfg.seed;
    j["embeddings"] = m.embeddings();
    j["output_weights"] = m.output_weights();
    j["output_bias"] = m.output_bias();
    detail::write_checkpoint_file(j, path);
}

CharNgramClassifier load_charngram_checkpoint(const std::string& path) {
    json j = detail::read_checkpoint_file(path, "charngram");
    CharNgramConfig cfg;
    cfg.buckets = j.at("buckets").get<int>();
    cfg.dim = j.at("dim").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    CharNgramClassifier m(cfg);
    m.restore(j.at("embeddings").get<std::vector<double>>(),
              j.at("output_weights").get<std::vector<double>>(),
              j.at("output_bias").get<std::vector<double>>());
    return m;
}

}  // namespace userhan
