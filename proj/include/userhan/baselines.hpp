#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "userhan/corpus.hpp"

namespace userhan {

// All posts concatenated in post order, tokenized and lower-cased.
std::vector<std::string> user_document(const UserRecord& user);

// Sparse feature vector, entries sorted by column index.
struct SparseVec {
    std::vector<std::pair<int, double>> entries;
};

// tf = raw count; idf(t) = ln((1+N)/(1+df(t))) + 1; rows L2-normalized.
// Unseen tokens at transform time are ignored.
class TfidfVectorizer {
public:
    std::vector<SparseVec> fit_transform(const std::vector<std::vector<std::string>>& docs);
    SparseVec transform(const std::vector<std::string>& doc) const;

    bool fitted() const { return fitted_; }
    int num_features() const { return static_cast<int>(idf_.size()); }

    const std::unordered_map<std::string, int>& vocabulary() const { return vocabulary_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::vector<double>& idf() const { return idf_; }

    static TfidfVectorizer restore(std::vector<std::string> feature_names,
                                   std::vector<double> idf);

private:
    std::unordered_map<std::string, int> vocabulary_;
    std::vector<std::string> feature_names_;
    std::vector<double> idf_;
    bool fitted_ = false;
};

enum class LinearLoss { logistic, hinge };

struct LinearModel {
    std::vector<double> weights;
    double bias = 0;
    double C = 1.0;
    LinearLoss loss = LinearLoss::logistic;

    double decision(const SparseVec& x) const;
    Label predict(const SparseVec& x) const;  // decision >= 0 reads diagnosed
};

// Objective: (1/n) sum loss_i + (1/(2*C*n)) ||w||^2, minimized by
// deterministic full-batch gradient descent with backtracking steps.
// Stops at gradient norm < 1e-6 or 1000 iterations.
LinearModel train_linear(const std::vector<SparseVec>& x, const std::vector<int>& y, double C,
                         LinearLoss loss, int num_features);

double linear_objective(const LinearModel& m, const std::vector<SparseVec>& x,
                        const std::vector<int>& y);

// Maximizes dev F1 (diagnosed positive); ties break toward smaller C.
double grid_search(const std::vector<SparseVec>& x_train, const std::vector<int>& y_train,
                   const std::vector<SparseVec>& x_dev, const std::vector<int>& y_dev,
                   LinearLoss loss, int num_features,
                   const std::vector<double>& grid = {0.01, 0.1, 1.0, 10.0, 100.0});

// Character n-grams of "<word>" for n in [3, 6].
std::vector<std::string> char_ngrams(const std::string& word);

std::uint64_t fnv1a(const std::string& s);

struct CharNgramConfig {
    int buckets = 100000;
    int dim = 100;
    int epochs = 100;
    double learning_rate = 0.1;  // linearly decaying to 0
    std::uint64_t seed = 0;
};

// Supervised bag-of-character-n-grams classifier: document vector is the mean
// of hashed n-gram bucket embeddings, followed by a 2-class softmax.
class CharNgramClassifier {
public:
    explicit CharNgramClassifier(CharNgramConfig cfg = {});

    void fit(const std::vector<std::vector<std::string>>& docs, const std::vector<int>& labels);
    double predict_prob(const std::vector<std::string>& doc) const;  // P(diagnosed)
    Label predict(const std::vector<std::string>& doc) const;

    const CharNgramConfig& config() const { return cfg_; }
    const std::vector<double>& embeddings() const { return emb_; }
    const std::vector<double>& output_weights() const { return out_w_; }
    const std::vector<double>& output_bias() const { return out_b_; }
    void restore(std::vector<double> emb, std::vector<double> out_w, std::vector<double> out_b);

    std::vector<int> bucket_ids(const std::vector<std::string>& doc) const;

private:
    CharNgramConfig cfg_;
    std::vector<double> emb_;    // buckets x dim
    std::vector<double> out_w_;  // 2 x dim
    std::vector<double> out_b_;  // 2
};

// Checkpoint IO (same JSON container as the HAN, distinct kind tags).
void save_linear_checkpoint(const LinearModel& m, const TfidfVectorizer& vec,
                            const std::string& path);
struct LinearCheckpoint {
    LinearModel model;
    TfidfVectorizer vectorizer;
};
LinearCheckpoint load_linear_checkpoint(const std::string& path, LinearLoss expected);

void save_charngram_checkpoint(const CharNgramClassifier& m, const std::string& path);
CharNgramClassifier load_charngram_checkpoint(const std::string& path);

}  // namespace userhan
