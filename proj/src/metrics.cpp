#include "userhan/metrics.hpp"

#include <stdexcept>

namespace userhan {

Metrics f1_score(const std::vector<Label>& predictions, const std::vector<Label>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("f1_score: predictions and labels differ in length (" +
                                    std::to_string(predictions.size()) + " vs " +
                                    std::to_string(labels.size()) + ")");
    if (predictions.empty()) throw std::invalid_argument("f1_score: empty input");
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        bool pred = predictions[i] == Label::diagnosed;
        bool gold = labels[i] == Label::diagnosed;
        if (pred && gold) ++tp;
        else if (pred && !gold) ++fp;
        else if (!pred && gold) ++fn;
    }
    Metrics m;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0
               ? 2 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

}  // namespace userhan
