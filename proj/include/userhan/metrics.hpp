#pragma once

#include <vector>

#include "userhan/corpus.hpp"

namespace userhan {

struct Metrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

// Diagnosed-positive precision/recall/F1. Zero denominators yield 0.
Metrics f1_score(const std::vector<Label>& predictions, const std::vector<Label>& labels);

}  // namespace userhan
