#pragma once

#include <set>
#include <vector>

#include "mmgcd/common.hpp"
#include "mmgcd/matrix.hpp"

namespace mmgcd {

struct Assignment {
    std::vector<int> mapping;  // row id -> assigned column id (bijection)
    double total_cost = 0.0;
};

struct GcdEvalReport {
    double acc_all = 0.0;
    double acc_old = 0.0;
    double acc_new = 0.0;
    std::size_t n_all = 0, n_old = 0, n_new = 0;
    Assignment assignment;                    // predicted cluster id -> label id
    std::vector<std::size_t> class_counts;    // ground-truth count per label id
    std::vector<std::size_t> correct_counts;  // correctly matched count per label id
};

struct KEstimate {
    std::size_t k_star = 0;
    std::vector<std::pair<std::size_t, double>> table;  // (k, labeled-subset accuracy)
};

struct SimilarityBin {
    std::size_t bin;
    double mean_similarity;
    double accuracy;
};

struct BiasReport {
    struct ClassRow {
        int label;
        std::size_t true_count;
        std::size_t predicted_count;
    };
    std::vector<ClassRow> histogram;  // sorted by true count, descending
    // confusion[truth is old ? 0 : 1][prediction maps to old ? 0 : 1]
    std::size_t confusion[2][2] = {{0, 0}, {0, 0}};
};

// Exact minimum-cost perfect matching on a square cost matrix
// (Jonker-Volgenant shortest augmenting paths).
Assignment hungarian_assign(const Matrix& cost);

// Hungarian-matched GCD accuracy. One permutation of the padded confusion
// matrix maximizes overall agreement; the old/new splits reuse it.
GcdEvalReport acc_gcd(const std::vector<int>& preds, const std::vector<int>& labels,
                      const std::set<int>& old_set);

// Category-count estimation: cluster all rows for each candidate k and score
// the labeled subset (labels[i] < 0 marks unlabeled rows); best-scoring k
// wins, smallest on ties.
KEstimate estimate_k(const Matrix& features, const std::vector<int>& labels,
                     const std::vector<std::size_t>& k_range, RngSeed seed);

// Sort by cross-modal cosine similarity, split into equal-size groups
// (last group absorbs the remainder), report per-group accuracy.
std::vector<SimilarityBin> similarity_bins(const Matrix& h_x, const Matrix& h_y,
                                           const std::vector<bool>& correct, std::size_t bins);

BiasReport bias_report(const std::vector<int>& preds, const std::vector<int>& labels,
                       const std::set<int>& old_set);

// Soft voting: argmax of the elementwise logit sum, ties to the smaller id.
std::vector<int> predict_vote(const Matrix& logits_x, const Matrix& logits_y);

}  // namespace mmgcd
