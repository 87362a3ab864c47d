#pragma once

#include <vector>

#include "mmgcd/common.hpp"
#include "mmgcd/matrix.hpp"

namespace mmgcd {

struct KmeansResult {
    std::vector<int> assignments;
    Matrix centroids;
    double distortion = 0.0;  // sum of squared distances to assigned centroid
    std::size_t iterations = 0;
};

// Lloyd's algorithm with distance-weighted (k-means++ style) seeding.
// Deterministic given the seed; distortion is non-increasing across
// iterations. Throws DegenerateInput when n < k.
KmeansResult kmeans(const Matrix& x, std::size_t k, RngSeed seed, std::size_t max_iters = 100);

}  // namespace mmgcd
