#include "mmgcd/kmeans.hpp"

#include <cmath>
#include <limits>

#include "mmgcd/kernels.hpp"

namespace mmgcd {

namespace {

double dist2_to(const Matrix& x, std::size_t i, const double* c) {
    const double* p = x.row(i);
    double d = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
        double t = p[j] - c[j];
        d += t * t;
    }
    return d;
}

// k-means++ seeding: first centroid uniform, then each next point picked
// with probability proportional to its squared distance to the closest
// centroid chosen so far.
Matrix seed_centroids(const Matrix& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.rows;
    Matrix centroids(k, x.cols);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());

    std::size_t first = static_cast<std::size_t>(rng.below(n));
    for (std::size_t j = 0; j < x.cols; ++j) centroids(0, j) = x(first, j);

    for (std::size_t c = 1; c < k; ++c) {
        const double* prev = centroids.row(c - 1);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], dist2_to(x, i, prev));
            total += best[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += best[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All remaining mass is zero (duplicate points); take the next index.
            pick = static_cast<std::size_t>(rng.below(n));
        }
        for (std::size_t j = 0; j < x.cols; ++j) centroids(c, j) = x(pick, j);
    }
    return centroids;
}

}  // namespace

KmeansResult kmeans(const Matrix& x, std::size_t k, RngSeed seed, std::size_t max_iters) {
    const std::size_t n = x.rows;
    if (k < 1) throw DegenerateInputError("kmeans: k must be >= 1");
    if (n < k) throw DegenerateInputError("kmeans: fewer points than clusters");

    Rng rng(seed);
    KmeansResult res;
    res.centroids = seed_centroids(x, k, rng);

    std::vector<int> prev_assign;
    std::vector<double> dist2;
    for (std::size_t it = 0; it < max_iters; ++it) {
        kernels::nearest_centroid(x, res.centroids, res.assignments, dist2);
        res.distortion = 0.0;
        for (double d : dist2) res.distortion += d;
        res.iterations = it + 1;
        if (res.assignments == prev_assign) break;
        prev_assign = res.assignments;

        // Mean update.
        Matrix sums(k, x.cols);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* srow = sums.row(res.assignments[i]);
            const double* p = x.row(i);
            for (std::size_t j = 0; j < x.cols; ++j) srow[j] += p[j];
            counts[res.assignments[i]]++;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            double* crow = res.centroids.row(c);
            const double* srow = sums.row(c);
            for (std::size_t j = 0; j < x.cols; ++j)
                crow[j] = srow[j] / static_cast<double>(counts[c]);
        }
        // Re-seed empty clusters at the point farthest from its centroid.
        // That point contributed the largest term, so distortion stays
        // non-increasing.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (dist2[i] > far_d) {
                    far_d = dist2[i];
                    far = i;
                }
            for (std::size_t j = 0; j < x.cols; ++j) res.centroids(c, j) = x(far, j);
            dist2[far] = 0.0;  // don't hand two empty clusters the same point
        }
    }
    return res;
}

}  // namespace mmgcd
