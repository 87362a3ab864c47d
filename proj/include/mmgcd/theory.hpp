#pragma once

#include <vector>

#include "mmgcd/linalg.hpp"

namespace mmgcd {

// Per-class two-modality Gaussian: x ~ N(mu_x, cov_x), y ~ N(mu_y, cov_y),
// with coordinate-wise cross-modal correlations r (the diagonal of the
// correlation matrix coupling the two modalities).
struct GaussianClassModel {
    int class_id = 0;
    Vec mu_x;
    SpdMatrix cov_x;
    Vec mu_y;
    SpdMatrix cov_y;
    Vec r;  // entries in [0, 0.999]
};

// Joint Gaussian of the concatenated modalities.
struct FusedGaussian {
    Vec mu_f;
    SpdMatrix cov_f;
};

struct CompactnessReport {
    struct PerClass {
        int class_id;
        double det_x;
        double det_y;
        double det_f;
    };
    std::vector<PerClass> per_class;
    double l_x = 0.0;
    double l_y = 0.0;
    double l_f = 0.0;
};

// Three routes to the fused determinant: direct on the assembled joint
// covariance, the Schur-complement factorization, and the closed product
// |I - R^2| |S_x| |S_y|.
struct AlignmentCheck {
    double direct;
    double product;
    double schur;
    double rel_err;        // |direct - product| / max(|direct|, tiny)
    double schur_rel_err;  // worst of schur vs direct and schur vs product
};

struct SweepRow {
    double r;
    double l_f_analytic;
    double l_f_empirical;
    double kmeans_acc;
};

void validate_model(const GaussianClassModel& m);

// Random fixture: random SPD covariances (condition <= condition_cap),
// standard-normal means, correlations uniform in [r_low, r_high].
GaussianClassModel random_class_model(std::size_t dim, double r_low, double r_high,
                                      double condition_cap, RngSeed seed);

// Stacked mean and block covariance [S_x, S_xy; S_xy^T, S_y] with
// S_xy = sqrt(S_x) diag(r) sqrt(S_y). Requires d_x == d_y.
FusedGaussian build_fused(const GaussianClassModel& model);

CompactnessReport compactness(const std::vector<GaussianClassModel>& models);

AlignmentCheck alignment_identity_check(const GaussianClassModel& model);

// For each grid value: k_classes classes sharing the template's covariances,
// means redrawn at the template's mean radius, correlation fixed at r.
// Reports the analytic and empirical fused compactness and the
// Hungarian-matched k-means accuracy on the sampled points. Grid points are
// evaluated in parallel on independent substreams; row order follows the
// grid.
std::vector<SweepRow> correlation_sweep(const GaussianClassModel& base, std::size_t k_classes,
                                        const Vec& r_grid, std::size_t n_per_class, RngSeed seed);

}  // namespace mmgcd
