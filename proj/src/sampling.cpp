#include "mmgcd/sampling.hpp"

#include "mmgcd/kernels.hpp"

namespace mmgcd {

Matrix sample_mvn(const Vec& mean, const Matrix& chol_l, std::size_t n, Rng& rng) {
    const std::size_t d = mean.size();
    if (chol_l.rows != d) throw DimensionMismatchError("sample_mvn: mean/cov dim mismatch");
    Matrix out(n, d);
    Vec g(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) g[j] = rng.normal();
        double* row = out.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            // L is lower triangular: only the first j+1 entries contribute.
            row[j] = mean[j] + dot(chol_l.row(j), g.data(), j + 1);
        }
    }
    return out;
}

Matrix sample_mvn(const Vec& mean, const SpdMatrix& cov, std::size_t n, RngSeed seed) {
    if (cov.dim() != mean.size()) throw DimensionMismatchError("sample_mvn: mean/cov dim mismatch");
    CholeskyResult ch = cholesky(cov);
    Rng rng(seed);
    return sample_mvn(mean, ch.l, n, rng);
}

Vec empirical_mean(const Matrix& x) {
    Vec mu(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* row = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) mu[j] += row[j];
    }
    for (double& v : mu) v /= static_cast<double>(x.rows);
    return mu;
}

Matrix empirical_cov(const Matrix& x) {
    if (x.rows < 2) throw DegenerateInputError("empirical_cov: need at least 2 rows");
    Vec mu = empirical_mean(x);
    Matrix centered = x;
    for (std::size_t i = 0; i < x.rows; ++i) {
        double* row = centered.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) row[j] -= mu[j];
    }
    Matrix cov = kernels::matmul_tn(centered, centered);
    const double inv = 1.0 / static_cast<double>(x.rows - 1);
    for (double& v : cov.data) v *= inv;
    return cov;
}

}  // namespace mmgcd
