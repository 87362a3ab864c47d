#pragma once

#include "mmgcd/linalg.hpp"

namespace mmgcd {

// n i.i.d. draws from N(mean, cov), one per row. Row i uses draws
// i*d..i*d+d-1 of the seed's normal stream, so the sample matrix is
// bit-identical for identical inputs.
Matrix sample_mvn(const Vec& mean, const SpdMatrix& cov, std::size_t n, RngSeed seed);

// Same, reusing an existing Cholesky factor and an open stream.
Matrix sample_mvn(const Vec& mean, const Matrix& chol_l, std::size_t n, Rng& rng);

// Column means of the rows of x.
Vec empirical_mean(const Matrix& x);

// Unbiased (n-1) sample covariance of the rows of x.
Matrix empirical_cov(const Matrix& x);

}  // namespace mmgcd
