#pragma once

#include "mmgcd/common.hpp"
#include "mmgcd/matrix.hpp"

namespace mmgcd {

// Symmetric positive-definite matrix. Construction checks squareness and
// symmetry (1e-12 relative) and stores an exactly symmetrized copy;
// positive-definiteness surfaces when a factorization runs.
class SpdMatrix {
public:
    SpdMatrix() = default;
    explicit SpdMatrix(Matrix m);

    static SpdMatrix identity(std::size_t n) { return SpdMatrix(Matrix::identity(n)); }
    static SpdMatrix diag(const Vec& v) { return SpdMatrix(Matrix::diag(v)); }

    std::size_t dim() const { return m_.rows; }
    const Matrix& mat() const { return m_; }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

private:
    Matrix m_;
};

struct CholeskyResult {
    Matrix l;        // lower triangular, m = l * l^T
    bool jittered;   // a one-shot diagonal jitter was needed
};

// Cholesky factorization. On a failed pivot, retries once with a diagonal
// jitter of 1e-10 * trace/dim to absorb round-off on analytically SPD
// inputs, then throws NotSpd.
CholeskyResult cholesky(const SpdMatrix& m);

// log|m| via Cholesky. Returned in log space; exponentiate for the raw
// determinant.
double logdet_spd(const SpdMatrix& m);

// Jacobi eigendecomposition of a symmetric matrix: m = V diag(w) V^T with
// V orthogonal, eigenvalues ascending.
struct EigenResult {
    Vec values;
    Matrix vectors;  // columns are eigenvectors
};
EigenResult eigen_sym(const Matrix& m);

// Symmetric principal square root: r SPD with r*r = m.
SpdMatrix sqrt_spd(const SpdMatrix& m);

// Solve m * X = b for SPD m using an existing Cholesky factor.
Matrix cholesky_solve(const Matrix& l, const Matrix& b);

// Q D Q^T with Q random orthogonal and diagonal D with max/min <= condition_cap.
SpdMatrix random_spd(std::size_t dim, double condition_cap, RngSeed seed);

}  // namespace mmgcd
