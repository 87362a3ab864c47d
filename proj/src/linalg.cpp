#include "mmgcd/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "mmgcd/kernels.hpp"

namespace mmgcd {

SpdMatrix::SpdMatrix(Matrix m) {
    if (m.rows != m.cols) throw NotSpdError("SpdMatrix: matrix is not square");
    if (!all_finite(m)) throw NotSpdError("SpdMatrix: non-finite entries");
    double scale = 0.0, asym = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j) {
            asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
            scale = std::max(scale, std::max(std::abs(m(i, j)), std::abs(m(j, i))));
        }
    for (std::size_t i = 0; i < m.rows; ++i) scale = std::max(scale, std::abs(m(i, i)));
    if (asym > 1e-12 * std::max(scale, 1e-300))
        throw NotSpdError("SpdMatrix: asymmetry exceeds 1e-12 relative tolerance");
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j) {
            double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    m_ = std::move(m);
}

namespace {

// Returns false on a non-positive pivot.
bool try_cholesky(const Matrix& a, Matrix& l) {
    const std::size_t n = a.rows;
    l = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) - dot(l.row(j), l.row(j), j);
        if (!(d > 0.0)) return false;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j) - dot(l.row(i), l.row(j), j);
            l(i, j) = s / l(j, j);
        }
    }
    return true;
}

}  // namespace

CholeskyResult cholesky(const SpdMatrix& m) {
    Matrix l;
    if (try_cholesky(m.mat(), l)) return {std::move(l), false};
    double trace = 0.0;
    for (std::size_t i = 0; i < m.dim(); ++i) trace += m(i, i);
    double jitter = 1e-10 * trace / static_cast<double>(m.dim());
    Matrix a = m.mat();
    for (std::size_t i = 0; i < m.dim(); ++i) a(i, i) += jitter;
    if (try_cholesky(a, l)) return {std::move(l), true};
    throw NotSpdError("cholesky: non-positive pivot after jitter");
}

double logdet_spd(const SpdMatrix& m) {
    CholeskyResult ch = cholesky(m);
    double s = 0.0;
    for (std::size_t i = 0; i < m.dim(); ++i) s += std::log(ch.l(i, i));
    return 2.0 * s;
}

EigenResult eigen_sym(const Matrix& m) {
    if (m.rows != m.cols) throw DimensionMismatchError("eigen_sym: matrix is not square");
    const std::size_t n = m.rows;
    Matrix a = m;
    Matrix v = Matrix::identity(n);

    // Cyclic Jacobi sweeps until the off-diagonal mass is negligible.
    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-28 * std::max(1.0, frobenius_norm(a))) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (apq == 0.0) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenResult r;
    r.values.resize(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    r.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        r.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) r.vectors(i, j) = v(i, order[j]);
    }
    return r;
}

SpdMatrix sqrt_spd(const SpdMatrix& m) {
    EigenResult e = eigen_sym(m.mat());
    const std::size_t n = m.dim();
    if (e.values.front() <= 0.0) throw NotSpdError("sqrt_spd: non-positive eigenvalue");
    Matrix scaled(n, n);  // V * sqrt(D)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) = e.vectors(i, j) * std::sqrt(e.values[j]);
    Matrix root = kernels::matmul_nt(scaled, e.vectors);  // V sqrt(D) V^T
    // Symmetrize round-off before the SpdMatrix check.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.5 * (root(i, j) + root(j, i));
            root(i, j) = v;
            root(j, i) = v;
        }
    return SpdMatrix(std::move(root));
}

Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
    const std::size_t n = l.rows;
    if (b.rows != n) throw DimensionMismatchError("cholesky_solve: rhs rows mismatch");
    Matrix x = b;
    // forward: L y = b
    for (std::size_t j = 0; j < b.cols; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, j);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, j);
            x(i, j) = s / l(i, i);
        }
        // backward: L^T x = y
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, j);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, j);
            x(ii, j) = s / l(ii, ii);
        }
    }
    return x;
}

SpdMatrix random_spd(std::size_t dim, double condition_cap, RngSeed seed) {
    if (dim < 1) throw DegenerateInputError("random_spd: dim must be >= 1");
    if (condition_cap < 1.0) throw DegenerateInputError("random_spd: condition_cap must be >= 1");
    Rng rng(seed);

    // Random orthogonal Q by Gram-Schmidt on a Gaussian matrix.
    Matrix q(dim, dim);
    for (double& v : q.data) v = rng.normal();
    for (std::size_t j = 0; j < dim; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double proj = 0.0;
            for (std::size_t i = 0; i < dim; ++i) proj += q(i, j) * q(i, k);
            for (std::size_t i = 0; i < dim; ++i) q(i, j) -= proj * q(i, k);
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) nrm += q(i, j) * q(i, j);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) {  // essentially impossible; fall back to a unit axis
            for (std::size_t i = 0; i < dim; ++i) q(i, j) = (i == j) ? 1.0 : 0.0;
            nrm = 1.0;
        }
        for (std::size_t i = 0; i < dim; ++i) q(i, j) /= nrm;
    }

    // Eigenvalues s * cap^{u_i}, u in [0,1]: ratio <= cap by construction.
    double scale = rng.uniform(0.5, 2.0);
    Vec lambda(dim);
    for (std::size_t i = 0; i < dim; ++i)
        lambda[i] = scale * std::pow(condition_cap, rng.uniform());

    Matrix scaled(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) scaled(i, j) = q(i, j) * lambda[j];
    Matrix out = kernels::matmul_nt(scaled, q);  // Q D Q^T
    // Symmetrize round-off before the SpdMatrix check.
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i + 1; j < dim; ++j) {
            double v = 0.5 * (out(i, j) + out(j, i));
            out(i, j) = v;
            out(j, i) = v;
        }
    return SpdMatrix(std::move(out));
}

}  // namespace mmgcd
