#include "mmgcd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mmgcd::kernels {

namespace {
int g_threads =
#ifdef _OPENMP
    0;  // 0 = use omp default
#else
    1;
#endif

int effective_threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void check_nn(const Matrix& a, const Matrix& b, const Matrix& out) {
    if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols)
        throw DimensionMismatchError("matmul_nn: incompatible shapes");
}
void check_nt(const Matrix& a, const Matrix& b, const Matrix& out) {
    if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows)
        throw DimensionMismatchError("matmul_nt: incompatible shapes");
}
void check_tn(const Matrix& a, const Matrix& b, const Matrix& out) {
    if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols)
        throw DimensionMismatchError("matmul_tn: incompatible shapes");
}

// Single-row bodies shared by both flavours so the arithmetic (and thus the
// rounding) is identical.

inline void row_nn(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
    double* oi = out.row(i);
    std::memset(oi, 0, sizeof(double) * out.cols);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = ai[k];
        const double* bk = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
    }
}

inline void row_nt(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) oi[j] = dot(ai, b.row(j), a.cols);
}

inline void row_tn(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
    double* oi = out.row(i);
    std::memset(oi, 0, sizeof(double) * out.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double aki = a(k, i);
        const double* bk = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aki * bk[j];
    }
}

inline void point_nearest(const Matrix& points, const Matrix& centroids, std::size_t i,
                          int& assign, double& best) {
    const double* p = points.row(i);
    best = std::numeric_limits<double>::infinity();
    assign = 0;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        const double* ctr = centroids.row(c);
        double d = 0.0;
        for (std::size_t j = 0; j < points.cols; ++j) {
            double t = p[j] - ctr[j];
            d += t * t;
        }
        if (d < best) {  // strict: ties go to the smaller index
            best = d;
            assign = static_cast<int>(c);
        }
    }
}

inline void row_softmax(const Matrix& scores, double temp, Matrix& out, std::size_t i) {
    const double* s = scores.row(i);
    double* o = out.row(i);
    double m = s[0];
    for (std::size_t j = 1; j < scores.cols; ++j) m = std::max(m, s[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < scores.cols; ++j) {
        o[j] = std::exp((s[j] - m) / temp);
        z += o[j];
    }
    for (std::size_t j = 0; j < scores.cols; ++j) o[j] /= z;
}

}  // namespace

int max_threads() { return effective_threads(); }

void set_threads(int n) { g_threads = n; }

namespace serial {

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    check_nn(a, b, out);
    for (std::size_t i = 0; i < a.rows; ++i) row_nn(a, b, out, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    check_nt(a, b, out);
    for (std::size_t i = 0; i < a.rows; ++i) row_nt(a, b, out, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    check_tn(a, b, out);
    for (std::size_t i = 0; i < a.cols; ++i) row_tn(a, b, out, i);
}

void nearest_centroid(const Matrix& points, const Matrix& centroids,
                      std::vector<int>& assign, std::vector<double>& dist2) {
    assign.resize(points.rows);
    dist2.resize(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i)
        point_nearest(points, centroids, i, assign[i], dist2[i]);
}

void softmax_rows(const Matrix& scores, double temp, Matrix& out) {
    out.rows = scores.rows;
    out.cols = scores.cols;
    out.data.resize(scores.data.size());
    for (std::size_t i = 0; i < scores.rows; ++i) row_softmax(scores, temp, out, i);
}

}  // namespace serial

namespace par {

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    check_nn(a, b, out);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) row_nn(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    check_nt(a, b, out);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) row_nt(a, b, out, static_cast<std::size_t>(i));
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    check_tn(a, b, out);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) row_tn(a, b, out, static_cast<std::size_t>(i));
}

void nearest_centroid(const Matrix& points, const Matrix& centroids,
                      std::vector<int>& assign, std::vector<double>& dist2) {
    assign.resize(points.rows);
    dist2.resize(points.rows);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(points.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        point_nearest(points, centroids, static_cast<std::size_t>(i), assign[i], dist2[i]);
}

void softmax_rows(const Matrix& scores, double temp, Matrix& out) {
    out.rows = scores.rows;
    out.cols = scores.cols;
    out.data.resize(scores.data.size());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(scores.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) row_softmax(scores, temp, out, static_cast<std::size_t>(i));
}

}  // namespace par

namespace {
// Work below this many flops is not worth a parallel region.
constexpr double kMinParallelFlops = 16.0 * 1024;

bool go_parallel(double flops) {
#ifdef _OPENMP
    return effective_threads() > 1 && flops >= kMinParallelFlops;
#else
    (void)flops;
    return false;
#endif
}
}  // namespace

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    if (go_parallel(double(a.rows) * a.cols * b.cols))
        par::matmul_nn(a, b, out);
    else
        serial::matmul_nn(a, b, out);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (go_parallel(double(a.rows) * a.cols * b.rows))
        par::matmul_nt(a, b, out);
    else
        serial::matmul_nt(a, b, out);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    if (go_parallel(double(a.rows) * a.cols * b.cols))
        par::matmul_tn(a, b, out);
    else
        serial::matmul_tn(a, b, out);
}

void nearest_centroid(const Matrix& points, const Matrix& centroids,
                      std::vector<int>& assign, std::vector<double>& dist2) {
    if (go_parallel(double(points.rows) * centroids.rows * points.cols))
        par::nearest_centroid(points, centroids, assign, dist2);
    else
        serial::nearest_centroid(points, centroids, assign, dist2);
}

void softmax_rows(const Matrix& scores, double temp, Matrix& out) {
    if (go_parallel(double(scores.rows) * scores.cols * 8))
        par::softmax_rows(scores, temp, out);
    else
        serial::softmax_rows(scores, temp, out);
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    matmul_nn(a, b, out);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.rows);
    matmul_nt(a, b, out);
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols, b.cols);
    matmul_tn(a, b, out);
    return out;
}

}  // namespace mmgcd::kernels
