#pragma once

#include <cstddef>
#include <vector>

#include "mmgcd/matrix.hpp"

namespace mmgcd::kernels {

// Hot inner loops, each in two flavours: a serial reference and an OpenMP
// version parallelized over output rows. Both compute every output element
// with the same inner-loop order, so their results are bit-identical and the
// dispatchers below never change numbers, only wall time. Reductions across
// threads are avoided for the same reason.

int max_threads();
void set_threads(int n);  // n <= 1 forces the serial path

namespace serial {

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);  // out = a * b
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);  // out = a * b^T
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);  // out = a^T * b

// Index of the nearest centroid per point plus the squared distance to it.
void nearest_centroid(const Matrix& points, const Matrix& centroids,
                      std::vector<int>& assign, std::vector<double>& dist2);

// Row-wise softmax of scores/temp, with max subtraction.
void softmax_rows(const Matrix& scores, double temp, Matrix& out);

}  // namespace serial

namespace par {

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void nearest_centroid(const Matrix& points, const Matrix& centroids,
                      std::vector<int>& assign, std::vector<double>& dist2);
void softmax_rows(const Matrix& scores, double temp, Matrix& out);

}  // namespace par

// Dispatchers: pick the OpenMP flavour when threads > 1 and the problem is
// large enough to amortize the fork.
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void nearest_centroid(const Matrix& points, const Matrix& centroids,
                      std::vector<int>& assign, std::vector<double>& dist2);
void softmax_rows(const Matrix& scores, double temp, Matrix& out);

// Allocating conveniences.
Matrix matmul_nn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

}  // namespace mmgcd::kernels
