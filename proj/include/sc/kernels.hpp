#pragma once

// Dense batch kernels behind the SAE forward/backward passes.
//
// sc::kernels holds the OpenMP versions. Each parallel loop runs over output
// rows and every output element is accumulated by a single thread in a fixed
// order, so results are bit-identical for any thread count.
// sc::reference holds plain serial triple loops kept as a test oracle and as
// the benchmark baseline.

#include <span>

#include "sc/matrix.hpp"

namespace sc {

namespace kernels {

// pre(n, j) = sum_i W_E(j, i) * (X(n, i) - b(i)) + b_E(j);  Z = max(pre, 0)
void encode_rows(const Matrix& X, const Matrix& W_E, std::span<const double> b,
                 std::span<const double> b_E, Matrix& pre, Matrix& Z);

// Xhat(n, i) = sum_j W_D(i, j) * Z(n, j) + b(i)
void decode_rows(const Matrix& Z, const Matrix& W_D, std::span<const double> b,
                 Matrix& Xhat);

// G(n, j) = sum_i W_D(i, j) * R(n, i)   (R times W_D)
void backprop_codes(const Matrix& R, const Matrix& W_D, Matrix& G);

// out(p, q) = sum_n A(n, p) * B(n, q)   (A^T B)
void outer_accumulate(const Matrix& A, const Matrix& B, Matrix& out);

// out(p) = sum_n A(n, p)
void column_sums(const Matrix& A, std::span<double> out);

// sum_n sum_i (X(n, i) - Y(n, i))^2, reduced row by row in row order.
double squared_error(const Matrix& X, const Matrix& Y);

int max_threads();
void set_threads(int n);

}  // namespace kernels

namespace reference {

void encode_rows(const Matrix& X, const Matrix& W_E, std::span<const double> b,
                 std::span<const double> b_E, Matrix& pre, Matrix& Z);
void decode_rows(const Matrix& Z, const Matrix& W_D, std::span<const double> b,
                 Matrix& Xhat);
void backprop_codes(const Matrix& R, const Matrix& W_D, Matrix& G);
void outer_accumulate(const Matrix& A, const Matrix& B, Matrix& out);
void column_sums(const Matrix& A, std::span<double> out);
double squared_error(const Matrix& X, const Matrix& Y);

}  // namespace reference

}  // namespace sc
