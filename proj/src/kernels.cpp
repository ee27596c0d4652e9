#include "sc/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sc {

namespace {

inline void resize(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

}  // namespace

namespace kernels {

void encode_rows(const Matrix& X, const Matrix& W_E, std::span<const double> b,
                 std::span<const double> b_E, Matrix& pre, Matrix& Z) {
  const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(X.rows());
  const std::size_t d = X.cols();
  const std::size_t m = W_E.rows();
  resize(pre, X.rows(), m);
  resize(Z, X.rows(), m);

#pragma omp parallel
  {
    std::vector<double> centered(d);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
      const double* x = X.data() + n * static_cast<std::ptrdiff_t>(d);
      for (std::size_t i = 0; i < d; ++i) centered[i] = x[i] - b[i];
      double* p = pre.data() + n * static_cast<std::ptrdiff_t>(m);
      double* z = Z.data() + n * static_cast<std::ptrdiff_t>(m);
      for (std::size_t j = 0; j < m; ++j) {
        const double* w = W_E.data() + j * d;
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += w[i] * centered[i];
        p[j] = acc + b_E[j];
        z[j] = p[j] > 0.0 ? p[j] : 0.0;
      }
    }
  }
}

void decode_rows(const Matrix& Z, const Matrix& W_D, std::span<const double> b,
                 Matrix& Xhat) {
  const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(Z.rows());
  const std::size_t m = Z.cols();
  const std::size_t d = W_D.rows();
  resize(Xhat, Z.rows(), d);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
    const double* z = Z.data() + n * static_cast<std::ptrdiff_t>(m);
    double* out = Xhat.data() + n * static_cast<std::ptrdiff_t>(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double* w = W_D.data() + i * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += w[j] * z[j];
      out[i] = acc + b[i];
    }
  }
}

void backprop_codes(const Matrix& R, const Matrix& W_D, Matrix& G) {
  const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(R.rows());
  const std::size_t d = R.cols();
  const std::size_t m = W_D.cols();
  resize(G, R.rows(), m);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
    const double* r = R.data() + n * static_cast<std::ptrdiff_t>(d);
    double* g = G.data() + n * static_cast<std::ptrdiff_t>(m);
    std::fill(g, g + m, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double ri = r[i];
      const double* w = W_D.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) g[j] += w[j] * ri;
    }
  }
}

void outer_accumulate(const Matrix& A, const Matrix& B, Matrix& out) {
  const std::size_t n_rows = A.rows();
  const std::ptrdiff_t p_dim = static_cast<std::ptrdiff_t>(A.cols());
  const std::size_t q_dim = B.cols();
  resize(out, A.cols(), q_dim);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < p_dim; ++p) {
    double* o = out.data() + p * static_cast<std::ptrdiff_t>(q_dim);
    std::fill(o, o + q_dim, 0.0);
    for (std::size_t n = 0; n < n_rows; ++n) {
      const double a = A(n, static_cast<std::size_t>(p));
      if (a == 0.0) continue;
      const double* bn = B.data() + n * q_dim;
      for (std::size_t q = 0; q < q_dim; ++q) o[q] += a * bn[q];
    }
  }
}

void column_sums(const Matrix& A, std::span<double> out) {
  const std::ptrdiff_t cols = static_cast<std::ptrdiff_t>(A.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < cols; ++p) {
    double acc = 0.0;
    for (std::size_t n = 0; n < A.rows(); ++n) acc += A(n, static_cast<std::size_t>(p));
    out[static_cast<std::size_t>(p)] = acc;
  }
}

double squared_error(const Matrix& X, const Matrix& Y) {
  const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(X.rows());
  const std::size_t d = X.cols();
  std::vector<double> per_row(X.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
    const double* x = X.data() + n * static_cast<std::ptrdiff_t>(d);
    const double* y = Y.data() + n * static_cast<std::ptrdiff_t>(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = x[i] - y[i];
      acc += diff * diff;
    }
    per_row[static_cast<std::size_t>(n)] = acc;
  }
  double total = 0.0;
  for (double v : per_row) total += v;
  return total;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads([[maybe_unused]] int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

}  // namespace kernels

namespace reference {

void encode_rows(const Matrix& X, const Matrix& W_E, std::span<const double> b,
                 std::span<const double> b_E, Matrix& pre, Matrix& Z) {
  pre = Matrix(X.rows(), W_E.rows());
  Z = Matrix(X.rows(), W_E.rows());
  for (std::size_t n = 0; n < X.rows(); ++n)
    for (std::size_t j = 0; j < W_E.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < X.cols(); ++i) acc += W_E(j, i) * (X(n, i) - b[i]);
      pre(n, j) = acc + b_E[j];
      Z(n, j) = std::max(pre(n, j), 0.0);
    }
}

void decode_rows(const Matrix& Z, const Matrix& W_D, std::span<const double> b,
                 Matrix& Xhat) {
  Xhat = Matrix(Z.rows(), W_D.rows());
  for (std::size_t n = 0; n < Z.rows(); ++n)
    for (std::size_t i = 0; i < W_D.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < Z.cols(); ++j) acc += W_D(i, j) * Z(n, j);
      Xhat(n, i) = acc + b[i];
    }
}

void backprop_codes(const Matrix& R, const Matrix& W_D, Matrix& G) {
  G = Matrix(R.rows(), W_D.cols());
  for (std::size_t n = 0; n < R.rows(); ++n)
    for (std::size_t j = 0; j < W_D.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < R.cols(); ++i) acc += W_D(i, j) * R(n, i);
      G(n, j) = acc;
    }
}

void outer_accumulate(const Matrix& A, const Matrix& B, Matrix& out) {
  out = Matrix(A.cols(), B.cols());
  for (std::size_t p = 0; p < A.cols(); ++p)
    for (std::size_t q = 0; q < B.cols(); ++q) {
      double acc = 0.0;
      for (std::size_t n = 0; n < A.rows(); ++n) acc += A(n, p) * B(n, q);
      out(p, q) = acc;
    }
}

void column_sums(const Matrix& A, std::span<double> out) {
  for (std::size_t p = 0; p < A.cols(); ++p) {
    double acc = 0.0;
    for (std::size_t n = 0; n < A.rows(); ++n) acc += A(n, p);
    out[p] = acc;
  }
}

double squared_error(const Matrix& X, const Matrix& Y) {
  double total = 0.0;
  for (std::size_t n = 0; n < X.rows(); ++n)
    for (std::size_t i = 0; i < X.cols(); ++i) {
      const double diff = X(n, i) - Y(n, i);
      total += diff * diff;
    }
  return total;
}

}  // namespace reference

}  // namespace sc
