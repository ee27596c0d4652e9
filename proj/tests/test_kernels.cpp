#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sc/kernels.hpp"

using sc::Matrix;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
  return m;
}

struct Case {
  Matrix X, W_E, W_D, R;
  std::vector<double> b, b_E;
};

Case make_case(std::mt19937_64& g, std::size_t n, std::size_t d, std::size_t m) {
  return {oracle::random_matrix(g, n, d), oracle::random_matrix(g, m, d),
          oracle::random_matrix(g, d, m), oracle::random_matrix(g, n, d),
          oracle::random_vector(g, d), oracle::random_vector(g, m)};
}

struct Outputs {
  Matrix pre, Z, Xhat, G, outer;
  std::vector<double> sums;
  double sq;
};

template <bool Parallel>
Outputs run_all(const Case& c) {
  const std::size_t n = c.X.rows(), d = c.X.cols(), m = c.W_E.rows();
  Outputs o{Matrix(n, m), Matrix(n, m), Matrix(n, d), Matrix(n, m), Matrix(m, d),
            std::vector<double>(m), 0.0};
  if constexpr (Parallel) {
    sc::kernels::encode_rows(c.X, c.W_E, c.b, c.b_E, o.pre, o.Z);
    sc::kernels::decode_rows(o.Z, c.W_D, c.b, o.Xhat);
    sc::kernels::backprop_codes(c.R, c.W_D, o.G);
    sc::kernels::outer_accumulate(o.Z, c.X, o.outer);
    sc::kernels::column_sums(o.Z, o.sums);
    o.sq = sc::kernels::squared_error(c.X, o.Xhat);
  } else {
    sc::reference::encode_rows(c.X, c.W_E, c.b, c.b_E, o.pre, o.Z);
    sc::reference::decode_rows(o.Z, c.W_D, c.b, o.Xhat);
    sc::reference::backprop_codes(c.R, c.W_D, o.G);
    sc::reference::outer_accumulate(o.Z, c.X, o.outer);
    sc::reference::column_sums(o.Z, o.sums);
    o.sq = sc::reference::squared_error(c.X, o.Xhat);
  }
  return o;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 g(11);
  for (auto [n, d, m] : {std::tuple{1, 1, 1}, {7, 5, 3}, {33, 17, 40}, {160, 32, 200}}) {
    const Case c = make_case(g, n, d, m);
    const Outputs p = run_all<true>(c);
    const Outputs r = run_all<false>(c);
    CHECK(max_abs_diff(p.pre, r.pre) <= 1e-12);
    CHECK(max_abs_diff(p.Z, r.Z) <= 1e-12);
    CHECK(max_abs_diff(p.Xhat, r.Xhat) <= 1e-12);
    CHECK(max_abs_diff(p.G, r.G) <= 1e-12);
    CHECK(max_abs_diff(p.outer, r.outer) <= 1e-12);
    for (std::size_t j = 0; j < p.sums.size(); ++j) CHECK(std::abs(p.sums[j] - r.sums[j]) <= 1e-12);
    CHECK(std::abs(p.sq - r.sq) <= 1e-12 * std::max(1.0, r.sq));
  }
}

TEST_CASE("reference kernels match plain matrix products") {
  std::mt19937_64 g(12);
  const Case c = make_case(g, 6, 4, 5);
  const Outputs r = run_all<false>(c);
  const Matrix G = oracle::matmul(c.R, c.W_D);
  CHECK(max_abs_diff(G, r.G) <= 1e-12);
  const Matrix outer = oracle::matmul(r.Z.transposed(), c.X);
  CHECK(max_abs_diff(outer, r.outer) <= 1e-12);
  for (std::size_t n = 0; n < 6; ++n) {
    std::vector<double> h(c.X.row(n).begin(), c.X.row(n).end());
    sc::SaeModel m{c.W_E, c.W_D, c.b, c.b_E};
    const auto z = oracle::encode(m, h);
    for (std::size_t j = 0; j < z.size(); ++j) CHECK(std::abs(z[j] - r.Z(n, j)) <= 1e-12);
  }
}

TEST_CASE("kernel results are bit-identical for any thread count") {
  std::mt19937_64 g(13);
  const Case c = make_case(g, 64, 24, 50);
  const int saved = sc::kernels::max_threads();
  sc::kernels::set_threads(1);
  const Outputs one = run_all<true>(c);
  for (int t : {2, 3, 4}) {
    sc::kernels::set_threads(t);
    const Outputs many = run_all<true>(c);
    CHECK(many.pre == one.pre);
    CHECK(many.Z == one.Z);
    CHECK(many.Xhat == one.Xhat);
    CHECK(many.G == one.G);
    CHECK(many.outer == one.outer);
    CHECK(many.sums == one.sums);
    CHECK(many.sq == one.sq);
  }
  sc::kernels::set_threads(saved);
}
