#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adfilt/linalg.hpp"
#include "testutil.hpp"

using namespace adfilt;
using namespace adfilt::linalg;

namespace {
// random symmetric positive definite matrix A = M M^T + eps I
Tensor random_spd(std::size_t n, std::mt19937_64& gen, double eps = 0.1) {
  const Tensor m = testutil::random_tensor({n, n}, gen);
  Tensor a = matmul(m, transpose(m));
  for (std::size_t i = 0; i < n; ++i) a.at(i, i) += eps;
  return a;
}

double residual_inf(const Tensor& a, const Tensor& b, const std::vector<double>& v,
                    double lambda) {
  // || A v - lambda B v ||_inf
  const Tensor av = matvec(a, v);
  const Tensor bv = matvec(b, v);
  double r = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) r = std::max(r, std::abs(av[i] - lambda * bv[i]));
  return r;
}
}  // namespace

TEST_CASE("known 2x2 eigenvalues") {
  const Tensor a = Tensor::matrix({{2, 1}, {1, 2}});
  const auto e = eig_sym(a);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(3.0));
}

TEST_CASE("jacobi eigenpairs satisfy A v = lambda v") {
  auto gen = testutil::rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 3 + trial;
    Tensor a = testutil::random_tensor({n, n}, gen);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) a.at(i, j) = a.at(j, i);
    }
    const auto e = eig_sym(a);
    const Tensor eye = Tensor::identity(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = e.vectors.at(i, k);
      CHECK(residual_inf(a, eye, v, e.values[k]) < 1e-9);
    }
    // eigenvector orthonormality
    const Tensor gram = matmul(transpose(e.vectors), e.vectors);
    CHECK(max_abs_diff(gram, eye) < 1e-9);
  }
}

TEST_CASE("generalized problem: residual and B-orthonormality") {
  auto gen = testutil::rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 4;
    const Tensor a = random_spd(n, gen);
    const Tensor b = random_spd(n, gen, 0.5);
    const auto e = eig_sym_generalized(a, b);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = e.vectors.at(i, k);
      CHECK(residual_inf(a, b, v, e.values[k]) < 1e-6);
    }
    const Tensor vbv = matmul(transpose(e.vectors), matmul(b, e.vectors));
    CHECK(max_abs_diff(vbv, Tensor::identity(n)) < 1e-8);
  }
}

TEST_CASE("values come back ascending") {
  auto gen = testutil::rng(23);
  const auto e = eig_sym(random_spd(6, gen));
  for (std::size_t i = 1; i < e.values.size(); ++i) CHECK(e.values[i - 1] <= e.values[i]);
}

TEST_CASE("indefinite B is rejected") {
  const Tensor a = Tensor::identity(2);
  const Tensor b = Tensor::matrix({{1, 0}, {0, -1}});
  CHECK_THROWS_AS(eig_sym_generalized(a, b), NumericError);
}

TEST_CASE("non-square input is rejected") {
  CHECK_THROWS_AS(eig_sym(Tensor({2, 3})), ShapeError);
}
