#pragma once

#include <vector>

#include "adfilt/tensor.hpp"

namespace adfilt::linalg {

struct EigResult {
  std::vector<double> values;  // ascending
  Tensor vectors;              // columns are eigenvectors, same order
};

/// Cyclic Jacobi for a symmetric matrix. Off-diagonal mass is driven below
/// tol * frobenius norm.
EigResult eig_sym(const Tensor& a, double tol = 1e-12, int max_sweeps = 100);

/// Generalized symmetric-definite problem A v = lambda B v via whitening of
/// B (Jacobi both times). B gets ridge * I added before factorization.
/// Returned vectors satisfy the generalized equation and are B-orthonormal.
EigResult eig_sym_generalized(const Tensor& a, const Tensor& b, double ridge = 0.0);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor matvec(const Tensor& a, const std::vector<double>& x);

}  // namespace adfilt::linalg
