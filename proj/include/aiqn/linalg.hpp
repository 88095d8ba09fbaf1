#pragma once

#include <vector>

#include "aiqn/tensor.hpp"

namespace aiqn {

struct SymEig {
  std::vector<double> values;  // ascending
  Tensor vectors;              // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Rotations stop
/// once the off-diagonal Frobenius norm is at most 1e-12 (relative to the
/// matrix norm for matrices larger than unit scale).
SymEig sym_eig(const Tensor& m);

/// V diag(f(lambda)) V^T for a symmetric matrix, with eigenvalues clamped at 0
/// before applying sqrt.
Tensor sym_sqrt(const Tensor& m);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace aiqn
