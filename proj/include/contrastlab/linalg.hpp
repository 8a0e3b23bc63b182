#pragma once

#include "contrastlab/common.hpp"

namespace contrastlab {

// Singular values at or below this fraction of the largest count as zero.
inline constexpr double kRelativeCutoff = 1e-10;

// Orthonormal basis of the column space of `a`, with the retained singular
// values (descending) and right singular vectors.
struct RangeBasis {
  Matrix basis;          // rows(a) x rank
  Vector singular_values;  // rank
  Matrix right_vectors;  // cols(a) x rank
  Index rank() const { return basis.cols(); }
};

RangeBasis column_range(const Matrix& a, double rel_cutoff = kRelativeCutoff);

Matrix pseudo_inverse(const Matrix& a, double rel_cutoff = kRelativeCutoff);

// Symmetric eigendecomposition with eigenvalues sorted descending.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen eigen_descending(const Matrix& symmetric);

}  // namespace contrastlab
