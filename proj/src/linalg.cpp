#include "contrastlab/linalg.hpp"

#include <Eigen/SVD>

namespace contrastlab {

RangeBasis column_range(const Matrix& a, double rel_cutoff) {
  RangeBasis out;
  if (a.size() == 0) {
    out.basis = Matrix(a.rows(), 0);
    out.right_vectors = Matrix(a.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double top = s.size() > 0 ? s[0] : 0.0;
  Index rank = 0;
  while (rank < s.size() && top > 0.0 && s[rank] > rel_cutoff * top) ++rank;
  out.basis = svd.matrixU().leftCols(rank);
  out.singular_values = s.head(rank);
  out.right_vectors = svd.matrixV().leftCols(rank);
  return out;
}

Matrix pseudo_inverse(const Matrix& a, double rel_cutoff) {
  RangeBasis r = column_range(a, rel_cutoff);
  return r.right_vectors * r.singular_values.cwiseInverse().asDiagonal() *
         r.basis.transpose();
}

SymmetricEigen eigen_descending(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric);
  if (es.info() != Eigen::Success) throw NumericError("symmetric eigensolver failed");
  SymmetricEigen out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace contrastlab
