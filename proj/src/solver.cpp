#include "contrastlab/solver.hpp"

#include "contrastlab/linalg.hpp"

#include <cmath>

namespace contrastlab {

namespace {

Matrix normalized_features(const SpectralGraph& graph, const FeatureMatrix& phi) {
  return graph.aug_weights.cwiseSqrt().asDiagonal() * graph.restrict_rows(phi.values);
}

// Columns vectors[:, i] * sqrt(max(values[i], 0)) for i < d, zero padded.
Matrix scaled_top(const Matrix& vectors, const Vector& values, Index d, Vector& used) {
  const Index t = std::min(d, values.size());
  Matrix out = Matrix::Zero(vectors.rows(), d);
  used = Vector::Zero(d);
  for (Index i = 0; i < t; ++i) {
    used[i] = std::max(values[i], 0.0);
    out.col(i) = vectors.col(i) * std::sqrt(used[i]);
  }
  return out;
}

}  // namespace

SpectralSolution optimal_unconstrained(const SpectralGraph& graph, Index d) {
  require(d >= 1 && d <= graph.n_augs_total,
          "d must be between 1 and M=" + std::to_string(graph.n_augs_total));
  SpectralSolution sol;
  const Matrix fn = scaled_top(graph.anorm_vectors, graph.anorm_eigs, d, sol.spectrum_used);
  const Vector isqrt = graph.aug_weights.cwiseSqrt().cwiseInverse();
  sol.F_opt = RepMatrix(graph.expand_rows(isqrt.asDiagonal() * fn));
  sol.min_loss = -sol.spectrum_used.squaredNorm();
  sol.basis = graph.anorm_vectors.leftCols(std::min(d, graph.anorm_vectors.cols()));
  return sol;
}

SpectralSolution optimal_in_linear_class(const SpectralGraph& graph, const FeatureMatrix& phi, Index d) {
  require(d >= 1, "d must be at least 1");
  const Matrix phin = normalized_features(graph, phi);
  const RangeBasis range = column_range(phin);
  const Matrix& q = range.basis;
  SpectralSolution sol;
  Matrix fn;
  if (range.rank() == 0) {
    fn = Matrix::Zero(graph.n_kept(), d);
    sol.spectrum_used = Vector::Zero(d);
    sol.basis = Matrix(graph.n_kept(), 0);
  } else {
    const Matrix reduced = q.transpose() * graph.adjacency_norm * q;
    const SymmetricEigen es = eigen_descending(0.5 * (reduced + reduced.transpose()));
    const Matrix dirs = q * es.vectors;
    fn = scaled_top(dirs, es.values, d, sol.spectrum_used);
    sol.basis = dirs.leftCols(std::min(d, dirs.cols()));
  }
  // pinv(phin) = V S^-1 Q^T
  const Matrix w = range.right_vectors * range.singular_values.cwiseInverse().asDiagonal() * (q.transpose() * fn);
  sol.W_opt = w;
  sol.F_opt = RepMatrix(phi.values * w);
  sol.min_loss = -sol.spectrum_used.squaredNorm();
  return sol;
}

Suboptimality suboptimality(const SpectralGraph& graph, const RepMatrix& rep, const FeatureMatrix* phi) {
  Suboptimality out;
  const Index d = rep.dim();
  if (phi == nullptr) {
    out.epsilon = spectral_loss_exact(graph, rep) - optimal_unconstrained(graph, d).min_loss;
    return out;
  }
  const Matrix phin = normalized_features(graph, *phi);
  const Matrix fn = graph.aug_weights.cwiseSqrt().asDiagonal() * graph.restrict_rows(rep.values);
  const RangeBasis range = column_range(phin);
  const Matrix proj = range.basis * (range.basis.transpose() * fn);
  double loss;
  if ((fn - proj).norm() > 1e-6 * std::max(1.0, fn.norm())) {
    out.projected = true;
    const Vector isqrt = graph.aug_weights.cwiseSqrt().cwiseInverse();
    loss = spectral_loss_exact(graph, RepMatrix(graph.expand_rows(isqrt.asDiagonal() * proj)));
  } else {
    loss = spectral_loss_exact(graph, rep);
  }
  out.epsilon = loss - optimal_in_linear_class(graph, *phi, d).min_loss;
  return out;
}

ProjectedSvd projected_svd(const SpectralGraph& graph, const FeatureMatrix& phi) {
  const Matrix phin = normalized_features(graph, phi);
  const RangeBasis range = column_range(phin);
  ProjectedSvd out;
  if (range.rank() == 0) {
    const Index t = std::min(phi.dim(), graph.n_inputs());
    out.U = Matrix::Zero(graph.n_kept(), t);
    out.S = Vector::Zero(t);
    out.V = Matrix::Zero(graph.n_inputs(), t);
    return out;
  }
  const Matrix reduced = range.basis.transpose() * graph.joint_norm.transpose();
  Eigen::BDCSVD<Matrix> svd(reduced, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.U = range.basis * svd.matrixU();
  out.S = svd.singularValues();
  out.V = svd.matrixV();
  return out;
}

}  // namespace contrastlab
