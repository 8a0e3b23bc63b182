#include "contrastlab/spectral.hpp"

#include "contrastlab/linalg.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace contrastlab {

Matrix SpectralGraph::restrict_rows(const Matrix& full) const {
  require(full.rows() == n_augs_total, "matrix has " + std::to_string(full.rows()) +
                                           " rows but the model has " + std::to_string(n_augs_total) +
                                           " augmentations");
  Matrix out(n_kept(), full.cols());
  for (Index r = 0; r < n_kept(); ++r) out.row(r) = full.row(kept[static_cast<std::size_t>(r)]);
  return out;
}

Matrix SpectralGraph::expand_rows(const Matrix& kept_rows) const {
  Matrix out = Matrix::Zero(n_augs_total, kept_rows.cols());
  for (Index r = 0; r < n_kept(); ++r) out.row(kept[static_cast<std::size_t>(r)]) = kept_rows.row(r);
  return out;
}

SpectralGraph build_matrices(const AugmentationModel& model) {
  SpectralGraph g;
  const Index N = model.n_inputs();
  g.n_augs_total = model.n_augs();
  g.input_weights = model.input_marginal();
  for (Index x = 0; x < model.n_augs(); ++x)
    if (model.aug_marginal()[x] > 0.0) g.kept.push_back(x);
  const Index Mk = static_cast<Index>(g.kept.size());
  if (Mk == 0) throw InputError("every augmentation has zero marginal");

  g.aug_weights.resize(Mk);
  Matrix cond(N, Mk);
  for (Index c = 0; c < Mk; ++c) {
    const Index x = g.kept[static_cast<std::size_t>(c)];
    g.aug_weights[c] = model.aug_marginal()[x];
    cond.col(c) = model.cond().col(x);
  }

  g.joint = g.input_weights.asDiagonal() * cond;

  Vector in_isqrt(N);
  for (Index i = 0; i < N; ++i)
    in_isqrt[i] = g.input_weights[i] > 0.0 ? 1.0 / std::sqrt(g.input_weights[i]) : 0.0;
  const Vector aug_isqrt = g.aug_weights.cwiseSqrt().cwiseInverse();
  g.joint_norm = in_isqrt.asDiagonal() * g.joint * aug_isqrt.asDiagonal();

  // w_{x,x'} = sum_xbar w_xbar A(x|xbar) A(x'|xbar)
  g.adjacency = cond.transpose() * g.input_weights.asDiagonal() * cond;
  g.adjacency_norm = aug_isqrt.asDiagonal() * g.adjacency * aug_isqrt.asDiagonal();
  // Symmetrize away rounding so the solver sees an exactly symmetric input.
  g.adjacency_norm = 0.5 * (g.adjacency_norm + g.adjacency_norm.transpose()).eval();

  SymmetricEigen es = eigen_descending(g.adjacency_norm);
  g.anorm_eigs = es.values;
  g.anorm_vectors = std::move(es.vectors);
  g.laplacian_eigs = (1.0 - g.anorm_eigs.array()).matrix();
  return g;
}

double gram_identity_residual(const SpectralGraph& graph) {
  const Matrix gram = graph.joint_norm.transpose() * graph.joint_norm;
  return (graph.adjacency_norm - gram).cwiseAbs().maxCoeff();
}

double bayes_error(const AugmentationModel& model) {
  const Matrix joint = model.joint();
  double correct = 0.0;
  for (Index x = 0; x < joint.cols(); ++x) correct += joint.col(x).maxCoeff();
  return std::max(0.0, 1.0 - correct);
}

double rho_bar(const AugmentationModel& model) {
  const double lo = model.input_marginal().minCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return model.input_marginal().maxCoeff() / lo;
}

double eigengap_bound(const AugmentationModel& model, Index d) {
  const Index N = model.n_inputs();
  require(d >= 0 && d < N, "eigengap bound needs 0 <= d < N (d=" + std::to_string(d) +
                               ", N=" + std::to_string(N) + ")");
  const double tau = bayes_error(model);
  if (tau == 0.0) return 0.0;
  const double rho = rho_bar(model);
  if (std::isinf(rho)) return rho;
  return 2.0 * rho * tau / (1.0 - static_cast<double>(d) / static_cast<double>(N));
}

void export_spectrum(const SpectralGraph& graph, std::ostream& out) {
  out << "index,lambda,gamma\n";
  for (Index i = 0; i < graph.laplacian_eigs.size(); ++i) {
    out << (i + 1) << ',' << format_double(graph.laplacian_eigs[i]) << ','
        << format_double(graph.anorm_eigs[i]) << '\n';
  }
}

}  // namespace contrastlab
