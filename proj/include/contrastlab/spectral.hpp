#pragma once

#include "contrastlab/augmodel.hpp"

#include <iosfwd>

namespace contrastlab {

// Matrices of the augmentation graph. Augmentations with zero marginal are
// dropped; `kept` maps each retained column back to its original index.
// Everything is immutable after `build_matrices`.
struct SpectralGraph {
  Vector input_weights;   // w_xbar, diagonal of Dbar (N)
  Vector aug_weights;     // w_x over kept augmentations, diagonal of D
  std::vector<Index> kept;
  Index n_augs_total = 0;  // M before dropping

  Matrix joint;           // Abar, N x M'
  Matrix joint_norm;      // Dbar^-1/2 Abar D^-1/2
  Matrix adjacency;       // A, M' x M', w_{x,x'}
  Matrix adjacency_norm;  // D^-1/2 A D^-1/2

  Vector laplacian_eigs;  // ascending eigenvalues of I - A_norm
  Vector anorm_eigs;      // descending eigenvalues of A_norm (1 - laplacian)
  Matrix anorm_vectors;   // eigenvectors, columns aligned with anorm_eigs

  Index n_inputs() const { return input_weights.size(); }
  Index n_kept() const { return aug_weights.size(); }

  // Rows of an M-row matrix restricted to kept augmentations.
  Matrix restrict_rows(const Matrix& full) const;
  // Inverse of restrict_rows, dropped rows filled with zeros.
  Matrix expand_rows(const Matrix& kept_rows) const;
};

SpectralGraph build_matrices(const AugmentationModel& model);

// max |A_norm - Abar_norm^T Abar_norm| entrywise.
double gram_identity_residual(const SpectralGraph& graph);

// 1 - sum_x max_xbar w_{xbar,x}.
double bayes_error(const AugmentationModel& model);

// 2 * rho * tau / (1 - d/N) with rho = max/min input weight and tau the
// Bayes error; bounds laplacian_eigs[d].
// max / min input probability; infinite when some input has zero mass.
double rho_bar(const AugmentationModel& model);
double eigengap_bound(const AugmentationModel& model, Index d);

// CSV "index,lambda,gamma", index counted from 1, ascending lambda.
void export_spectrum(const SpectralGraph& graph, std::ostream& out);

}  // namespace contrastlab
