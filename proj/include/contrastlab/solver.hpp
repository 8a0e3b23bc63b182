#pragma once

#include "contrastlab/losses.hpp"

#include <optional>

namespace contrastlab {

struct SpectralSolution {
  RepMatrix F_opt;                // M x d, zero rows for dropped augmentations
  std::optional<Matrix> W_opt;    // D_feat x d, linear class only
  double min_loss = 0.0;
  Matrix basis;                   // kept-augmentation eigenvectors used (normalized space)
  Vector spectrum_used;           // top-d eigenvalues after clipping at 0
};

// Best rank-d factorization of A_norm.
SpectralSolution optimal_unconstrained(const SpectralGraph& graph, Index d);

// Best f = W^T phi: factorizes P A_norm P with P the projector onto the
// columns of D^1/2 Phi.
SpectralSolution optimal_in_linear_class(const SpectralGraph& graph, const FeatureMatrix& phi, Index d);

struct Suboptimality {
  double epsilon = 0.0;
  bool projected = false;  // rep was outside span(Phi) and got projected
};

// L_spec(F) minus the minimum over the class (linear class when phi given).
Suboptimality suboptimality(const SpectralGraph& graph, const RepMatrix& rep,
                            const FeatureMatrix* phi = nullptr);

// SVD of P Abar_norm^T; U spans kept augmentations (normalized space).
struct ProjectedSvd {
  Matrix U;
  Vector S;  // descending
  Matrix V;
};
ProjectedSvd projected_svd(const SpectralGraph& graph, const FeatureMatrix& phi);

}  // namespace contrastlab
