#pragma once

#include "contrastlab/losses.hpp"

#include <iosfwd>
#include <vector>

namespace contrastlab {

using Permutation = std::vector<Index>;

// Every augmentation of an input gets that input's mean embedding.
// Requires a disjoint model.
RepMatrix collapse_to_means(const AugmentationModel& model, const RepMatrix& rep);

enum class PermuteMode {
  collapsed,  // augmentations of input i take input perm[i]'s mean embedding
  seed_map,   // augmentation w of input i takes f of augmentation w of input perm[i]
};

// Requires a disjoint model with uniform input marginal. In seed_map mode
// every input must have the same conditional distribution up to the order
// of its support.
RepMatrix permute_embeddings(const AugmentationModel& model, const RepMatrix& rep, const Permutation& perm,
                             PermuteMode mode = PermuteMode::collapsed);

struct PermutationSearch {
  Permutation perm;
  double probe_error = 0.0;      // clf_loss of the permuted representation
  double identity_error = 0.0;   // clf_loss of the unpermuted representation
  Index evaluations = 0;
  Index restarts_run = 0;
  bool exhaustive = false;  // every label placement was scored
  bool unbalanced = false;
  double majority_baseline = 0.0;  // error of always predicting the majority label
};

// Restarts (the first from the identity, the rest random) each climbing by
// first-improvement label-crossing swaps, tried in random order, that raise
// the least-squares probe error. `budget` caps candidate evaluations and is
// shared evenly across restarts. The probe error depends only on which
// embeddings receive +1 labels; when all C(N, n+) placements fit in the
// budget they are enumerated instead and the maximum is exact.
PermutationSearch search_bad_permutation(const AugmentationModel& model, const RepMatrix& collapsed,
                                         const LabelFunction& ystar, Index budget, Rng& rng,
                                         Index restarts = 16);

void write_permutation(const Permutation& perm, std::ostream& out);
Permutation read_permutation(std::istream& in);

}  // namespace contrastlab
