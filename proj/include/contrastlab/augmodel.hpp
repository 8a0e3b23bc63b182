#pragma once

#include "contrastlab/common.hpp"

#include <iosfwd>
#include <optional>
#include <utility>

namespace contrastlab {

// Finite augmentation model: N inputs with a marginal, and for each input a
// distribution over M augmentations. Immutable once built.
class AugmentationModel {
 public:
  // Validates and renormalizes rows that are off by at most 1e-9.
  AugmentationModel(Vector input_marginal, Matrix cond,
                    std::optional<Matrix> aug_points = std::nullopt,
                    std::optional<Matrix> input_points = std::nullopt);

  Index n_inputs() const { return cond_.rows(); }
  Index n_augs() const { return cond_.cols(); }
  const Vector& input_marginal() const { return input_marginal_; }
  const Matrix& cond() const { return cond_; }    // N x M, row i = A(.|input i)
  const Vector& aug_marginal() const { return aug_marginal_; }
  const std::optional<Matrix>& aug_points() const { return aug_points_; }      // M x p
  const std::optional<Matrix>& input_points() const { return input_points_; }  // N x p

  // joint(i, x) = input_marginal(i) * cond(i, x)
  Matrix joint() const;

 private:
  Vector input_marginal_;
  Matrix cond_;
  Vector aug_marginal_;
  std::optional<Matrix> aug_points_;
  std::optional<Matrix> input_points_;
};

AugmentationModel build_finite_model(Vector input_marginal, Matrix cond,
                                     std::optional<Matrix> aug_points = std::nullopt,
                                     std::optional<Matrix> input_points = std::nullopt);

struct HypercubeConfig {
  Index dim = 50;          // D
  Index label_dim = 10;    // k: leading coordinates left untouched
  Vector classifier_w;     // length k
  std::uint64_t seed = 0;
  Index tau_levels = 4;    // Q

  void validate() const;
};

// Inputs drawn without replacement from {-1,+1}^D. Input i owns
// augmentations i*Q .. i*Q+Q-1 with scale (q + 0.5) / Q on the trailing
// D - k coordinates.
AugmentationModel discretize_hypercube(const HypercubeConfig& cfg, Index n_inputs,
                                       std::uint64_t seed);

// Splits every (input, augmentation) pair with positive mass into its own
// augmentation and appends the input index / (N - 1) as an extra coordinate.
// Models without points get one-hot stubs first.
AugmentationModel tag_with_identity(const AugmentationModel& model);

bool is_disjoint(const AugmentationModel& model);

// For each augmentation, the unique input with positive mass on it, or -1
// when no input has mass. Throws when the model is not disjoint.
std::vector<Index> augmentation_owner(const AugmentationModel& model);

// Draws from the similar-pair and negative distributions.
class PairSampler {
 public:
  explicit PairSampler(const AugmentationModel& model);
  std::pair<Index, Index> similar_pair(Rng& rng) const;
  Index negative(Rng& rng) const;
  Index input(Rng& rng) const;
  Index augment(Index input, Rng& rng) const;

 private:
  DiscreteSampler inputs_;
  DiscreteSampler augs_;
  std::vector<DiscreteSampler> rows_;
};

std::pair<Index, Index> sample_similar_pair(const PairSampler& sampler, Rng& rng);
Index sample_negative(const PairSampler& sampler, Rng& rng);

// Text format:
//   augmodel v1 N M has_points
//   N lines of input marginal values
//   "i j p" triples for nonzero cond entries
//   if has_points: "points P" then M lines of P coordinates,
//                  optionally "input_points P" then N lines
void save_model(const AugmentationModel& model, std::ostream& out);
AugmentationModel load_model(std::istream& in);

}  // namespace contrastlab
