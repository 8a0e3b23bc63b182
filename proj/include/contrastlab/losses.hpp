#pragma once

#include "contrastlab/augmodel.hpp"
#include "contrastlab/spectral.hpp"

#include <utility>
#include <vector>

namespace contrastlab {

// Representation evaluated on every augmentation: row x = f(x).
struct RepMatrix {
  Matrix values;

  RepMatrix() = default;
  explicit RepMatrix(Matrix v);
  Index dim() const { return values.cols(); }
  Index rows() const { return values.rows(); }
};

// Feature map evaluated on every augmentation: row x = phi(x).
struct FeatureMatrix {
  Matrix values;

  FeatureMatrix() = default;
  explicit FeatureMatrix(Matrix v);
  Index dim() const { return values.cols(); }
  Index rows() const { return values.rows(); }
};

enum class LabelDomain { inputs, augmentations };

// +-1 labels on inputs (ground truth) or on augmentations.
class LabelFunction {
 public:
  LabelFunction(LabelDomain domain, Vector values);
  LabelDomain domain() const { return domain_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  bool balanced() const { return values_.sum() == 0.0; }

 private:
  LabelDomain domain_;
  Vector values_;
};

// g(x) = label of the input with the largest joint mass on x (lowest index on
// ties, +1 for zero-mass augmentations).
LabelFunction propagate_labels(const AugmentationModel& model, const LabelFunction& ystar);

enum class ProbeMethod { least_squares, logistic };

struct ProbeSpec {
  ProbeMethod method = ProbeMethod::least_squares;
  bool intercept = false;
  int logistic_steps = 500;
  double logistic_lr = 0.1;
};

struct LinearProbe {
  Vector w;
  double bias = 0.0;
  double error = 0.0;  // weighted 0-1 training error
};

// Weighted 0-1 error of sign(score) against +-1 labels. A zero score is a
// tie and costs half an error.
double probe_error(const Vector& scores, const Vector& labels, const Vector& weights);

LinearProbe fit_probe(const Matrix& features, const Vector& labels, const Vector& weights,
                      const ProbeSpec& spec = {});
Vector probe_scores(const LinearProbe& probe, const Matrix& features);

// ||A_norm - F_n F_n^T||^2 - ||A_norm||^2 with F_n = D^1/2 F.
double spectral_loss_exact(const SpectralGraph& graph, const RepMatrix& rep);

// Same quantity from the model tables without forming A_norm:
// -2 sum_xbar w_xbar |fbar(xbar)|^2 + ||F^T D F||^2.
double spectral_loss_population(const AugmentationModel& model, const RepMatrix& rep);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

Estimate spectral_loss_sampled(const AugmentationModel& model, const RepMatrix& rep, Index n_pairs,
                               Rng& rng);

// Batch InfoNCE over 2B anchors; row b of `positives` is the partner of row b
// of `anchors`.
struct SimclrValue {
  double loss = 0.0;
  Matrix grad_anchors;
  Matrix grad_positives;
};
SimclrValue simclr_loss_and_grad(const Matrix& anchors, const Matrix& positives, double temperature,
                                 bool normalize, bool with_grad = true);
double simclr_loss(const Matrix& anchors, const Matrix& positives, double temperature, bool normalize);
double simclr_loss(const std::vector<std::pair<Index, Index>>& batch, const RepMatrix& rep,
                   double temperature, bool normalize);

// Population InfoNCE with `n_negatives` negatives from D_X and raw inner
// products divided by `temperature`, by exhaustive enumeration.
double simclr_population_loss(const AugmentationModel& model, const RepMatrix& rep,
                              Index n_negatives = 1, double temperature = 1.0);

// fbar = cond * F (N x d).
Matrix averaged_representation(const AugmentationModel& model, const RepMatrix& rep);

double clf_loss(const AugmentationModel& model, const RepMatrix& rep, const LabelFunction& ystar,
                const ProbeSpec& probe = {});

double reg_loss_features(const AugmentationModel& model, const FeatureMatrix& phi,
                         const LabelFunction& g);

double inconsistency(const AugmentationModel& model, const LabelFunction& g,
                     const LabelFunction& ystar);

// ybar_n^T Abar_norm g_n, which equals 1 - 2 * inconsistency.
double alignment_identity(const SpectralGraph& graph, const LabelFunction& g,
                          const LabelFunction& ystar);

}  // namespace contrastlab
