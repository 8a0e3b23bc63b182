#pragma once

#include "contrastlab/augmodel.hpp"
#include "contrastlab/losses.hpp"
#include "contrastlab/solver.hpp"
#include "contrastlab/trainers.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace contrastlab {

// Labels sign(w^T x[:k]) with 0 mapped to +1.
struct HypercubeInstance {
  HypercubeConfig cfg;  // classifier_w holds w*

  int label(const Eigen::Ref<const Vector>& x) const;
  Vector labels(const Matrix& inputs) const;
  Matrix sample_inputs(Index n, Rng& rng) const;
  // x[:k] kept, x[k:] scaled by tau ~ U((0, 1]).
  Vector augment(const Eigen::Ref<const Vector>& xbar, Rng& rng) const;
};

// w*[:k] drawn i.i.d. standard normal from `seed`.
HypercubeInstance make_instance(Index dim, Index label_dim, std::uint64_t seed);

// Diagonals of E[phi phi^T] and E[phibar phibar^T] for identity features
// under continuous tau: (1 x k, 1/3 x (D-k)) and (1 x k, 1/4 x (D-k)).
struct DiagonalCovariances {
  Vector cov;
  Vector cov_avg;
};
DiagonalCovariances closed_form_covariances(Index dim, Index label_dim);

// Sample estimates of the same two matrices (full, not just diagonals):
// cov from sampled augmentations, cov_avg from the exact conditional mean.
struct CovariancePair {
  Matrix cov;
  Matrix cov_avg;
};
CovariancePair monte_carlo_covariances(Index dim, Index label_dim, Index n_samples, Rng& rng);

// Precomputed objects for checking the clf <= 32 k eps corollary on a
// discretized hypercube with identity features.
struct TransferCheckContext {
  AugmentationModel model;
  SpectralGraph graph;
  FeatureMatrix phi;
  LabelFunction ystar;
  Index label_dim;
  Index rep_dim;
  SpectralSolution optimum;
};
TransferCheckContext make_transfer_check_context(const HypercubeInstance& inst, Index n_inputs, Index d, std::uint64_t seed);

struct TransferCheck {
  double lhs = 0.0;      // clf_loss
  double rhs = 0.0;      // 32 k eps
  double epsilon = 0.0;
  bool projected = false;
  bool holds = false;    // lhs <= rhs + 1e-6
};
TransferCheck check_linear_transfer(const TransferCheckContext& ctx, const RepMatrix& rep);

// ---- multi-arm experiment ----

struct ArmSpec {
  std::string name;
  ModelKind kind = ModelKind::linear;
  TrainConfig train;
};

struct HypercubeExperiment {
  HypercubeConfig cfg;            // D, k (w* drawn per seed)
  Index n_train = 50000;
  Index n_val = 12500;
  std::vector<std::uint64_t> seeds{0};
  Index hidden = 100;
  Index rep_dim = 20;
  std::vector<ArmSpec> arms;
  bool spurious_arm = true;
  Index analysis_inputs = 512;    // held-out discretized set for the contrastive metric
  Index analysis_tau_levels = 8;
  Index eval_tau_levels = 8;      // tau grid for augmentation-averaged features
  Index probe_fit_size = 12500;   // training inputs used to fit the probe
  ProbeSpec probe{ProbeMethod::least_squares, true};
  Index spurious_budget = 20000;
};

// Arms of the default experiment: linear (spectral, SimCLR), mlp2 with
// Adam + weight decay, mlp2 with SGD, mlp2 label-orthogonal.
std::vector<ArmSpec> default_arms();

struct ArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  double final_cont_loss = 0.0;
  double final_acc = 0.0;
  Trajectory trajectory;
};

struct ArmSummary {
  std::string arm;
  Index n = 0;
  double loss_mean = 0.0, loss_se = 0.0;
  double acc_mean = 0.0, acc_se = 0.0;
};

struct ExperimentResult {
  std::vector<ArmResult> rows;
  std::vector<ArmSummary> summary() const;
  const ArmSummary* find(const std::vector<ArmSummary>& s, const std::string& arm) const;
  void write_summary_csv(std::ostream& out) const;  // arm,seed,final_cont_loss,final_acc
  void write_aggregate_csv(std::ostream& out) const;
};

using ProgressFn = std::function<void(const ArmResult&)>;

// The contrastive metric is the exact population spectral loss on a
// held-out discretized subsample; accuracy is that of a probe fitted on
// training inputs and scored on the validation inputs. The spurious arm
// collapses and permutes the lowest-loss trained representation of the
// seed on the subsample, and its probe is fitted and scored on two halves
// of the subsample.
ExperimentResult run_experiment(const HypercubeExperiment& exp, const ProgressFn& progress = {});

}  // namespace contrastlab
