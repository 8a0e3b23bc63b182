#pragma once

#include "contrastlab/losses.hpp"
#include "contrastlab/solver.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace contrastlab {

// A transfer bound with its ingredients. `vacuous` marks an infinite bound
// (zero denominator); `vacuous_term` names the offending term.
struct TransferBoundReport {
  double bound_value = 0.0;
  bool vacuous = false;
  std::string vacuous_term;
  Index d = 0;
  Index d_prime = 0;
  double term_approx = 0.0;
  double term_subopt = 0.0;
  double subopt = 0.0;
  std::vector<std::pair<Index, double>> eigs_used;  // 1-based index, lambda
  std::optional<LabelFunction> g_used;
  double inconsistency = 0.0;  // of g_used
  double reg_loss = 0.0;       // of g_used
  bool g_heuristic = false;
  double c1 = 1.0;
  double c2 = 1.0;
};

// Denominators at or below this are treated as zero.
inline constexpr double kZeroDenominator = 1e-10;

// c1 * alpha / lambda_{d'+1} + c2 * eps * d' / (lambda_{d+1} - lambda_{d'})^2
// on an ascending eigenvalue list.
TransferBoundReport haochen_bound(std::span<const double> lambdas, double alpha, Index d, Index d_prime,
                                  double subopt, double c1 = 1.0, double c2 = 1.0);
TransferBoundReport haochen_bound(const SpectralGraph& graph, double alpha, Index d, Index d_prime,
                                  double subopt, double c1 = 1.0, double c2 = 1.0);

struct FnclassSpectrum {
  Vector lambdas;     // ascending
  Index null_dims = 0;  // feature directions with no variance
};

// Eigenvalues of I - S^-1/2 Sbar S^-1/2 for feature covariances S, Sbar.
FnclassSpectrum fnclass_eigenvalues(const Matrix& cov, const Matrix& cov_avg);
FnclassSpectrum fnclass_eigenvalues(const AugmentationModel& model, const FeatureMatrix& phi);

enum class GStrategy { exact_enumeration, propagate_labels, user_supplied };

// 4 (2 Delta + sqrt(L_reg)) / lambda_{d'+1} + 2 d' eps / ((1 - lambda_{d'}) (lambda_{d+1} - lambda_{d'})^2),
// given the already minimized numerator 4 (2 Delta + sqrt(L_reg)).
// d_prime = 0 means minimize over 1..d.
TransferBoundReport fnclass_bound_from_terms(std::span<const double> lambdas, double approx_numerator,
                                             double subopt, Index d, Index d_prime = 0);

TransferBoundReport fnclass_bound(const AugmentationModel& model, const FeatureMatrix& phi,
                                  const LabelFunction& ystar, double subopt, Index d, Index d_prime = 0,
                                  GStrategy strategy = GStrategy::propagate_labels,
                                  const LabelFunction* user_g = nullptr);

// Exhaustive minimization of 2 Delta(g) + sqrt(L_reg(g)) over g in {+-1}^M,
// ties to the lexicographically smallest g (-1 before +1). M <= 20.
struct GSearchResult {
  LabelFunction g;
  double inconsistency;
  double reg_loss;
};
GSearchResult best_g_exhaustive(const AugmentationModel& model, const FeatureMatrix& phi,
                                const LabelFunction& ystar);

double hypercube_bound(Index k, double subopt);

// 1/2 - sqrt((ln 2 / 2) (d log2 N / N + 2 / N + log2(e N / 2) / N)), clamped at 0.
double vacuity_floor(Index n, Index d);

// key=value lines; infinite bounds are written as "vacuous".
void write_report(const TransferBoundReport& report, std::ostream& out);

}  // namespace contrastlab
