#include "contrastlab/bounds.hpp"

#include "contrastlab/linalg.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace contrastlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void mark_vacuous(TransferBoundReport& r, const std::string& term) {
  r.vacuous = true;
  if (r.vacuous_term.empty()) r.vacuous_term = term;
  r.bound_value = kInf;
}

void check_indices(std::span<const double> lambdas, Index d, Index d_prime) {
  const Index n = static_cast<Index>(lambdas.size());
  require(d_prime >= 1 && d_prime <= d, "need 1 <= d' <= d (d=" + std::to_string(d) +
                                            ", d'=" + std::to_string(d_prime) + ")");
  require(d < n, "lambda_{d+1} does not exist: d=" + std::to_string(d) + " with " + std::to_string(n) +
                     " eigenvalues");
}

void record_eigs(TransferBoundReport& r, std::span<const double> lambdas, Index d, Index d_prime) {
  auto at = [&](Index one_based) { return lambdas[static_cast<std::size_t>(one_based - 1)]; };
  r.eigs_used = {{d_prime, at(d_prime)}, {d_prime + 1, at(d_prime + 1)}, {d + 1, at(d + 1)}};
}

}  // namespace

TransferBoundReport haochen_bound(std::span<const double> lambdas, double alpha, Index d, Index d_prime,
                                  double subopt, double c1, double c2) {
  check_indices(lambdas, d, d_prime);
  require(alpha >= 0.0, "alpha must be non-negative");
  require(subopt >= 0.0, "suboptimality must be non-negative");
  TransferBoundReport r;
  r.d = d;
  r.d_prime = d_prime;
  r.subopt = subopt;
  r.c1 = c1;
  r.c2 = c2;
  record_eigs(r, lambdas, d, d_prime);
  const double lam_next = lambdas[static_cast<std::size_t>(d_prime)];
  const double gap = lambdas[static_cast<std::size_t>(d)] - lambdas[static_cast<std::size_t>(d_prime - 1)];

  if (lam_next <= kZeroDenominator) {
    r.term_approx = kInf;
    mark_vacuous(r, "term_approx");
  } else {
    r.term_approx = c1 * alpha / lam_next;
  }
  if (std::abs(gap) <= kZeroDenominator) {
    r.term_subopt = kInf;
    mark_vacuous(r, "term_subopt");
  } else {
    r.term_subopt = c2 * subopt * static_cast<double>(d_prime) / (gap * gap);
  }
  if (!r.vacuous) r.bound_value = r.term_approx + r.term_subopt;
  return r;
}

TransferBoundReport haochen_bound(const SpectralGraph& graph, double alpha, Index d, Index d_prime,
                                  double subopt, double c1, double c2) {
  const Vector& l = graph.laplacian_eigs;
  return haochen_bound(std::span<const double>(l.data(), static_cast<std::size_t>(l.size())), alpha, d,
                       d_prime, subopt, c1, c2);
}

FnclassSpectrum fnclass_eigenvalues(const Matrix& cov, const Matrix& cov_avg) {
  require(cov.rows() == cov.cols() && cov_avg.rows() == cov.rows() && cov_avg.cols() == cov.cols(),
          "covariances must be square and of equal size");
  const SymmetricEigen es = eigen_descending(0.5 * (cov + cov.transpose()));
  const double top = es.values.size() > 0 ? es.values[0] : 0.0;
  require(top > 0.0, "feature covariance is zero: no feature directions");
  Index rank = 0;
  while (rank < es.values.size() && es.values[rank] > kRelativeCutoff * top) ++rank;
  const Matrix root_inv = es.vectors.leftCols(rank) * es.values.head(rank).cwiseSqrt().cwiseInverse().asDiagonal();
  const Matrix whitened = root_inv.transpose() * cov_avg * root_inv;
  const SymmetricEigen inner = eigen_descending(0.5 * (whitened + whitened.transpose()));
  FnclassSpectrum out;
  out.lambdas = (1.0 - inner.values.array()).matrix();
  out.null_dims = cov.rows() - rank;
  return out;
}

FnclassSpectrum fnclass_eigenvalues(const AugmentationModel& model, const FeatureMatrix& phi) {
  require(phi.rows() == model.n_augs(), "feature matrix must have one row per augmentation");
  const Matrix cov = phi.values.transpose() * model.aug_marginal().asDiagonal() * phi.values;
  const Matrix avg = model.cond() * phi.values;
  const Matrix cov_avg = avg.transpose() * model.input_marginal().asDiagonal() * avg;
  return fnclass_eigenvalues(cov, cov_avg);
}

TransferBoundReport fnclass_bound_from_terms(std::span<const double> lambdas, double approx_numerator,
                                             double subopt, Index d, Index d_prime) {
  require(approx_numerator >= 0.0, "approximation numerator must be non-negative");
  require(subopt >= 0.0, "suboptimality must be non-negative");
  if (d_prime == 0) {
    TransferBoundReport best;
    bool have = false;
    for (Index dp = 1; dp <= d; ++dp) {
      TransferBoundReport r = fnclass_bound_from_terms(lambdas, approx_numerator, subopt, d, dp);
      if (!have || (!r.vacuous && (best.vacuous || r.bound_value < best.bound_value))) {
        best = r;
        have = true;
      }
    }
    require(have, "d must be at least 1");
    return best;
  }
  check_indices(lambdas, d, d_prime);
  const double lam_dp = lambdas[static_cast<std::size_t>(d_prime - 1)];
  const double c2_den = 1.0 - lam_dp;
  TransferBoundReport r = haochen_bound(lambdas, approx_numerator, d, d_prime, subopt, 1.0,
                                        c2_den > kZeroDenominator ? 2.0 / c2_den : kInf);
  if (c2_den <= kZeroDenominator) {
    r.term_subopt = kInf;
    mark_vacuous(r, "term_subopt");
  }
  return r;
}

GSearchResult best_g_exhaustive(const AugmentationModel& model, const FeatureMatrix& phi,
                                const LabelFunction& ystar) {
  const Index M = model.n_augs();
  require(M <= 20, "exact enumeration over g needs M <= 20 (M=" + std::to_string(M) + ")");
  require(ystar.domain() == LabelDomain::inputs && ystar.size() == model.n_inputs(),
          "expected labels on the inputs");
  require(phi.rows() == M, "feature matrix must have one row per augmentation");

  const Vector root = model.aug_marginal().cwiseSqrt();
  const RangeBasis range = column_range(root.asDiagonal() * phi.values);
  const Matrix resid_proj = Matrix::Identity(M, M) - range.basis * range.basis.transpose();
  const Matrix joint = model.joint();
  Vector pos_mass = Vector::Zero(M), neg_mass = Vector::Zero(M);
  for (Index i = 0; i < joint.rows(); ++i) (ystar[i] > 0 ? pos_mass : neg_mass) += joint.row(i).transpose();

  using Mask = std::uint32_t;  // bit x set <=> g(x) = +1
  auto value_of = [&](Mask mask, Vector& r) {
    Vector gn(M);
    double delta = 0.0;
    for (Index x = 0; x < M; ++x) {
      const bool plus = (mask >> x) & 1U;
      gn[x] = (plus ? 1.0 : -1.0) * root[x];
      delta += plus ? neg_mass[x] : pos_mass[x];
    }
    r = resid_proj * gn;
    return delta;
  };
  auto lex_less = [](Mask a, Mask b) {
    const Mask diff = a ^ b;
    if (diff == 0) return false;
    const Mask low = diff & (~diff + 1U);
    return (a & low) == 0;
  };

  Vector r;
  double delta = value_of(0, r);
  Mask best = 0;
  double best_val = 2.0 * delta + std::sqrt(r.squaredNorm());
  const std::uint64_t total = std::uint64_t{1} << M;
  Mask gray = 0;
  for (std::uint64_t c = 1; c < total; ++c) {
    const Mask next = static_cast<Mask>(c ^ (c >> 1));
    const Index x = static_cast<Index>(std::countr_zero(next ^ gray));
    gray = next;
    if ((c & 4095U) == 0) {
      delta = value_of(gray, r);
    } else {
      const bool plus = (gray >> x) & 1U;
      const double s = plus ? 1.0 : -1.0;
      r += (2.0 * s * root[x]) * resid_proj.col(x);
      delta += plus ? (neg_mass[x] - pos_mass[x]) : (pos_mass[x] - neg_mass[x]);
    }
    const double val = 2.0 * delta + std::sqrt(r.squaredNorm());
    if (val < best_val - 1e-12 || (std::abs(val - best_val) <= 1e-12 && lex_less(gray, best))) {
      best_val = std::min(val, best_val);
      best = gray;
    }
  }

  Vector g(M);
  for (Index x = 0; x < M; ++x) g[x] = ((best >> x) & 1U) ? 1.0 : -1.0;
  LabelFunction gl(LabelDomain::augmentations, std::move(g));
  GSearchResult out{gl, inconsistency(model, gl, ystar), reg_loss_features(model, phi, gl)};
  return out;
}

TransferBoundReport fnclass_bound(const AugmentationModel& model, const FeatureMatrix& phi,
                                  const LabelFunction& ystar, double subopt, Index d, Index d_prime,
                                  GStrategy strategy, const LabelFunction* user_g) {
  const FnclassSpectrum spec = fnclass_eigenvalues(model, phi);
  std::optional<LabelFunction> g;
  double delta = 0.0, reg = 0.0;
  switch (strategy) {
    case GStrategy::exact_enumeration: {
      GSearchResult s = best_g_exhaustive(model, phi, ystar);
      g = s.g;
      delta = s.inconsistency;
      reg = s.reg_loss;
      break;
    }
    case GStrategy::propagate_labels:
      g = propagate_labels(model, ystar);
      break;
    case GStrategy::user_supplied:
      require(user_g != nullptr, "user_supplied strategy needs a labeling g");
      g = *user_g;
      break;
  }
  if (strategy != GStrategy::exact_enumeration) {
    delta = inconsistency(model, *g, ystar);
    reg = reg_loss_features(model, phi, *g);
  }
  const double numerator = 4.0 * (2.0 * delta + std::sqrt(reg));
  const Vector& l = spec.lambdas;
  TransferBoundReport r = fnclass_bound_from_terms(
      std::span<const double>(l.data(), static_cast<std::size_t>(l.size())), numerator, subopt, d, d_prime);
  r.g_used = g;
  r.inconsistency = delta;
  r.reg_loss = reg;
  r.g_heuristic = strategy != GStrategy::exact_enumeration;
  return r;
}

double hypercube_bound(Index k, double subopt) {
  require(subopt >= 0.0, "suboptimality must be non-negative");
  return 32.0 * static_cast<double>(k) * subopt;
}

double vacuity_floor(Index n, Index d) {
  require(n >= 1, "N must be positive");
  const double N = static_cast<double>(n);
  const double radicand = (std::numbers::ln2 / 2.0) *
                          (static_cast<double>(d) * std::log2(N) / N + 2.0 / N +
                           std::log2(std::numbers::e * N / 2.0) / N);
  if (radicand >= 0.25) return 0.0;
  return std::max(0.0, 0.5 - std::sqrt(radicand));
}

void write_report(const TransferBoundReport& r, std::ostream& out) {
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("vacuous"); };
  out << "bound=" << (r.vacuous ? std::string("vacuous") : num(r.bound_value)) << '\n';
  out << "vacuous=" << (r.vacuous ? "true" : "false") << '\n';
  if (r.vacuous) out << "vacuous_term=" << r.vacuous_term << '\n';
  out << "term_approx=" << num(r.term_approx) << '\n';
  out << "term_subopt=" << num(r.term_subopt) << '\n';
  out << "d=" << r.d << '\n';
  out << "d_prime=" << r.d_prime << '\n';
  out << "subopt=" << num(r.subopt) << '\n';
  out << "c1=" << num(r.c1) << '\n';
  out << "c2=" << num(r.c2) << '\n';
  if (r.g_used) {
    out << "inconsistency=" << num(r.inconsistency) << '\n';
    out << "reg_loss=" << num(r.reg_loss) << '\n';
    out << "g_heuristic=" << (r.g_heuristic ? "true" : "false") << '\n';
  }
  for (const auto& [i, lam] : r.eigs_used) out << "lambda_" << i << '=' << num(lam) << '\n';
}

}  // namespace contrastlab
