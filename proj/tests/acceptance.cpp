// Acceptance checks, one PASS/FAIL line each. Usage: acceptance [id ...]
// where id is 1..12 or "all"; 10 and 11 share one experiment run.

#include "oracles.hpp"

#include "contrastlab/bounds.hpp"
#include "contrastlab/hypercube.hpp"
#include "contrastlab/presets.hpp"
#include "contrastlab/solver.hpp"
#include "contrastlab/spurious.hpp"
#include "contrastlab/textlab.hpp"
#include "contrastlab/trainers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>

using namespace contrastlab;

namespace {

// ---- pinned tolerances ----
constexpr double kSpectrumTol = 1e-8;
constexpr double kMonteCarloTol = 1e-2;
constexpr double kCorollarySlack = 1e-6;
constexpr double kFullRankTol = 1e-8;
constexpr double kGramTol = 1e-10;
constexpr double kAlignmentTol = 1e-10;
constexpr double kEigengapSlack = 1e-8;
constexpr double kSpuriousLossTol = 1e-9;
constexpr double kSpuriousMinError = 0.35;
constexpr double kExactLossTol = 1e-10;
constexpr double kSampledSigmas = 5.0;
constexpr double kSimclrExactTol = 1e-12;  // log(2B-1) up to the last few ulps
constexpr double kGradRelTol = 1e-4;
constexpr double kGradAbsFloor = 1e-7;
constexpr double kGradStep = 1e-5;
constexpr double kTable1Sigmas = 2.0;
constexpr double kOrthLossFraction = 0.10;
constexpr double kOrthMaxAcc = 0.65;
constexpr double kBowInvarianceTol = 1e-12;

constexpr double kC1Seconds = 5.0;
constexpr double kC2Seconds = 60.0;
constexpr double kC7Seconds = 120.0;
constexpr double kC10Seconds = 30.0 * 60.0;
constexpr double kC12Seconds = 5.0 * 60.0;

// Frozen means from the reference run of criterion 10/11 (5 seeds, full
// preset). Drift beyond the tolerances below fails the criterion.
struct Frozen {
  const char* arm;
  double loss;
  double acc;
};
constexpr Frozen kFrozen[] = {
    {"linear", -15.151724, 0.9828},
    {"mlp2_adam_wd", -19.207009, 0.9629},
    {"spurious", -19.214075, 0.4828},
    {"mlp2_label_orth", -19.203099, 0.5018},
};
constexpr bool kFrozenSet = true;
constexpr double kFrozenLossRel = 0.05;
constexpr double kFrozenAccAbs = 0.03;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix gaussian(Index r, Index c, Rng& rng) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = standard_normal(rng);
  return m;
}

Matrix random_orthogonal(Index n, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(n, n, rng));
  return qr.householderQ() * Matrix::Identity(n, n);
}

Vector balanced_labels(Index n) {
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = i % 2 ? -1.0 : 1.0;
  return y;
}

Vector random_signs(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = oracle::unif(rng) < 0.5 ? -1.0 : 1.0;
  return v;
}

// ---- 1 ----
void c1(Outcome& o) {
  const auto t0 = Clock::now();
  const auto cf = closed_form_covariances(50, 10);
  const auto exact = fnclass_eigenvalues(Matrix(cf.cov.asDiagonal()), Matrix(cf.cov_avg.asDiagonal()));
  Index zeros = 0, quarters = 0;
  for (Index i = 0; i < exact.lambdas.size(); ++i) {
    if (std::abs(exact.lambdas[i]) <= kSpectrumTol) ++zeros;
    if (std::abs(exact.lambdas[i] - 0.25) <= kSpectrumTol) ++quarters;
  }
  o.require(exact.lambdas.size() == 50, "50 eigenvalues");
  o.require(zeros == 10 && quarters == 40, "10 zeros and 40 quarters");

  Rng rng(derive_seed(20260101, 1));
  const auto mc = monte_carlo_covariances(50, 10, 100000, rng);
  const auto est = fnclass_eigenvalues(mc.cov, mc.cov_avg);
  // Gate on the covariance entries; the spectrum of the sampled 50 x 50
  // pair is reported only, its sampling spread is about sqrt(D / n).
  const double entry_err = std::max((mc.cov - Matrix(cf.cov.asDiagonal())).cwiseAbs().maxCoeff(),
                                    (mc.cov_avg - Matrix(cf.cov_avg.asDiagonal())).cwiseAbs().maxCoeff());
  o.require(entry_err <= kMonteCarloTol, "Monte Carlo covariance entries within 1e-2");
  double eig_err = 0.0;
  for (Index i = 0; i < est.lambdas.size(); ++i)
    eig_err = std::max(eig_err, std::abs(est.lambdas[i] - (i < 10 ? 0.0 : 0.25)));
  const double secs = seconds_since(t0);
  o.require(secs < kC1Seconds, "runtime < 5 s");
  o.detail << "zeros=" << zeros << " quarters=" << quarters << " mc_entry_err=" << entry_err
           << " mc_eig_err=" << eig_err << " secs=" << secs;
}

// ---- 2 ----
void c2(Outcome& o) {
  const auto t0 = Clock::now();
  HypercubeInstance inst;
  inst.cfg.dim = 10;
  inst.cfg.label_dim = 3;
  inst.cfg.tau_levels = 4;
  inst.cfg.classifier_w = Vector::Unit(3, 0);
  const auto ctx = make_transfer_check_context(inst, 256, 3, 2);
  const Matrix w_opt = ctx.optimum.W_opt.value();
  Rng rng(derive_seed(20260102, 1));
  double worst_margin = -1e300, max_lhs = 0.0, max_eps = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Matrix dir = gaussian(w_opt.rows(), w_opt.cols(), rng);
    const double scale = std::pow(10.0, -4.0 + oracle::unif(rng) * (4.0 + std::log10(3.0)));
    const Matrix w = w_opt * random_orthogonal(3, rng) + scale * dir / dir.norm();
    const RepMatrix rep(ctx.phi.values * w);
    const double eps = spectral_loss_exact(ctx.graph, rep) - ctx.optimum.min_loss;
    const double lhs = clf_loss(ctx.model, rep, ctx.ystar);
    const double rhs = 32.0 * 3.0 * eps;
    worst_margin = std::max(worst_margin, lhs - rhs);
    max_lhs = std::max(max_lhs, lhs);
    max_eps = std::max(max_eps, eps);
    o.require(eps >= -1e-10, "epsilon nonnegative");
  }
  o.require(worst_margin <= kCorollarySlack, "clf <= 32 k eps + 1e-6 on all 50");
  const double secs = seconds_since(t0);
  o.require(secs < kC2Seconds, "runtime < 60 s");
  o.detail << "worst(lhs-rhs)=" << worst_margin << " max_clf=" << max_lhs << " max_eps=" << max_eps
           << " secs=" << secs;
}

// ---- 3 ----
void c3(Outcome& o) {
  Rng rng(derive_seed(20260103, 1));
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + static_cast<Index>(uniform_index(rng, 7));
    const Index m = n + static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(17 - n)));
    const auto model = oracle::random_model(n, m, rng);
    const auto fs = fnclass_eigenvalues(model, FeatureMatrix(Matrix::Identity(m, m)));
    const Vector ref =
        oracle::sorted_laplacian_eigs(oracle::normalized_adjacency(model.input_marginal(), model.cond()));
    if (fs.lambdas.size() != ref.size()) {
      o.require(false, "eigenvalue count");
      continue;
    }
    worst = std::max(worst, (fs.lambdas - ref).cwiseAbs().maxCoeff());
  }
  o.require(worst <= kFullRankTol, "within 1e-8");
  o.detail << "max_err=" << worst;
}

// ---- 4 ----
void c4(Outcome& o) {
  Rng rng(derive_seed(20260104, 1));
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + static_cast<Index>(uniform_index(rng, 10));
    const Index m = 1 + static_cast<Index>(uniform_index(rng, 20));
    const auto model = oracle::random_model(n, m, rng, t % 2 == 0);
    const auto g = build_matrices(model);
    // Both sides from the library, then A_norm against the plain-loop build.
    const Matrix gram = g.joint_norm.transpose() * g.joint_norm;
    worst = std::max(worst, (g.adjacency_norm - gram).cwiseAbs().maxCoeff());
    worst = std::max(worst, gram_identity_residual(g));
    const Matrix ref = oracle::normalized_adjacency(model.input_marginal(), model.cond());
    worst = std::max(worst, (ref - gram).cwiseAbs().maxCoeff());
  }
  o.require(worst <= kGramTol, "within 1e-10");
  o.detail << "max_residual=" << worst;
}

// ---- 5 ----
void c5(Outcome& o) {
  Rng rng(derive_seed(20260105, 1));
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + static_cast<Index>(uniform_index(rng, 8));
    const Index m = 2 + static_cast<Index>(uniform_index(rng, 14));
    const auto model = oracle::random_model(n, m, rng);
    const auto g = build_matrices(model);
    const Vector gv = random_signs(m, rng), yv = random_signs(n, rng);
    const double lhs = alignment_identity(g, LabelFunction(LabelDomain::augmentations, gv),
                                          LabelFunction(LabelDomain::inputs, yv));
    const double rhs = 1.0 - 2.0 * oracle::inconsistency(model.input_marginal(), model.cond(), gv, yv);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  o.require(worst <= kAlignmentTol, "within 1e-10");
  o.detail << "max_err=" << worst;
}

// ---- 6 ----
void c6(Outcome& o) {
  Rng rng(derive_seed(20260106, 1));
  double worst = -1e300;
  int checks = 0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + static_cast<Index>(uniform_index(rng, 8));
    const Index m = 1 + static_cast<Index>(uniform_index(rng, 16));
    const auto model = oracle::random_model(n, m, rng);
    const Vector& pi = model.input_marginal();
    const double rho = pi.maxCoeff() / pi.minCoeff();
    const double tau = oracle::bayes_error(pi, model.cond());
    const Vector lam = oracle::sorted_laplacian_eigs(oracle::normalized_adjacency(pi, model.cond()));
    for (Index d = 0; d < n; ++d) {
      const double bound = 2.0 * rho * tau / (1.0 - static_cast<double>(d) / static_cast<double>(n));
      const double lambda = d < lam.size() ? lam[d] : 1.0;
      worst = std::max(worst, lambda - bound);
      o.require(std::abs(eigengap_bound(model, d) - bound) <= 1e-12 * std::max(1.0, bound), "library bound formula");
      ++checks;
    }
  }
  o.require(worst <= kEigengapSlack, "lambda_{d+1} <= bound + 1e-8");

  double worst_disjoint = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + static_cast<Index>(uniform_index(rng, 8));
    const auto model = oracle::random_disjoint_model(n, 1 + static_cast<Index>(uniform_index(rng, 3)), rng, t % 2 == 0);
    const Vector lam =
        oracle::sorted_laplacian_eigs(oracle::normalized_adjacency(model.input_marginal(), model.cond()));
    o.require(oracle::bayes_error(model.input_marginal(), model.cond()) <= 1e-15, "disjoint tau = 0");
    for (Index d = 0; d < n; ++d) worst_disjoint = std::max(worst_disjoint, lam[d]);
  }
  o.require(worst_disjoint <= kEigengapSlack, "disjoint lambda_{d+1} <= 1e-8");
  o.detail << "checks=" << checks << " worst(lambda-bound)=" << worst << " disjoint_max=" << worst_disjoint;
}

// ---- 7 ----

// Minimizer of the spectral loss at dimension `d` on a disjoint model with
// uniform inputs: a random orthonormal frame inside the top eigenspace.
RepMatrix disjoint_minimizer(const AugmentationModel& model, Index d, Rng& rng) {
  const Matrix anorm = oracle::normalized_adjacency(model.input_marginal(), model.cond());
  Eigen::SelfAdjointEigenSolver<Matrix> es(anorm);
  const Index n = model.n_inputs(), m = anorm.rows();
  const Matrix top = es.eigenvectors().rightCols(n);
  const Matrix frame = random_orthogonal(n, rng).leftCols(d);
  const Matrix fn = top * frame;
  const Vector w = oracle::aug_marginal(model.input_marginal(), model.cond());
  Matrix f(m, d);
  for (Index x = 0; x < m; ++x) f.row(x) = fn.row(x) / std::sqrt(w[x]);
  return RepMatrix(f);
}

void c7(Outcome& o) {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(20260107, 1));

  const auto model = oracle::random_disjoint_model(16, 2, rng, true);
  const auto graph = build_matrices(model);
  const RepMatrix base = disjoint_minimizer(model, 2, rng);
  const double base_loss = spectral_loss_exact(graph, base);
  o.require(std::abs(base_loss + 2.0) <= 1e-9, "base representation is a minimizer");
  const LabelFunction ys(LabelDomain::inputs, balanced_labels(16));
  const RepMatrix collapsed = collapse_to_means(model, base);
  Rng srng(derive_seed(20260107, 2));
  const auto s = search_bad_permutation(model, collapsed, ys, 5000, srng);
  const RepMatrix permuted = permute_embeddings(model, collapsed, s.perm);
  const double dloss = std::abs(spectral_loss_exact(graph, permuted) - base_loss);
  const double err = clf_loss(model, permuted, ys);
  o.require(dloss <= kSpuriousLossTol, "|dL| <= 1e-9");
  o.require(err >= kSpuriousMinError, "probe error >= 0.35");

  // N = 8: the search must hit the exhaustive maximum over all 8! maps.
  const auto small = oracle::random_disjoint_model(8, 2, rng, true);
  const RepMatrix sbase = collapse_to_means(small, disjoint_minimizer(small, 2, rng));
  const LabelFunction sy(LabelDomain::inputs, balanced_labels(8));
  Permutation p(8);
  std::iota(p.begin(), p.end(), Index{0});
  double best = 0.0;
  do {
    best = std::max(best, clf_loss(small, permute_embeddings(small, sbase, p), sy));
  } while (std::next_permutation(p.begin(), p.end()));
  Rng srng8(derive_seed(20260107, 3));
  const auto s8 = search_bad_permutation(small, sbase, sy, 5000, srng8);
  o.require(std::abs(s8.probe_error - best) <= 1e-12, "N=8 search equals the exhaustive maximum");

  const double secs = seconds_since(t0);
  o.require(secs < kC7Seconds, "runtime < 120 s");
  o.detail << "base_loss=" << base_loss << " |dL|=" << dloss << " probe_error=" << err
           << " floor=" << vacuity_floor(16, 2) << " n8_search=" << s8.probe_error << " n8_max=" << best
           << " secs=" << secs;
}

// ---- 8 ----
void c8(Outcome& o) {
  Rng rng(derive_seed(20260108, 1));
  double worst_exact = 0.0;
  for (int t = 0; t < 30; ++t) {
    const Index n = 1 + static_cast<Index>(uniform_index(rng, 6));
    const Index m = 1 + static_cast<Index>(uniform_index(rng, 12));
    const auto model = oracle::random_model(n, m, rng);
    const Matrix f = gaussian(m, 1 + static_cast<Index>(uniform_index(rng, 4)), rng);
    const double lib = spectral_loss_exact(build_matrices(model), RepMatrix(f));
    const double ref = oracle::spectral_loss_definition(model.input_marginal(), model.cond(), f);
    worst_exact = std::max(worst_exact, std::abs(lib - ref));
  }
  o.require(worst_exact <= kExactLossTol, "exact vs definitional within 1e-10");

  double worst_z = 0.0;
  for (int t = 0; t < 3; ++t) {
    const auto model = oracle::random_model(4, 8, rng);
    const RepMatrix rep(gaussian(8, 3, rng) * 0.5);
    const auto est = spectral_loss_sampled(model, rep, 1000000, rng);
    const double exact = spectral_loss_exact(build_matrices(model), rep);
    worst_z = std::max(worst_z, std::abs(est.value - exact) / est.std_error);
  }
  o.require(worst_z <= kSampledSigmas, "sampled within 5 SE");

  double worst_simclr = 0.0;
  for (Index b : {2, 3, 8, 64, 512}) {
    for (bool normalize : {true, false}) {
      const Vector v = gaussian(1, 5, rng).row(0).transpose() * (normalize ? 3.0 : 0.2);
      const Matrix x = v.transpose().replicate(b, 1);
      const double got = simclr_loss(x, x, 0.5, normalize);
      worst_simclr = std::max(worst_simclr, std::abs(got - std::log(2.0 * static_cast<double>(b) - 1.0)));
    }
  }
  o.require(worst_simclr <= kSimclrExactTol, "simclr identical reps = log(2B-1)");
  o.detail << "exact_err=" << worst_exact << " sampled_max_z=" << worst_z << " simclr_err=" << worst_simclr;
}

// ---- 9 ----
TokenDoc random_doc(Index vocab, Rng& rng) {
  TokenDoc d(1 + uniform_index(rng, 6));
  for (auto& t : d) t = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(vocab)));
  return d;
}

struct GradGap {
  double rel = 0.0;
  double abs = 0.0;
};

// Empty when the draw has a zero output row under cosine SimCLR.
std::optional<GradGap> grad_check(ModelKind kind, LossKind loss, Index b, Rng& rng) {
  TrainableRep rep = kind == ModelKind::linear ? TrainableRep::linear(5, 3, rng)
                     : kind == ModelKind::mlp2 ? TrainableRep::mlp2(4, 6, 3, rng)
                                               : TrainableRep::bow(10, 3, rng);
  PairBatch batch;
  if (kind == ModelKind::bow) {
    for (Index i = 0; i < b; ++i) {
      batch.left.tokens.push_back(random_doc(10, rng));
      batch.right.tokens.push_back(random_doc(10, rng));
    }
  } else {
    batch.left.dense = gaussian(b, rep.input_dim(), rng);
    batch.right.dense = gaussian(b, rep.input_dim(), rng);
  }
  const LossSpec spec{loss, 0.5, loss == LossKind::simclr};
  Vector analytic;
  try {
    analytic = gradients(rep, batch, spec);
  } catch (const InputError&) {
    return std::nullopt;
  }
  TrainableRep probe = rep;
  const auto fn = [&](const Vector& p) {
    probe.params() = p;
    return contrastive_loss(probe.forward_batch(batch.left), probe.forward_batch(batch.right), spec, false).loss;
  };
  const Vector numeric = oracle::finite_difference(fn, rep.params(), kGradStep);
  return GradGap{oracle::max_relative_gap(analytic, numeric, kGradAbsFloor),
                 (analytic - numeric).cwiseAbs().maxCoeff()};
}

void c9(Outcome& o) {
  Rng rng(derive_seed(20260109, 1));
  int redraws = 0;
  for (ModelKind kind : {ModelKind::linear, ModelKind::mlp2, ModelKind::bow}) {
    for (LossKind loss : {LossKind::simclr, LossKind::spectral_sampled}) {
      GradGap worst;
      for (int t = 0; t < 20; ++t) {
        const Index b = loss == LossKind::simclr ? 4 : 1 + static_cast<Index>(t % 5);
        auto gap = grad_check(kind, loss, b, rng);
        for (; !gap; ++redraws) gap = grad_check(kind, loss, b, rng);
        worst.rel = std::max(worst.rel, gap->rel);
        worst.abs = std::max(worst.abs, gap->abs);
      }
      const std::string name = std::string(kind == ModelKind::linear ? "linear"
                                           : kind == ModelKind::mlp2  ? "mlp2"
                                                                      : "bow") +
                               "/" + (loss == LossKind::simclr ? "simclr" : "spectral");
      o.require(worst.rel <= kGradRelTol, name);
      o.detail << name << " rel=" << worst.rel << " abs=" << worst.abs << "; ";
    }
  }
  o.detail << "redraws=" << redraws;
}

// ---- 10 and 11 ----
const ArmSummary* find_arm(const std::vector<ArmSummary>& s, const std::string& arm) {
  for (const auto& a : s)
    if (a.arm == arm) return &a;
  return nullptr;
}

void print_summary(const std::vector<ArmSummary>& s) {
  for (const auto& a : s)
    std::printf("  %-16s n=%lld loss=%.6f (se %.6f) acc=%.4f (se %.4f)\n", a.arm.c_str(), static_cast<long long>(a.n),
                a.loss_mean, a.loss_se, a.acc_mean, a.acc_se);
}

void check_frozen(Outcome& o, const std::vector<ArmSummary>& s) {
  if (!kFrozenSet) {
    o.detail << " (regression values not frozen yet)";
    return;
  }
  for (const auto& f : kFrozen) {
    const auto* a = find_arm(s, f.arm);
    if (!a) continue;
    o.require(std::abs(a->loss_mean - f.loss) <= kFrozenLossRel * std::abs(f.loss), std::string(f.arm) + " loss drift");
    o.require(std::abs(a->acc_mean - f.acc) <= kFrozenAccAbs, std::string(f.arm) + " acc drift");
  }
}

HypercubeExperiment table1_experiment(const std::string& arms, bool spurious) {
  std::istringstream in(builtin_preset("table1"));
  auto cfg = KeyValueConfig::parse(in, "table1");
  cfg.set("arms", arms);
  cfg.set("spurious", spurious ? "true" : "false");
  return hypercube_experiment_from_config(cfg, 0);
}

void c10_11(Outcome& o10, Outcome& o11) {
  const auto progress = [](const ArmResult& r) {
    std::printf("  seed %llu %-16s loss=%.6f acc=%.4f\n", static_cast<unsigned long long>(r.seed), r.arm.c_str(),
                r.final_cont_loss, r.final_acc);
    std::fflush(stdout);
  };
  const auto t0 = Clock::now();
  const auto main_run = run_experiment(table1_experiment("linear,mlp2_adam_wd", true), progress).summary();
  const double secs = seconds_since(t0);
  print_summary(main_run);

  const auto* lin = find_arm(main_run, "linear");
  const auto* mlp = find_arm(main_run, "mlp2_adam_wd");
  const auto* spu = find_arm(main_run, "spurious");
  if (!lin || !mlp || !spu) {
    o10.require(false, "missing arm");
    o11.require(false, "missing arm");
    return;
  }
  o10.require(lin->n >= 5, ">= 5 seeds");
  const double loss_gap = lin->loss_mean - mlp->loss_mean;
  const double loss_se = std::hypot(lin->loss_se, mlp->loss_se);
  const double acc_gap = lin->acc_mean - mlp->acc_mean;
  const double acc_se = std::hypot(lin->acc_se, mlp->acc_se);
  o10.require(loss_gap >= kTable1Sigmas * loss_se && loss_gap > 0.0, "mlp loss below linear by 2 SE");
  o10.require(acc_gap >= kTable1Sigmas * acc_se && acc_gap > 0.0, "linear accuracy above mlp by 2 SE");
  o10.require(spu->loss_mean <= std::min(lin->loss_mean, mlp->loss_mean), "spurious lowest loss");
  o10.require(spu->acc_mean >= 0.4 && spu->acc_mean <= 0.6, "spurious accuracy in [0.4, 0.6]");
  o10.require(secs < kC10Seconds, "runtime < 30 min");

  const auto orth_run = run_experiment(table1_experiment("mlp2_label_orth", false), progress).summary();
  print_summary(orth_run);
  const auto* orth = find_arm(orth_run, "mlp2_label_orth");
  if (!orth) {
    o11.require(false, "missing arm");
    return;
  }
  const double rel = std::abs(orth->loss_mean - mlp->loss_mean) / std::abs(mlp->loss_mean);
  o11.require(rel <= kOrthLossFraction, "loss within 10% of standard training");
  o11.require(orth->acc_mean <= kOrthMaxAcc, "accuracy <= 0.65");

  o10.detail << "loss linear-mlp=" << loss_gap << " (se " << loss_se << ") acc linear-mlp=" << acc_gap << " (se "
             << acc_se << ") spurious loss=" << spu->loss_mean << " acc=" << spu->acc_mean << " secs=" << secs;
  o11.detail << "orth loss=" << orth->loss_mean << " std loss=" << mlp->loss_mean << " rel=" << rel
             << " orth acc=" << orth->acc_mean;
  check_frozen(o10, main_run);
  check_frozen(o11, orth_run);
}

// ---- 12 ----
void c12(Outcome& o) {
  const auto t0 = Clock::now();
  std::istringstream in(builtin_preset("text"));
  const auto exp = text_experiment_from_config(KeyValueConfig::parse(in, "text"), 0);
  SyntheticCorpusSpec spec;
  const auto corpus = synthetic_corpus(spec);
  const auto r = run_text_experiment(corpus, exp);
  const double chance = 1.0 / static_cast<double>(corpus.n_classes);
  o.require(exp.aug == TextAugmentation::drop, "drop augmentation");
  o.require(r.final_acc >= 2.0 * chance, "accuracy >= 2x chance");

  Rng rng(derive_seed(20260112, 1));
  const auto bow = TrainableRep::bow(corpus.vocab_size, exp.rep_dim, rng);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    TokenDoc doc(1 + uniform_index(rng, kMaxDocLength));
    for (auto& tok : doc) tok = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(corpus.vocab_size)));
    TokenDoc shuffled = doc;
    shuffle(shuffled, rng);
    worst = std::max(worst, (bow.forward(doc) - bow.forward(shuffled)).cwiseAbs().maxCoeff());
  }
  o.require(worst <= kBowInvarianceTol, "permutation invariance 1e-12");
  const double secs = seconds_since(t0);
  o.require(secs < kC12Seconds, "runtime < 5 min");
  o.detail << "acc=" << r.final_acc << " chance=" << chance << " invariance_err=" << worst << " secs=" << secs;
}

void report(int id, const Outcome& o) {
  std::printf("criterion %d: %s %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "all") {
      for (int k = 1; k <= 12; ++k) ids.insert(k);
    } else {
      try {
        const int k = std::stoi(a);
        if (k < 1 || k > 12) throw std::out_of_range(a);
        ids.insert(k);
      } catch (const std::exception&) {
        std::fprintf(stderr, "unknown criterion: %s\n", a.c_str());
        return 2;
      }
    }
  }
  if (ids.empty())
    for (int k = 1; k <= 12; ++k) ids.insert(k);

  const std::map<int, std::function<void(Outcome&)>> simple{
      {1, c1}, {2, c2}, {3, c3}, {4, c4}, {5, c5}, {6, c6}, {7, c7}, {8, c8}, {9, c9}, {12, c12}};
  bool ok = true;
  bool ran_table1 = false;
  for (int id : ids) {
    if (id == 10 || id == 11) {
      if (ran_table1) continue;
      ran_table1 = true;
      Outcome o10, o11;
      try {
        c10_11(o10, o11);
      } catch (const std::exception& e) {
        o10.require(false, e.what());
        o11.require(false, e.what());
      }
      if (ids.count(10)) report(10, o10), ok = ok && o10.pass;
      if (ids.count(11)) report(11, o11), ok = ok && o11.pass;
      continue;
    }
    Outcome o;
    try {
      simple.at(id)(o);
    } catch (const std::exception& e) {
      o.require(false, e.what());
    }
    report(id, o);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
