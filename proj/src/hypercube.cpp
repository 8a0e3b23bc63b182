#include "contrastlab/hypercube.hpp"

#include "contrastlab/spurious.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace contrastlab {

int HypercubeInstance::label(const Eigen::Ref<const Vector>& x) const {
  const double s = cfg.classifier_w.dot(x.head(cfg.label_dim));
  return s < 0.0 ? -1 : 1;
}

Vector HypercubeInstance::labels(const Matrix& inputs) const {
  Vector y(inputs.rows());
  for (Index i = 0; i < inputs.rows(); ++i) y[i] = label(inputs.row(i).transpose());
  return y;
}

Matrix HypercubeInstance::sample_inputs(Index n, Rng& rng) const {
  Matrix x(n, cfg.dim);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < cfg.dim; ++c) x(i, c) = (rng() >> 63) ? 1.0 : -1.0;
  return x;
}

Vector HypercubeInstance::augment(const Eigen::Ref<const Vector>& xbar, Rng& rng) const {
  const double tau = 1.0 - uniform01(rng);  // (0, 1]
  Vector x = xbar;
  x.tail(cfg.dim - cfg.label_dim) *= tau;
  return x;
}

HypercubeInstance make_instance(Index dim, Index label_dim, std::uint64_t seed) {
  HypercubeInstance inst;
  inst.cfg.dim = dim;
  inst.cfg.label_dim = label_dim;
  inst.cfg.seed = seed;
  require(label_dim >= 1 && label_dim < dim, "hypercube needs 1 <= k < D");
  Rng rng(seed);
  inst.cfg.classifier_w.resize(label_dim);
  do {
    for (Index i = 0; i < label_dim; ++i) inst.cfg.classifier_w[i] = standard_normal(rng);
  } while (inst.cfg.classifier_w.cwiseAbs().maxCoeff() == 0.0);
  inst.cfg.validate();
  return inst;
}

DiagonalCovariances closed_form_covariances(Index dim, Index label_dim) {
  require(label_dim >= 1 && label_dim < dim, "hypercube needs 1 <= k < D");
  DiagonalCovariances c;
  c.cov = Vector::Ones(dim);
  c.cov_avg = Vector::Ones(dim);
  c.cov.tail(dim - label_dim).setConstant(1.0 / 3.0);
  c.cov_avg.tail(dim - label_dim).setConstant(1.0 / 4.0);
  return c;
}

CovariancePair monte_carlo_covariances(Index dim, Index label_dim, Index n_samples, Rng& rng) {
  require(n_samples >= 1, "need at least one sample");
  HypercubeInstance inst;
  inst.cfg.dim = dim;
  inst.cfg.label_dim = label_dim;
  CovariancePair out{Matrix::Zero(dim, dim), Matrix::Zero(dim, dim)};
  const Index chunk = 4096;
  Matrix xs(chunk, dim), means(chunk, dim);
  for (Index done = 0; done < n_samples; done += chunk) {
    const Index m = std::min(chunk, n_samples - done);
    for (Index i = 0; i < m; ++i) {
      Vector xbar(dim);
      for (Index c = 0; c < dim; ++c) xbar[c] = (rng() >> 63) ? 1.0 : -1.0;
      xs.row(i) = inst.augment(xbar, rng).transpose();
      means.row(i) = xbar.transpose();
      means.row(i).tail(dim - label_dim) *= 0.5;
    }
    out.cov.noalias() += xs.topRows(m).transpose() * xs.topRows(m);
    out.cov_avg.noalias() += means.topRows(m).transpose() * means.topRows(m);
  }
  out.cov /= static_cast<double>(n_samples);
  out.cov_avg /= static_cast<double>(n_samples);
  return out;
}

TransferCheckContext make_transfer_check_context(const HypercubeInstance& inst, Index n_inputs, Index d, std::uint64_t seed) {
  AugmentationModel model = discretize_hypercube(inst.cfg, n_inputs, seed);
  SpectralGraph graph = build_matrices(model);
  FeatureMatrix phi(*model.aug_points());
  LabelFunction ystar(LabelDomain::inputs, inst.labels(*model.input_points()));
  SpectralSolution opt = optimal_in_linear_class(graph, phi, d);
  return TransferCheckContext{std::move(model), std::move(graph), std::move(phi), std::move(ystar),
                      inst.cfg.label_dim, d, std::move(opt)};
}

TransferCheck check_linear_transfer(const TransferCheckContext& ctx, const RepMatrix& rep) {
  require(rep.dim() == ctx.rep_dim, "representation dimension differs from the context's d");
  TransferCheck c;
  const Matrix phin = ctx.graph.aug_weights.cwiseSqrt().asDiagonal() * ctx.graph.restrict_rows(ctx.phi.values);
  const Matrix fn = ctx.graph.aug_weights.cwiseSqrt().asDiagonal() * ctx.graph.restrict_rows(rep.values);
  const double loss = spectral_loss_exact(ctx.graph, rep);
  // In-span check mirrors suboptimality(); the optimum is reused from the context.
  const Matrix coef = phin.completeOrthogonalDecomposition().solve(fn);
  c.projected = (fn - phin * coef).norm() > 1e-6 * std::max(1.0, fn.norm());
  if (c.projected) {
    c.epsilon = suboptimality(ctx.graph, rep, &ctx.phi).epsilon;
  } else {
    c.epsilon = loss - ctx.optimum.min_loss;
  }
  c.lhs = clf_loss(ctx.model, rep, ctx.ystar);
  c.rhs = 32.0 * static_cast<double>(ctx.label_dim) * std::max(0.0, c.epsilon);
  c.holds = c.lhs <= c.rhs + 1e-6;
  return c;
}

// ---- experiment ----

std::vector<ArmSpec> default_arms() {
  TrainConfig base;
  base.optimizer = OptimizerKind::adam;
  base.lr = 1e-3;
  base.beta1 = 0.9;
  base.beta2 = 0.99;
  base.batch_size = 512;
  base.epochs = 500;
  base.loss = LossKind::spectral_sampled;
  base.eval_every = 25;

  std::vector<ArmSpec> arms;
  arms.push_back({"linear", ModelKind::linear, base});
  TrainConfig simclr = base;
  simclr.loss = LossKind::simclr;
  simclr.temperature = 0.5;
  arms.push_back({"linear_simclr", ModelKind::linear, simclr});
  TrainConfig adam_wd = base;
  adam_wd.weight_decay = 0.004;
  arms.push_back({"mlp2_adam_wd", ModelKind::mlp2, adam_wd});
  TrainConfig sgd = base;
  sgd.optimizer = OptimizerKind::sgd;
  sgd.lr = 0.01;
  sgd.grad_clip_norm = 5.0;
  arms.push_back({"mlp2_sgd", ModelKind::mlp2, sgd});
  TrainConfig orth = adam_wd;
  orth.label_orthogonal = true;
  orth.memory_bank_size = 10240;
  arms.push_back({"mlp2_label_orth", ModelKind::mlp2, orth});
  return arms;
}

namespace {

class HypercubeTask : public ContrastiveTask {
 public:
  HypercubeTask(const HypercubeInstance& inst, const Matrix& inputs, const Vector& labels)
      : inst_(inst), inputs_(inputs), labels_(labels) {}

  Index n_train() const override { return inputs_.rows(); }
  int train_label(Index i) const override { return labels_[i] > 0 ? 1 : -1; }

  void augment_pairs(std::span<const Index> idx, Rng& rng, PairBatch& out) const override {
    const Index b = static_cast<Index>(idx.size());
    const Index k = inst_.cfg.label_dim;
    const Index tail = inst_.cfg.dim - k;
    out.left.dense.resize(b, inst_.cfg.dim);
    out.right.dense.resize(b, inst_.cfg.dim);
    for (Index r = 0; r < b; ++r) {
      const auto src = inputs_.row(idx[static_cast<std::size_t>(r)]);
      const double t1 = 1.0 - uniform01(rng);
      const double t2 = 1.0 - uniform01(rng);
      out.left.dense.row(r) = src;
      out.right.dense.row(r) = src;
      out.left.dense.row(r).tail(tail) *= t1;
      out.right.dense.row(r).tail(tail) *= t2;
    }
  }

 private:
  const HypercubeInstance& inst_;
  const Matrix& inputs_;
  const Vector& labels_;
};

// Inputs expanded onto a midpoint tau grid: row i*Q+q is augmentation q of input i.
Matrix tau_grid(const Matrix& inputs, Index k, Index q_levels) {
  Matrix out(inputs.rows() * q_levels, inputs.cols());
  const Index tail = inputs.cols() - k;
  for (Index i = 0; i < inputs.rows(); ++i) {
    for (Index q = 0; q < q_levels; ++q) {
      const double tau = (static_cast<double>(q) + 0.5) / static_cast<double>(q_levels);
      out.row(i * q_levels + q) = inputs.row(i);
      out.row(i * q_levels + q).tail(tail) *= tau;
    }
  }
  return out;
}

Matrix block_means(const Matrix& rows, Index block) {
  Matrix out(rows.rows() / block, rows.cols());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = rows.middleRows(i * block, block).colwise().mean();
  return out;
}

// Representation as seen by the loss: normalized for cosine SimCLR,
// class-centered for label-orthogonal training.
struct RepView {
  bool normalize = false;
  bool center = false;
  Vector mean_pos, mean_neg;

  Matrix apply(Matrix z, const Vector& row_labels) const {
    if (normalize) {
      for (Index r = 0; r < z.rows(); ++r) {
        const double n = z.row(r).norm();
        if (n > 0.0) z.row(r) /= n;
      }
    }
    if (center) {
      for (Index r = 0; r < z.rows(); ++r) z.row(r) -= (row_labels[r] > 0 ? mean_pos : mean_neg).transpose();
    }
    return z;
  }
};

Vector repeat_each(const Vector& v, Index times) {
  Vector out(v.size() * times);
  for (Index i = 0; i < v.size(); ++i) out.segment(i * times, times).setConstant(v[i]);
  return out;
}

}  // namespace

std::vector<ArmSummary> ExperimentResult::summary() const {
  std::vector<ArmSummary> out;
  for (const auto& r : rows) {
    bool seen = false;
    for (const auto& s : out) seen = seen || s.arm == r.arm;
    if (seen) continue;
    std::vector<double> losses, accs;
    for (const auto& q : rows) {
      if (q.arm != r.arm) continue;
      losses.push_back(q.final_cont_loss);
      accs.push_back(q.final_acc);
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& se) {
      const double n = static_cast<double>(v.size());
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    };
    ArmSummary s;
    s.arm = r.arm;
    s.n = static_cast<Index>(losses.size());
    stats(losses, s.loss_mean, s.loss_se);
    stats(accs, s.acc_mean, s.acc_se);
    out.push_back(s);
  }
  return out;
}

const ArmSummary* ExperimentResult::find(const std::vector<ArmSummary>& s, const std::string& arm) const {
  for (const auto& a : s)
    if (a.arm == arm) return &a;
  return nullptr;
}

void ExperimentResult::write_summary_csv(std::ostream& out) const {
  out << "arm,seed,final_cont_loss,final_acc\n";
  for (const auto& r : rows)
    out << r.arm << ',' << r.seed << ',' << format_double(r.final_cont_loss) << ',' << format_double(r.final_acc)
        << '\n';
}

void ExperimentResult::write_aggregate_csv(std::ostream& out) const {
  out << "arm,n,loss_mean,loss_ci95,acc_mean,acc_ci95\n";
  for (const auto& s : summary()) {
    out << s.arm << ',' << s.n << ',' << format_double(s.loss_mean) << ',' << format_double(1.96 * s.loss_se) << ','
        << format_double(s.acc_mean) << ',' << format_double(1.96 * s.acc_se) << '\n';
  }
}

ExperimentResult run_experiment(const HypercubeExperiment& exp, const ProgressFn& progress) {
  require(exp.n_train >= 1 && exp.n_val >= 1, "n_train and n_val must be positive");
  require(exp.analysis_inputs >= 4, "analysis subsample needs at least 4 inputs");
  require(exp.eval_tau_levels >= 1 && exp.analysis_tau_levels >= 1, "tau grids need at least one level");
  const Index D = exp.cfg.dim;
  const Index k = exp.cfg.label_dim;
  const Index qe = exp.eval_tau_levels;
  ExperimentResult result;

  for (std::uint64_t seed : exp.seeds) {
    const HypercubeInstance inst = make_instance(D, k, derive_seed(seed, 1));
    Rng data_rng(derive_seed(seed, 2));
    const Matrix x_train = inst.sample_inputs(exp.n_train, data_rng);
    const Matrix x_val = inst.sample_inputs(exp.n_val, data_rng);
    const Vector y_train = inst.labels(x_train);
    const Vector y_val = inst.labels(x_val);

    HypercubeConfig acfg = inst.cfg;
    acfg.tau_levels = exp.analysis_tau_levels;
    const AugmentationModel analysis = discretize_hypercube(acfg, exp.analysis_inputs, derive_seed(seed, 3));
    const Vector y_analysis = inst.labels(*analysis.input_points());
    const Vector y_analysis_aug = repeat_each(y_analysis, exp.analysis_tau_levels);

    const Index n_fit = std::min(exp.probe_fit_size, exp.n_train);
    const Matrix fit_grid = tau_grid(x_train.topRows(n_fit), k, qe);
    const Vector y_fit = y_train.head(n_fit);
    const Vector y_fit_aug = repeat_each(y_fit, qe);
    const Matrix val_grid = tau_grid(x_val, k, qe);

    HypercubeTask task(inst, x_train, y_train);
    Index best_arm = -1;
    double best_loss = std::numeric_limits<double>::infinity();
    Matrix best_analysis_rep;

    for (std::size_t a = 0; a < exp.arms.size(); ++a) {
      const ArmSpec& arm = exp.arms[a];
      TrainConfig tc = arm.train;
      tc.seed = derive_seed(seed, 10 + a);
      Rng init_rng(derive_seed(seed, 1000 + a));
      TrainableRep rep = arm.kind == ModelKind::mlp2 ? TrainableRep::mlp2(D, exp.hidden, exp.rep_dim, init_rng)
                                                     : TrainableRep::linear(D, exp.rep_dim, init_rng);
      require(arm.kind != ModelKind::bow, "bag-of-words arms are not defined on the hypercube");

      Matrix last_analysis_rep;
      auto evaluate = [&](const TrainableRep& r) {
        RepView view;
        view.normalize = tc.loss == LossKind::simclr && tc.normalize;
        Matrix fit_z = view.apply(r.forward_batch(Batch{fit_grid, {}}), y_fit_aug);
        if (tc.label_orthogonal) {
          // Class means from the probe-fit augmentations stand in for the bank.
          view.mean_pos = Vector::Zero(exp.rep_dim);
          view.mean_neg = Vector::Zero(exp.rep_dim);
          Index np = 0, nn = 0;
          for (Index i = 0; i < fit_z.rows(); ++i) {
            if (y_fit_aug[i] > 0) {
              view.mean_pos += fit_z.row(i).transpose();
              ++np;
            } else {
              view.mean_neg += fit_z.row(i).transpose();
              ++nn;
            }
          }
          if (np) view.mean_pos /= static_cast<double>(np);
          if (nn) view.mean_neg /= static_cast<double>(nn);
          view.center = true;
          RepView shift;
          shift.center = true;
          shift.mean_pos = view.mean_pos;
          shift.mean_neg = view.mean_neg;
          fit_z = shift.apply(std::move(fit_z), y_fit_aug);
        }
        const Matrix val_z = view.apply(r.forward_batch(Batch{val_grid, {}}), repeat_each(y_val, qe));
        const Matrix an_z = view.apply(r.forward_batch(Batch{*analysis.aug_points(), {}}), y_analysis_aug);
        const Matrix fbar_fit = block_means(fit_z, qe);
        const Matrix fbar_val = block_means(val_z, qe);
        const LinearProbe probe = fit_probe(fbar_fit, y_fit, Vector::Ones(n_fit), exp.probe);
        EvalResult e;
        e.downstream_acc = 1.0 - probe_error(probe_scores(probe, fbar_val), y_val, Vector::Ones(y_val.size()));
        e.cont_val_loss = spectral_loss_population(analysis, RepMatrix(an_z));
        last_analysis_rep = an_z;
        return e;
      };

      ArmResult ar;
      ar.arm = arm.name;
      ar.seed = seed;
      ar.trajectory = train_contrastive(task, rep, tc, evaluate);
      ar.final_cont_loss = ar.trajectory.rows.back().cont_val_loss;
      ar.final_acc = ar.trajectory.rows.back().downstream_acc;
      if (ar.final_cont_loss < best_loss) {
        best_loss = ar.final_cont_loss;
        best_arm = static_cast<Index>(a);
        best_analysis_rep = last_analysis_rep;
      }
      if (progress) progress(ar);
      result.rows.push_back(std::move(ar));
    }

    if (exp.spurious_arm && best_arm >= 0) {
      const RepMatrix collapsed = collapse_to_means(analysis, RepMatrix(best_analysis_rep));
      LabelFunction ystar(LabelDomain::inputs, y_analysis);
      Rng search_rng(derive_seed(seed, 4));
      const PermutationSearch ps =
          search_bad_permutation(analysis, collapsed, ystar, exp.spurious_budget, search_rng);
      const RepMatrix spurious = permute_embeddings(analysis, collapsed, ps.perm);

      // Probe fitted on even inputs, scored on odd inputs.
      const Matrix fbar = averaged_representation(analysis, spurious);
      const Index n = fbar.rows();
      const Index half = (n + 1) / 2;
      Matrix f_fit(half, fbar.cols()), f_test(n - half, fbar.cols());
      Vector l_fit(half), l_test(n - half);
      for (Index i = 0; i < n; ++i) {
        if (i % 2 == 0) {
          f_fit.row(i / 2) = fbar.row(i);
          l_fit[i / 2] = y_analysis[i];
        } else {
          f_test.row(i / 2) = fbar.row(i);
          l_test[i / 2] = y_analysis[i];
        }
      }
      const LinearProbe probe = fit_probe(f_fit, l_fit, Vector::Ones(half), exp.probe);
      ArmResult sr;
      sr.arm = "spurious";
      sr.seed = seed;
      sr.final_cont_loss = spectral_loss_population(analysis, spurious);
      sr.final_acc = 1.0 - probe_error(probe_scores(probe, f_test), l_test, Vector::Ones(l_test.size()));
      sr.trajectory.rows.push_back({0, sr.final_cont_loss, sr.final_acc, 0.0});
      if (progress) progress(sr);
      result.rows.push_back(std::move(sr));
    }
  }
  return result;
}

}  // namespace contrastlab
