#include "contrastlab/losses.hpp"

#include "contrastlab/linalg.hpp"

#include <cmath>
#include <limits>

namespace contrastlab {

RepMatrix::RepMatrix(Matrix v) : values(std::move(v)) {
  require(values.cols() >= 1, "representation needs d >= 1");
  require_finite(values, "representation");
}

FeatureMatrix::FeatureMatrix(Matrix v) : values(std::move(v)) {
  require(values.cols() >= 1, "feature matrix needs at least one column");
  require_finite(values, "feature matrix");
}

LabelFunction::LabelFunction(LabelDomain domain, Vector values) : domain_(domain), values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i) {
    require(values_[i] == 1.0 || values_[i] == -1.0,
            "label " + std::to_string(i) + " is " + format_double(values_[i]) + ", expected +1 or -1");
  }
}

namespace {

void require_inputs(const LabelFunction& y, const AugmentationModel& model) {
  require(y.domain() == LabelDomain::inputs && y.size() == model.n_inputs(),
          "expected labels on the " + std::to_string(model.n_inputs()) + " inputs");
}

void require_augs(const LabelFunction& g, Index m) {
  require(g.domain() == LabelDomain::augmentations && g.size() == m,
          "expected labels on the " + std::to_string(m) + " augmentations");
}

void require_rows(const Matrix& m, Index rows, const char* what) {
  require(m.rows() == rows, std::string(what) + " has " + std::to_string(m.rows()) + " rows, expected " +
                                std::to_string(rows));
}

}  // namespace

LabelFunction propagate_labels(const AugmentationModel& model, const LabelFunction& ystar) {
  require_inputs(ystar, model);
  const Matrix joint = model.joint();
  Vector g(model.n_augs());
  for (Index x = 0; x < model.n_augs(); ++x) {
    Index best = 0;
    for (Index i = 1; i < model.n_inputs(); ++i)
      if (joint(i, x) > joint(best, x)) best = i;
    g[x] = joint(best, x) > 0.0 ? ystar[best] : 1.0;
  }
  return LabelFunction(LabelDomain::augmentations, std::move(g));
}

// ---- probes ----

double probe_error(const Vector& scores, const Vector& labels, const Vector& weights) {
  double err = 0.0;
  for (Index i = 0; i < scores.size(); ++i) {
    const double margin = labels[i] * scores[i];
    if (margin < 0.0) {
      err += weights[i];
    } else if (margin == 0.0) {
      err += 0.5 * weights[i];
    }
  }
  return err / weights.sum();
}

namespace {

Matrix design_matrix(const Matrix& features, bool intercept) {
  if (!intercept) return features;
  Matrix x(features.rows(), features.cols() + 1);
  x.leftCols(features.cols()) = features;
  x.col(features.cols()).setOnes();
  return x;
}

Vector least_squares_weights(const Matrix& x, const Vector& labels, const Vector& weights) {
  const Vector root = weights.cwiseSqrt();
  const Matrix xs = root.asDiagonal() * x;
  const Vector ys = root.cwiseProduct(labels);
  return pseudo_inverse(xs) * ys;
}

Vector logistic_weights(const Matrix& x, const Vector& labels, const Vector& weights, const ProbeSpec& spec) {
  // Columns rescaled to unit weighted RMS; sign(x w) is unchanged by this.
  const double total = weights.sum();
  Vector scale(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double rms = std::sqrt(weights.dot(x.col(c).cwiseAbs2()) / total);
    scale[c] = rms > 0.0 ? 1.0 / rms : 0.0;
  }
  const Matrix xs = x * scale.asDiagonal();
  const Vector omega = weights / total;

  auto loss_of = [&](const Vector& w) {
    const Vector m = (xs * w).cwiseProduct(labels);
    double l = 0.0;
    for (Index i = 0; i < m.size(); ++i) {
      const double z = -m[i];
      l += omega[i] * (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    }
    return l;
  };

  Vector w = Vector::Zero(x.cols());
  Vector best = w;
  double best_loss = loss_of(w);
  for (int step = 0; step < spec.logistic_steps; ++step) {
    const Vector m = (xs * w).cwiseProduct(labels);
    Vector coeff(m.size());
    for (Index i = 0; i < m.size(); ++i) {
      const double sig = 1.0 / (1.0 + std::exp(m[i]));  // sigmoid(-margin)
      coeff[i] = -omega[i] * labels[i] * sig;
    }
    w -= spec.logistic_lr * (xs.transpose() * coeff);
    const double l = loss_of(w);
    if (l < best_loss) {
      best_loss = l;
      best = w;
    }
  }
  return scale.asDiagonal() * best;
}

}  // namespace

LinearProbe fit_probe(const Matrix& features, const Vector& labels, const Vector& weights,
                      const ProbeSpec& spec) {
  require(features.rows() >= 1, "probe needs at least one example");
  require(labels.size() == features.rows() && weights.size() == features.rows(),
          "probe labels/weights must match feature rows");
  const Matrix x = design_matrix(features, spec.intercept);
  Vector coef = spec.method == ProbeMethod::least_squares ? least_squares_weights(x, labels, weights)
                                                          : logistic_weights(x, labels, weights, spec);
  LinearProbe probe;
  probe.w = coef.head(features.cols());
  probe.bias = spec.intercept ? coef[features.cols()] : 0.0;
  probe.error = probe_error(probe_scores(probe, features), labels, weights);
  return probe;
}

Vector probe_scores(const LinearProbe& probe, const Matrix& features) {
  return (features * probe.w).array() + probe.bias;
}

// ---- spectral loss ----

double spectral_loss_exact(const SpectralGraph& graph, const RepMatrix& rep) {
  const Matrix fn = graph.aug_weights.cwiseSqrt().asDiagonal() * graph.restrict_rows(rep.values);
  const Matrix gram = fn.transpose() * fn;
  const double cross = (fn.transpose() * graph.adjacency_norm * fn).trace();
  return -2.0 * cross + gram.squaredNorm();
}

double spectral_loss_population(const AugmentationModel& model, const RepMatrix& rep) {
  require_rows(rep.values, model.n_augs(), "representation");
  const Matrix fbar = averaged_representation(model, rep);
  const double positive = (model.input_marginal().asDiagonal() * fbar.cwiseAbs2()).sum();
  const Matrix second = rep.values.transpose() * model.aug_marginal().asDiagonal() * rep.values;
  return -2.0 * positive + second.squaredNorm();
}

Estimate spectral_loss_sampled(const AugmentationModel& model, const RepMatrix& rep, Index n_pairs,
                               Rng& rng) {
  require(n_pairs >= 1, "n_pairs must be at least 1");
  require_rows(rep.values, model.n_augs(), "representation");
  PairSampler sampler(model);
  double sum = 0.0, sum_sq = 0.0;
  for (Index s = 0; s < n_pairs; ++s) {
    const auto [x, xp] = sampler.similar_pair(rng);
    const Index a = sampler.negative(rng);
    const Index b = sampler.negative(rng);
    const double pos = rep.values.row(x).dot(rep.values.row(xp));
    const double neg = rep.values.row(a).dot(rep.values.row(b));
    const double t = -2.0 * pos + neg * neg;
    sum += t;
    sum_sq += t * t;
  }
  const double n = static_cast<double>(n_pairs);
  Estimate e;
  e.value = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * e.value * e.value) / (n - 1.0)) : 0.0;
  e.std_error = std::sqrt(var / n);
  return e;
}

// ---- SimCLR ----

SimclrValue simclr_loss_and_grad(const Matrix& anchors, const Matrix& positives, double temperature,
                                 bool normalize, bool with_grad) {
  const Index B = anchors.rows();
  require(B >= 2, "SimCLR batch needs B >= 2");
  require(positives.rows() == B && positives.cols() == anchors.cols(), "SimCLR views must have equal shape");
  require(temperature > 0.0, "temperature must be positive");
  const Index n = 2 * B;
  Matrix u(n, anchors.cols());
  u.topRows(B) = anchors;
  u.bottomRows(B) = positives;

  Vector norms = Vector::Ones(n);
  Matrix z = u;
  if (normalize) {
    for (Index a = 0; a < n; ++a) {
      norms[a] = u.row(a).norm();
      if (norms[a] == 0.0) {
        throw InputError("zero-norm representation at batch row " + std::to_string(a) +
                         " cannot be normalized");
      }
      z.row(a) /= norms[a];
    }
  }

  // s is symmetric, so column a holds row a; column access stays contiguous.
  const Matrix s = (z * z.transpose()) / temperature;
  Matrix grad_t = with_grad ? Matrix::Zero(n, n) : Matrix();  // transpose of dL/ds
  double total = 0.0;
  Vector e(n);
  for (Index a = 0; a < n; ++a) {
    const Index pos = a < B ? a + B : a - B;
    const auto col = s.col(a);
    double top = -std::numeric_limits<double>::infinity();
    if (a > 0) top = col.head(a).maxCoeff();
    if (a + 1 < n) top = std::max(top, col.tail(n - a - 1).maxCoeff());
    e = (col.array() - top).exp();
    e[a] = 0.0;
    const double denom = e.sum();
    total += -col[pos] + top + std::log(denom);
    if (with_grad) {
      grad_t.col(a) = e / denom;
      grad_t(pos, a) -= 1.0;
    }
  }
  SimclrValue out;
  out.loss = total / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw NumericError("SimCLR loss is not finite");
  if (!with_grad) return out;

  grad_t /= static_cast<double>(n);
  Matrix grad_z = grad_t * z;
  grad_z.noalias() += grad_t.transpose() * z;
  grad_z /= temperature;
  if (normalize) {
    for (Index a = 0; a < n; ++a) {
      const double radial = z.row(a).dot(grad_z.row(a));
      grad_z.row(a) = (grad_z.row(a) - radial * z.row(a)) / norms[a];
    }
  }
  out.grad_anchors = grad_z.topRows(B);
  out.grad_positives = grad_z.bottomRows(B);
  return out;
}

double simclr_loss(const Matrix& anchors, const Matrix& positives, double temperature, bool normalize) {
  return simclr_loss_and_grad(anchors, positives, temperature, normalize, false).loss;
}

double simclr_loss(const std::vector<std::pair<Index, Index>>& batch, const RepMatrix& rep,
                   double temperature, bool normalize) {
  const Index B = static_cast<Index>(batch.size());
  Matrix a(B, rep.dim()), p(B, rep.dim());
  for (Index i = 0; i < B; ++i) {
    const auto [x, y] = batch[static_cast<std::size_t>(i)];
    require(x >= 0 && x < rep.rows() && y >= 0 && y < rep.rows(), "batch index out of range");
    a.row(i) = rep.values.row(x);
    p.row(i) = rep.values.row(y);
  }
  return simclr_loss(a, p, temperature, normalize);
}

double simclr_population_loss(const AugmentationModel& model, const RepMatrix& rep, Index n_negatives,
                              double temperature) {
  require(n_negatives >= 1, "need at least one negative");
  require(temperature > 0.0, "temperature must be positive");
  require_rows(rep.values, model.n_augs(), "representation");
  const Index M = model.n_augs();
  const Matrix pair_w = model.cond().transpose() * model.input_marginal().asDiagonal() * model.cond();
  const Matrix sim = rep.values * rep.values.transpose() / temperature;
  const Vector& neg_w = model.aug_marginal();

  double total = 0.0;
  std::vector<Index> tuple(static_cast<std::size_t>(n_negatives));
  for (Index x = 0; x < M; ++x) {
    for (Index xp = 0; xp < M; ++xp) {
      const double w = pair_w(x, xp);
      if (w == 0.0) continue;
      std::fill(tuple.begin(), tuple.end(), 0);
      while (true) {
        double tw = 1.0;
        double denom = std::exp(sim(x, xp));
        for (Index t : tuple) {
          tw *= neg_w[t];
          denom += std::exp(sim(x, t));
        }
        if (tw > 0.0) total += w * tw * (std::log(denom) - sim(x, xp));
        std::size_t pos = 0;
        while (pos < tuple.size() && ++tuple[pos] == M) tuple[pos++] = 0;
        if (pos == tuple.size()) break;
      }
    }
  }
  return total;
}

// ---- downstream quantities ----

Matrix averaged_representation(const AugmentationModel& model, const RepMatrix& rep) {
  require_rows(rep.values, model.n_augs(), "representation");
  return model.cond() * rep.values;
}

double clf_loss(const AugmentationModel& model, const RepMatrix& rep, const LabelFunction& ystar,
                const ProbeSpec& probe) {
  require_inputs(ystar, model);
  const Matrix fbar = averaged_representation(model, rep);
  return fit_probe(fbar, ystar.values(), model.input_marginal(), probe).error;
}

double reg_loss_features(const AugmentationModel& model, const FeatureMatrix& phi, const LabelFunction& g) {
  require_augs(g, model.n_augs());
  require_rows(phi.values, model.n_augs(), "feature matrix");
  const Vector root = model.aug_marginal().cwiseSqrt();
  const Matrix phin = root.asDiagonal() * phi.values;
  const Vector gn = root.cwiseProduct(g.values());
  const RangeBasis range = column_range(phin);
  const Vector resid = gn - range.basis * (range.basis.transpose() * gn);
  return resid.squaredNorm();
}

double inconsistency(const AugmentationModel& model, const LabelFunction& g, const LabelFunction& ystar) {
  require_inputs(ystar, model);
  require_augs(g, model.n_augs());
  const Matrix joint = model.joint();
  double total = 0.0;
  for (Index i = 0; i < joint.rows(); ++i)
    for (Index x = 0; x < joint.cols(); ++x)
      if (g[x] != ystar[i]) total += joint(i, x);
  return total;
}

double alignment_identity(const SpectralGraph& graph, const LabelFunction& g, const LabelFunction& ystar) {
  require(ystar.domain() == LabelDomain::inputs && ystar.size() == graph.n_inputs(),
          "expected labels on the inputs");
  require_augs(g, graph.n_augs_total);
  const Vector yn = graph.input_weights.cwiseSqrt().cwiseProduct(ystar.values());
  const Vector gk = graph.restrict_rows(g.values());
  const Vector gn = graph.aug_weights.cwiseSqrt().cwiseProduct(gk);
  return yn.dot(graph.joint_norm * gn);
}

}  // namespace contrastlab
