#include "contrastlab/trainers.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

namespace contrastlab {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MutVecMap = Eigen::Map<Vector>;

void fill_uniform(Vector& v, Index offset, Index count, double bound, Rng& rng) {
  for (Index i = 0; i < count; ++i) v[offset + i] = (2.0 * uniform01(rng) - 1.0) * bound;
}

}  // namespace

TrainableRep::TrainableRep(ModelKind kind, Index in, Index hidden, Index out)
    : kind_(kind), in_(in), hidden_(hidden), out_(out) {
  require(in >= 1 && out >= 1, "model dimensions must be positive");
  Index n = 0;
  switch (kind) {
    case ModelKind::linear:
      n = in * out;
      break;
    case ModelKind::mlp2:
      require(hidden >= 1, "mlp2 needs a positive hidden width");
      n = in * hidden + hidden + hidden * out + out;
      break;
    case ModelKind::bow:
      n = in * out;
      break;
  }
  params_ = Vector::Zero(n);
}

TrainableRep TrainableRep::zeros(ModelKind kind, Index in, Index hidden, Index d) {
  return TrainableRep(kind, in, kind == ModelKind::mlp2 ? hidden : 0, d);
}

TrainableRep TrainableRep::linear(Index in, Index d, Rng& rng) {
  TrainableRep r(ModelKind::linear, in, 0, d);
  fill_uniform(r.params_, 0, in * d, std::sqrt(6.0 / static_cast<double>(in)), rng);
  return r;
}

TrainableRep TrainableRep::mlp2(Index in, Index hidden, Index d, Rng& rng) {
  TrainableRep r(ModelKind::mlp2, in, hidden, d);
  fill_uniform(r.params_, 0, in * hidden, std::sqrt(6.0 / static_cast<double>(in)), rng);
  fill_uniform(r.params_, in * hidden + hidden, hidden * d, std::sqrt(6.0 / static_cast<double>(hidden)), rng);
  return r;
}

TrainableRep TrainableRep::bow(Index vocab, Index d, Rng& rng) {
  TrainableRep r(ModelKind::bow, vocab, 0, d);
  fill_uniform(r.params_, 0, vocab * d, std::sqrt(3.0 / static_cast<double>(d)), rng);
  return r;
}

void TrainableRep::check_tokens(std::span<const int> tokens) const {
  require(!tokens.empty(), "bag-of-words input needs at least one token");
  for (int t : tokens) require(t >= 0 && t < in_, "token " + std::to_string(t) + " outside vocabulary");
}

Vector TrainableRep::forward(const Vector& x) const {
  require(kind_ != ModelKind::bow, "dense input given to a bag-of-words model");
  Batch b;
  b.dense = x.transpose();
  return forward_batch(b).row(0).transpose();
}

Vector TrainableRep::forward(std::span<const int> tokens) const {
  require(kind_ == ModelKind::bow, "token input given to a dense model");
  check_tokens(tokens);
  ConstMap e(params_.data(), in_, out_);
  Vector z = Vector::Zero(out_);
  for (int t : tokens) z += e.row(t).transpose();
  return z / static_cast<double>(tokens.size());
}

Matrix TrainableRep::forward_batch(const Batch& batch, Cache* cache) const {
  if (kind_ == ModelKind::bow) {
    Matrix z(batch.size(), out_);
    for (Index i = 0; i < batch.size(); ++i) z.row(i) = forward(batch.tokens[static_cast<std::size_t>(i)]).transpose();
    return z;
  }
  require(batch.dense.cols() == in_, "input has " + std::to_string(batch.dense.cols()) +
                                         " coordinates, model expects " + std::to_string(in_));
  if (kind_ == ModelKind::linear) {
    ConstMap w(params_.data(), in_, out_);
    return batch.dense * w;
  }
  const double* p = params_.data();
  ConstMap w1(p, in_, hidden_);
  ConstVecMap b1(p + in_ * hidden_, hidden_);
  ConstMap w2(p + in_ * hidden_ + hidden_, hidden_, out_);
  ConstVecMap b2(p + in_ * hidden_ + hidden_ + hidden_ * out_, out_);
  Matrix pre = (batch.dense * w1).rowwise() + b1.transpose();
  Matrix z = pre.cwiseMax(0.0) * w2;
  if (cache) cache->pre = std::move(pre);
  z.rowwise() += b2.transpose();
  return z;
}

Vector TrainableRep::backward(const Batch& batch, const Matrix& grad_out, const Cache* cache) const {
  Vector grad = Vector::Zero(params_.size());
  if (kind_ == ModelKind::bow) {
    MutMap ge(grad.data(), in_, out_);
    for (Index i = 0; i < batch.size(); ++i) {
      const auto& doc = batch.tokens[static_cast<std::size_t>(i)];
      const double inv = 1.0 / static_cast<double>(doc.size());
      for (int t : doc) ge.row(t) += inv * grad_out.row(i);
    }
    return grad;
  }
  if (kind_ == ModelKind::linear) {
    MutMap gw(grad.data(), in_, out_);
    gw.noalias() = batch.dense.transpose() * grad_out;
    return grad;
  }
  const double* p = params_.data();
  ConstMap w1(p, in_, hidden_);
  ConstVecMap b1(p + in_ * hidden_, hidden_);
  ConstMap w2(p + in_ * hidden_ + hidden_, hidden_, out_);
  Matrix fresh;
  if (!cache) fresh = (batch.dense * w1).rowwise() + b1.transpose();
  const Matrix& pre = cache ? cache->pre : fresh;
  const Matrix h = pre.cwiseMax(0.0);

  double* g = grad.data();
  MutMap gw1(g, in_, hidden_);
  MutVecMap gb1(g + in_ * hidden_, hidden_);
  MutMap gw2(g + in_ * hidden_ + hidden_, hidden_, out_);
  MutVecMap gb2(g + in_ * hidden_ + hidden_ + hidden_ * out_, out_);
  gw2.noalias() = h.transpose() * grad_out;
  gb2 = grad_out.colwise().sum().transpose();
  Matrix gh = grad_out * w2.transpose();
  gh = gh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  gw1.noalias() = batch.dense.transpose() * gh;
  gb1 = gh.colwise().sum().transpose();
  return grad;
}

// ---- losses ----

LossValue contrastive_loss(const Matrix& left, const Matrix& right, const LossSpec& spec, bool with_grad) {
  LossValue out;
  if (spec.kind == LossKind::simclr) {
    SimclrValue v = simclr_loss_and_grad(left, right, spec.temperature, spec.normalize, with_grad);
    out.loss = v.loss;
    out.grad_left = std::move(v.grad_anchors);
    out.grad_right = std::move(v.grad_positives);
    return out;
  }
  const Index B = left.rows();
  require(B >= 1 && right.rows() == B && right.cols() == left.cols(), "views must have equal shape");
  const double b = static_cast<double>(B);
  // Cross terms over all (i, j) through the d x d Grams, minus the i == j part.
  const Vector diag = left.cwiseProduct(right).rowwise().sum();
  const Matrix gl = left.transpose() * left;
  const Matrix gr = right.transpose() * right;
  const double all_sq = gl.cwiseProduct(gr).sum();
  const double diag_sq = diag.squaredNorm();
  const double scale = B == 1 ? 1.0 : 1.0 / (b * (b - 1.0));
  const double neg_sq = B == 1 ? diag_sq : all_sq - diag_sq;
  out.loss = -2.0 / b * diag.sum() + scale * neg_sq;
  if (!std::isfinite(out.loss)) throw NumericError("spectral loss is not finite");
  if (with_grad) {
    if (B == 1) {
      out.grad_left = (-2.0 / b + 2.0 * diag[0]) * right;
      out.grad_right = (-2.0 / b + 2.0 * diag[0]) * left;
    } else {
      out.grad_left = -2.0 / b * right + 2.0 * scale * (left * gr - diag.asDiagonal() * right);
      out.grad_right = -2.0 / b * left + 2.0 * scale * (right * gl - diag.asDiagonal() * left);
    }
  }
  return out;
}

Vector gradients(const TrainableRep& rep, const PairBatch& batch, const LossSpec& spec, double* loss_out) {
  require(batch.left.size() >= 1 && batch.left.size() == batch.right.size(), "batch must be nonempty");
  TrainableRep::Cache cl, cr;
  const Matrix zl = rep.forward_batch(batch.left, &cl);
  const Matrix zr = rep.forward_batch(batch.right, &cr);
  const LossValue v = contrastive_loss(zl, zr, spec, true);
  if (loss_out) *loss_out = v.loss;
  return rep.backward(batch.left, v.grad_left, &cl) + rep.backward(batch.right, v.grad_right, &cr);
}

// ---- label bank ----

LabelBank::LabelBank(Index capacity, Index dim) : capacity_(capacity), dim_(dim) {
  require(capacity >= 1, "memory bank needs positive capacity");
  rows_ = Matrix::Zero(capacity, dim);
  labels_.assign(static_cast<std::size_t>(capacity), 0);
}

LabelBank::ClassSum* LabelBank::find(int label) {
  for (auto& [l, s] : sums_)
    if (l == label) return &s;
  return nullptr;
}

const LabelBank::ClassSum* LabelBank::find(int label) const {
  for (const auto& [l, s] : sums_)
    if (l == label) return &s;
  return nullptr;
}

void LabelBank::push(const Matrix& reps, std::span<const int> labels) {
  require(reps.cols() == dim_ && static_cast<std::size_t>(reps.rows()) == labels.size(),
          "bank push shape mismatch");
  for (Index i = 0; i < reps.rows(); ++i) {
    if (count_ == capacity_) {
      const int old = labels_[static_cast<std::size_t>(head_)];
      ClassSum* s = find(old);
      s->sum -= rows_.row(head_).transpose();
      --s->count;
    } else {
      ++count_;
    }
    rows_.row(head_) = reps.row(i);
    const int l = labels[static_cast<std::size_t>(i)];
    labels_[static_cast<std::size_t>(head_)] = l;
    ClassSum* s = find(l);
    if (!s) {
      sums_.push_back({l, ClassSum{Vector::Zero(dim_), 0}});
      s = &sums_.back().second;
    }
    s->sum += reps.row(i).transpose();
    ++s->count;
    head_ = (head_ + 1) % capacity_;
  }
}

std::optional<Vector> LabelBank::class_mean(int label) const {
  const ClassSum* s = find(label);
  if (!s || s->count == 0) return std::nullopt;
  return s->sum / static_cast<double>(s->count);
}

Matrix LabelBank::adjust(const Matrix& reps, std::span<const int> labels) {
  require(reps.cols() == dim_ && static_cast<std::size_t>(reps.rows()) == labels.size(),
          "bank adjust shape mismatch");
  Matrix out = reps;
  for (Index i = 0; i < reps.rows(); ++i) {
    const auto mean = class_mean(labels[static_cast<std::size_t>(i)]);
    if (mean) {
      out.row(i) -= mean->transpose();
    } else {
      ++unadjusted_;
    }
  }
  return out;
}

Matrix label_orthogonal_adjust(const Matrix& reps, std::span<const int> labels, LabelBank& bank) {
  return bank.adjust(reps, labels);
}

// ---- optimization ----

void TrainConfig::validate() const {
  require(lr >= 0.0, "learning rate must be non-negative");
  require(weight_decay >= 0.0, "weight decay must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(batch_size >= (loss == LossKind::simclr ? 2 : 1), "batch size too small for the loss");
  require(epochs >= 0, "epochs must be non-negative");
  require(temperature > 0.0, "temperature must be positive");
  require(!grad_clip_norm || *grad_clip_norm > 0.0, "gradient clip norm must be positive");
  require(memory_bank_size >= 1, "memory bank size must be positive");
  require(eval_every >= 1, "eval_every must be positive");
  require(patience >= 0, "patience must be non-negative");
}

Optimizer::Optimizer(const TrainConfig& cfg, Index n_params)
    : kind_(cfg.optimizer),
      lr_(cfg.lr),
      wd_(cfg.weight_decay),
      b1_(cfg.beta1),
      b2_(cfg.beta2),
      eps_(cfg.adam_eps),
      m_(Vector::Zero(n_params)),
      v_(Vector::Zero(n_params)) {}

void Optimizer::step(Vector& params, const Vector& grad) {
  const Vector g = wd_ > 0.0 ? Vector(grad + wd_ * params) : grad;
  if (kind_ == OptimizerKind::sgd) {
    params -= lr_ * g;
    return;
  }
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * g;
  v_ = b2_ * v_ + (1.0 - b2_) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "epoch,cont_val_loss,downstream_acc,wall_seconds\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << format_double(r.cont_val_loss) << ',' << format_double(r.downstream_acc) << ','
        << format_double(r.wall_seconds) << '\n';
  }
}

Trajectory train_contrastive(const ContrastiveTask& task, TrainableRep& rep, const TrainConfig& cfg,
                             const EvalHook& eval) {
  cfg.validate();
  require(task.n_train() >= 1, "training set is empty");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!cfg.record_wall_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Rng order_rng(derive_seed(cfg.seed, 101));
  Rng aug_rng(derive_seed(cfg.seed, 102));
  Optimizer opt(cfg, rep.param_count());
  const LossSpec spec = cfg.loss_spec();
  std::optional<LabelBank> bank;
  if (cfg.label_orthogonal) bank.emplace(cfg.memory_bank_size, rep.output_dim());

  Trajectory traj;
  double best_val = std::numeric_limits<double>::infinity();
  Index stale = 0;
  auto record = [&](Index epoch) {
    const EvalResult r = eval(rep);
    traj.rows.push_back({epoch, r.cont_val_loss, r.downstream_acc, elapsed()});
    if (r.cont_val_loss < best_val) {
      best_val = r.cont_val_loss;
      stale = 0;
    } else {
      ++stale;
    }
  };
  record(0);

  const Index n = task.n_train();
  const Index min_batch = spec.kind == LossKind::simclr ? 2 : 1;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  PairBatch batch;
  TrainableRep::Cache cache_l, cache_r;
  std::vector<int> labels;
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    for (Index lo = 0; lo < n; lo += cfg.batch_size) {
      const Index hi = std::min(n, lo + cfg.batch_size);
      if (hi - lo < min_batch) break;
      std::span<const Index> idx(order.data() + lo, static_cast<std::size_t>(hi - lo));
      task.augment_pairs(idx, aug_rng, batch);

      Matrix zl = rep.forward_batch(batch.left, &cache_l);
      Matrix zr = rep.forward_batch(batch.right, &cache_r);
      if (bank) {
        labels.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = task.train_label(idx[i]);
        bank->push(zl, labels);
        zl = bank->adjust(zl, labels);
        zr = bank->adjust(zr, labels);
      }
      const LossValue v = contrastive_loss(zl, zr, spec, true);
      if (!std::isfinite(v.loss)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      Vector grad = rep.backward(batch.left, v.grad_left, &cache_l) + rep.backward(batch.right, v.grad_right, &cache_r);
      if (cfg.grad_clip_norm) {
        const double norm = grad.norm();
        if (norm > *cfg.grad_clip_norm) grad *= *cfg.grad_clip_norm / norm;
      }
      opt.step(rep.params(), grad);
    }
    if (!rep.params().allFinite()) throw NumericError("parameters diverged at epoch " + std::to_string(epoch));
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      record(epoch);
      if (cfg.patience > 0 && stale >= cfg.patience) {
        traj.stopped_early = true;
        break;
      }
    }
  }
  if (bank) traj.unadjusted_samples = bank->unadjusted();
  return traj;
}

LinearProbe fit_linear_probe(const Matrix& features, const Vector& ystar, ProbeMethod method, bool intercept) {
  ProbeSpec spec;
  spec.method = method;
  spec.intercept = intercept;
  return fit_probe(features, ystar, Vector::Ones(features.rows()), spec);
}

}  // namespace contrastlab
