#pragma once

#include "contrastlab/losses.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace contrastlab {

enum class ModelKind { linear, mlp2, bow };

using TokenDoc = std::vector<int>;

// A batch of inputs: dense rows for linear/mlp2, token lists for bow.
struct Batch {
  Matrix dense;
  std::vector<TokenDoc> tokens;
  Index size() const { return tokens.empty() ? dense.rows() : static_cast<Index>(tokens.size()); }
};

// Trainable representation with a flat parameter vector.
// linear: W (in x d)                     f(x) = W^T x
// mlp2:   W1 (in x h), b1, W2 (h x d), b2  f(x) = W2^T relu(W1^T x + b1) + b2
// bow:    E (vocab x d)                  f(doc) = mean of E rows
class TrainableRep {
 public:
  static TrainableRep linear(Index in, Index d, Rng& rng);
  static TrainableRep mlp2(Index in, Index hidden, Index d, Rng& rng);
  static TrainableRep bow(Index vocab, Index d, Rng& rng);
  // All-zero parameters of the given shape.
  static TrainableRep zeros(ModelKind kind, Index in, Index hidden, Index d);

  ModelKind kind() const { return kind_; }
  Index input_dim() const { return in_; }
  Index hidden_dim() const { return hidden_; }
  Index output_dim() const { return out_; }
  Index param_count() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Vector forward(const Vector& x) const;
  Vector forward(std::span<const int> tokens) const;
  // Hidden pre-activations kept by forward_batch for a later backward.
  struct Cache {
    Matrix pre;
  };
  Matrix forward_batch(const Batch& batch, Cache* cache = nullptr) const;

  // Parameter gradient given dL/dZ for the rows of forward_batch(batch).
  // `cache` must come from forward_batch on the same batch and parameters.
  Vector backward(const Batch& batch, const Matrix& grad_out, const Cache* cache = nullptr) const;

 private:
  TrainableRep(ModelKind kind, Index in, Index hidden, Index out);
  void check_tokens(std::span<const int> tokens) const;

  ModelKind kind_;
  Index in_, hidden_, out_;
  Vector params_;
};

enum class LossKind { simclr, spectral_sampled };

struct LossSpec {
  LossKind kind = LossKind::simclr;
  double temperature = 0.5;
  bool normalize = true;
};

// Two views of B examples; row b of `left` pairs with row b of `right`.
struct PairBatch {
  Batch left;
  Batch right;
  std::vector<int> labels;  // per pair, used by label-orthogonal training
};

struct LossValue {
  double loss = 0.0;
  Matrix grad_left;
  Matrix grad_right;
};

// Batch contrastive loss on representations. The spectral form uses the
// in-batch cross pairs (i != j) as negatives; a single pair is its own
// negative.
LossValue contrastive_loss(const Matrix& left, const Matrix& right, const LossSpec& spec,
                           bool with_grad = true);

// Parameter gradient of the batch loss; the loss is written to `loss_out`.
Vector gradients(const TrainableRep& rep, const PairBatch& batch, const LossSpec& spec,
                 double* loss_out = nullptr);

// FIFO memory of (representation, label) used to subtract class means.
class LabelBank {
 public:
  LabelBank(Index capacity, Index dim);
  void push(const Matrix& reps, std::span<const int> labels);
  // reps - mean of the bank's rows with the same label. Rows whose label is
  // absent pass through and increment unadjusted().
  Matrix adjust(const Matrix& reps, std::span<const int> labels);
  std::optional<Vector> class_mean(int label) const;
  Index size() const { return count_; }
  Index unadjusted() const { return unadjusted_; }

 private:
  struct ClassSum {
    Vector sum;
    Index count = 0;
  };
  Index capacity_, dim_;
  Matrix rows_;
  std::vector<int> labels_;
  Index head_ = 0, count_ = 0, unadjusted_ = 0;
  std::vector<std::pair<int, ClassSum>> sums_;
  ClassSum* find(int label);
  const ClassSum* find(int label) const;
};

Matrix label_orthogonal_adjust(const Matrix& reps, std::span<const int> labels, LabelBank& bank);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  Index batch_size = 512;
  Index epochs = 500;
  std::optional<double> grad_clip_norm;
  LossKind loss = LossKind::simclr;
  double temperature = 0.5;
  bool normalize = true;
  std::uint64_t seed = 0;
  bool label_orthogonal = false;
  Index memory_bank_size = 10240;
  Index eval_every = 1;   // evaluate every n epochs (and after the last)
  Index patience = 0;     // early stopping on validation loss; 0 disables
  bool record_wall_time = true;

  void validate() const;
  LossSpec loss_spec() const { return {loss, temperature, normalize}; }
};

// Adam (L2 weight decay added to the gradient) or plain SGD.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, Index n_params);
  void step(Vector& params, const Vector& grad);

 private:
  OptimizerKind kind_;
  double lr_, wd_, b1_, b2_, eps_;
  Vector m_, v_;
  long long t_ = 0;
};

// Source of training pairs.
class ContrastiveTask {
 public:
  virtual ~ContrastiveTask() = default;
  virtual Index n_train() const = 0;
  // Fills `out` with two independent augmentations of each listed example.
  virtual void augment_pairs(std::span<const Index> examples, Rng& rng, PairBatch& out) const = 0;
  virtual int train_label(Index example) const = 0;
};

struct EvalResult {
  double cont_val_loss = 0.0;
  double downstream_acc = 0.0;
};
using EvalHook = std::function<EvalResult(const TrainableRep&)>;

struct TrajectoryRow {
  Index epoch = 0;
  double cont_val_loss = 0.0;
  double downstream_acc = 0.0;
  double wall_seconds = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  Index unadjusted_samples = 0;  // label-orthogonal rows without a bank mean
  bool stopped_early = false;
  void write_csv(std::ostream& out) const;
};

// Epoch 0 is evaluated before any update.
Trajectory train_contrastive(const ContrastiveTask& task, TrainableRep& rep, const TrainConfig& cfg,
                             const EvalHook& eval);

// Least-squares or logistic probe with uniform weights.
LinearProbe fit_linear_probe(const Matrix& features, const Vector& ystar, ProbeMethod method,
                             bool intercept = false);

}  // namespace contrastlab
