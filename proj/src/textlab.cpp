#include "contrastlab/textlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace contrastlab {

void Corpus::validate() const {
  require(vocab_size >= 1, "corpus vocabulary is empty");
  require(n_classes >= 1, "corpus has no classes");
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& d = docs[i];
    if (d.tokens.empty()) throw InputError("document " + std::to_string(i) + " is empty");
    if (d.label < 0 || d.label >= n_classes)
      throw InputError("document " + std::to_string(i) + " has label outside [0, n_classes)");
    for (int t : d.tokens)
      if (t < 0 || t >= vocab_size)
        throw InputError("document " + std::to_string(i) + " has token " + std::to_string(t) +
                         " outside the vocabulary");
  }
}

TextAugmentation parse_text_augmentation(const std::string& name) {
  if (name == "drop") return TextAugmentation::drop;
  if (name == "drop_permute") return TextAugmentation::drop_permute;
  if (name == "split") return TextAugmentation::split;
  if (name == "split_full") return TextAugmentation::split_full;
  throw InputError("unknown augmentation '" + name + "' (drop, drop_permute, split, split_full)");
}

std::string to_string(TextAugmentation kind) {
  switch (kind) {
    case TextAugmentation::drop: return "drop";
    case TextAugmentation::drop_permute: return "drop_permute";
    case TextAugmentation::split: return "split";
    case TextAugmentation::split_full: return "split_full";
  }
  return "?";
}

namespace {

TokenDoc keep_random_subset(std::span<const int> doc, double p_drop, Rng& rng) {
  const Index len = static_cast<Index>(doc.size());
  // The small offset keeps e.g. 0.7 * 10 from rounding up to 8.
  Index keep = static_cast<Index>(std::ceil((1.0 - p_drop) * static_cast<double>(len) - 1e-9));
  keep = std::clamp<Index>(keep, 1, len);
  std::vector<Index> idx(static_cast<std::size_t>(len));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < keep; ++i) {
    const Index j = i + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(len - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(keep));
  std::sort(idx.begin(), idx.end());
  TokenDoc out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(doc[static_cast<std::size_t>(i)]);
  return out;
}

TokenDoc left_half(std::span<const int> doc) {
  const std::size_t n = (doc.size() + 1) / 2;
  return TokenDoc(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(n));
}

TokenDoc right_half(std::span<const int> doc) {
  const std::size_t start = doc.size() / 2;
  return TokenDoc(doc.begin() + static_cast<std::ptrdiff_t>(start), doc.end());
}

}  // namespace

TokenDoc augment(std::span<const int> doc, TextAugmentation kind, double p_drop, Rng& rng) {
  require(!doc.empty(), "cannot augment an empty document");
  require(p_drop >= 0.0 && p_drop < 1.0, "p_drop must lie in [0, 1)");
  switch (kind) {
    case TextAugmentation::drop: return keep_random_subset(doc, p_drop, rng);
    case TextAugmentation::drop_permute: {
      TokenDoc out = keep_random_subset(doc, p_drop, rng);
      shuffle(out, rng);
      return out;
    }
    case TextAugmentation::split: return uniform_index(rng, 2) == 0 ? left_half(doc) : right_half(doc);
    case TextAugmentation::split_full: {
      switch (uniform_index(rng, 3)) {
        case 0: return TokenDoc(doc.begin(), doc.end());
        case 1: return left_half(doc);
        default: return right_half(doc);
      }
    }
  }
  throw InputError("unknown augmentation kind");
}

Corpus read_corpus(std::istream& in, Index max_len, Index vocab_size) {
  require(max_len >= 1, "max_len must be positive");
  Corpus c;
  std::string line;
  Index line_no = 0;
  int max_token = -1, max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = [&] { return "corpus line " + std::to_string(line_no) + ": "; };
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError(where() + "expected label<TAB>tokens");
    Document d;
    try {
      d.label = static_cast<int>(parse_int(line.substr(0, tab), "label"));
    } catch (const InputError& e) {
      throw InputError(where() + e.what());
    }
    if (d.label < 0) throw InputError(where() + "negative label");
    std::istringstream toks(line.substr(tab + 1));
    std::string tok;
    while (toks >> tok) {
      long long t = 0;
      try {
        t = parse_int(tok, "token id");
      } catch (const InputError& e) {
        throw InputError(where() + e.what());
      }
      if (t < 0) throw InputError(where() + "negative token id");
      if (static_cast<Index>(d.tokens.size()) < max_len) d.tokens.push_back(static_cast<int>(t));
    }
    if (d.tokens.empty()) throw InputError(where() + "document has no tokens");
    for (int t : d.tokens) max_token = std::max(max_token, t);
    max_label = std::max(max_label, d.label);
    c.docs.push_back(std::move(d));
  }
  if (c.docs.empty()) throw InputError("corpus has no documents");
  c.vocab_size = vocab_size > 0 ? vocab_size : static_cast<Index>(max_token) + 1;
  c.n_classes = static_cast<Index>(max_label) + 1;
  c.validate();
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, Index max_len, Index vocab_size) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file " + path.string());
  return read_corpus(in, max_len, vocab_size);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.docs) {
    out << d.label << '\t';
    for (std::size_t i = 0; i < d.tokens.size(); ++i) out << (i ? " " : "") << d.tokens[i];
    out << '\n';
  }
}

Corpus synthetic_corpus(const SyntheticCorpusSpec& spec) {
  require(spec.classes >= 2, "synthetic corpus needs at least two classes");
  require(spec.docs_per_class >= 1 && spec.doc_len >= 1, "docs_per_class and doc_len must be positive");
  require(spec.vocab >= spec.classes + 1, "vocabulary too small for the class blocks");
  require(spec.signal >= 0.0 && spec.signal <= 1.0, "signal must lie in [0, 1]");
  const Index block = spec.vocab / (spec.classes + 1);
  const Index shared_start = block * spec.classes;
  const Index shared_size = spec.vocab - shared_start;
  Rng rng(spec.seed);
  Corpus c;
  c.vocab_size = spec.vocab;
  c.n_classes = spec.classes;
  for (Index i = 0; i < spec.docs_per_class; ++i) {
    for (Index cls = 0; cls < spec.classes; ++cls) {
      Document d;
      d.label = static_cast<int>(cls);
      for (Index t = 0; t < spec.doc_len; ++t) {
        const bool own = uniform01(rng) < spec.signal;
        const Index tok = own ? cls * block + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(block)))
                              : shared_start + static_cast<Index>(
                                                   uniform_index(rng, static_cast<std::uint64_t>(shared_size)));
        d.tokens.push_back(static_cast<int>(tok));
      }
      c.docs.push_back(std::move(d));
    }
  }
  return c;
}

TrainConfig text_train_defaults() {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::adam;
  cfg.lr = 1e-3;
  cfg.batch_size = 256;
  cfg.epochs = 100;
  cfg.grad_clip_norm = 2.5;
  cfg.loss = LossKind::simclr;
  cfg.temperature = 1.0;
  cfg.normalize = true;
  cfg.patience = 10;
  return cfg;
}

Index MulticlassProbe::predict(const Eigen::Ref<const Vector>& feature) const {
  const Index dim = weights.rows() - 1;
  Vector s = weights.topRows(dim).transpose() * feature + weights.row(dim).transpose();
  Index best = 0;
  for (Index c = 1; c < s.size(); ++c)
    if (s[c] > s[best]) best = c;
  return best;
}

double MulticlassProbe::accuracy(const Matrix& features, std::span<const int> labels) const {
  require(static_cast<Index>(labels.size()) == features.rows(), "label count differs from feature rows");
  if (labels.empty()) return 0.0;
  Index hits = 0;
  for (Index i = 0; i < features.rows(); ++i)
    if (predict(features.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

MulticlassProbe fit_multiclass_probe(const Matrix& features, std::span<const int> labels, Index n_classes) {
  require(static_cast<Index>(labels.size()) == features.rows(), "label count differs from feature rows");
  require(n_classes >= 1, "need at least one class");
  Matrix design(features.rows(), features.cols() + 1);
  design.leftCols(features.cols()) = features;
  design.col(features.cols()).setOnes();
  Matrix targets = Matrix::Constant(features.rows(), n_classes, -1.0);
  for (Index i = 0; i < features.rows(); ++i) targets(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  MulticlassProbe p;
  p.weights = design.completeOrthogonalDecomposition().solve(targets);
  return p;
}

namespace {

class TextTask : public ContrastiveTask {
 public:
  TextTask(const Corpus& corpus, const std::vector<Index>& members, TextAugmentation aug, double p_drop)
      : corpus_(corpus), members_(members), aug_(aug), p_drop_(p_drop) {}

  Index n_train() const override { return static_cast<Index>(members_.size()); }
  int train_label(Index i) const override { return doc(i).label; }

  void augment_pairs(std::span<const Index> idx, Rng& rng, PairBatch& out) const override {
    out.left.tokens.resize(idx.size());
    out.right.tokens.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& d = doc(idx[r]).tokens;
      out.left.tokens[r] = augment(d, aug_, p_drop_, rng);
      out.right.tokens[r] = augment(d, aug_, p_drop_, rng);
    }
  }

 private:
  const Document& doc(Index i) const { return corpus_.docs[static_cast<std::size_t>(members_[static_cast<std::size_t>(i)])]; }

  const Corpus& corpus_;
  const std::vector<Index>& members_;
  TextAugmentation aug_;
  double p_drop_;
};

Batch docs_batch(const Corpus& corpus, const std::vector<Index>& members) {
  Batch b;
  b.tokens.reserve(members.size());
  for (Index i : members) b.tokens.push_back(corpus.docs[static_cast<std::size_t>(i)].tokens);
  return b;
}

std::vector<int> docs_labels(const Corpus& corpus, const std::vector<Index>& members) {
  std::vector<int> out;
  out.reserve(members.size());
  for (Index i : members) out.push_back(corpus.docs[static_cast<std::size_t>(i)].label);
  return out;
}

}  // namespace

TextResult run_text_experiment(const Corpus& corpus, const TextExperiment& exp) {
  corpus.validate();
  exp.train.validate();
  require(exp.rep_dim >= 1, "rep_dim must be positive");
  require(exp.val_fraction > 0.0 && exp.val_fraction < 1.0, "val_fraction must lie in (0, 1)");
  require(exp.p_drop >= 0.0 && exp.p_drop < 1.0, "p_drop must lie in [0, 1)");
  const Index n = static_cast<Index>(corpus.docs.size());
  Index n_val = static_cast<Index>(std::llround(exp.val_fraction * static_cast<double>(n)));
  n_val = std::clamp<Index>(n_val, 2, n - 2);
  require(n >= 4, "corpus needs at least four documents");

  Rng split_rng(derive_seed(exp.train.seed, 200));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  shuffle(order, split_rng);
  const std::vector<Index> val(order.begin(), order.begin() + n_val);
  const std::vector<Index> train(order.begin() + n_val, order.end());

  // Fixed augmented validation pairs.
  PairBatch val_pairs;
  {
    Rng val_rng(derive_seed(exp.train.seed, 201));
    TextTask val_task(corpus, val, exp.aug, exp.p_drop);
    std::vector<Index> all(val.size());
    std::iota(all.begin(), all.end(), Index{0});
    val_task.augment_pairs(all, val_rng, val_pairs);
  }
  const Batch train_docs = docs_batch(corpus, train);
  const Batch val_docs = docs_batch(corpus, val);
  const std::vector<int> train_y = docs_labels(corpus, train);
  const std::vector<int> val_y = docs_labels(corpus, val);
  const LossSpec spec = exp.train.loss_spec();

  auto evaluate = [&](const TrainableRep& rep) {
    const Matrix zl = rep.forward_batch(val_pairs.left);
    const Matrix zr = rep.forward_batch(val_pairs.right);
    // Chunks of about batch_size rows; none smaller than two.
    const Index chunks = std::max<Index>(1, n_val / exp.train.batch_size);
    double total = 0.0;
    for (Index c = 0; c < chunks; ++c) {
      const Index lo = c * n_val / chunks;
      const Index hi = (c + 1) * n_val / chunks;
      const double v = contrastive_loss(zl.middleRows(lo, hi - lo), zr.middleRows(lo, hi - lo), spec, false).loss;
      total += v * static_cast<double>(hi - lo);
    }
    EvalResult e;
    e.cont_val_loss = total / static_cast<double>(n_val);
    const MulticlassProbe probe = fit_multiclass_probe(rep.forward_batch(train_docs), train_y, corpus.n_classes);
    e.downstream_acc = probe.accuracy(rep.forward_batch(val_docs), val_y);
    return e;
  };

  Rng init_rng(derive_seed(exp.train.seed, 202));
  TrainableRep rep = TrainableRep::bow(corpus.vocab_size, exp.rep_dim, init_rng);
  TextTask task(corpus, train, exp.aug, exp.p_drop);
  TextResult out;
  out.trajectory = train_contrastive(task, rep, exp.train, evaluate);
  out.final_acc = out.trajectory.rows.back().downstream_acc;
  out.n_train = static_cast<Index>(train.size());
  out.n_val = n_val;
  return out;
}

}  // namespace contrastlab
