#pragma once

#include "contrastlab/trainers.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace contrastlab {

struct Document {
  TokenDoc tokens;
  int label = 0;
};

struct Corpus {
  Index vocab_size = 0;
  Index n_classes = 0;
  std::vector<Document> docs;

  // Tokens in [0, vocab_size), labels in [0, n_classes), no empty documents.
  void validate() const;
};

enum class TextAugmentation { drop, drop_permute, split, split_full };

TextAugmentation parse_text_augmentation(const std::string& name);
std::string to_string(TextAugmentation kind);

// drop keeps ceil((1 - p) L) tokens (at least one) in their original order.
TokenDoc augment(std::span<const int> doc, TextAugmentation kind, double p_drop, Rng& rng);

inline constexpr Index kMaxDocLength = 60;

// One document per line: `label<TAB>space separated token ids`. Documents
// are truncated to `max_len` tokens. Vocabulary and class counts are the
// largest ids seen plus one unless `vocab_size` is given.
Corpus read_corpus(std::istream& in, Index max_len = kMaxDocLength, Index vocab_size = 0);
Corpus load_corpus(const std::filesystem::path& path, Index max_len = kMaxDocLength, Index vocab_size = 0);
void write_corpus(std::ostream& out, const Corpus& corpus);

struct SyntheticCorpusSpec {
  Index classes = 4;
  Index docs_per_class = 250;
  Index vocab = 200;
  Index doc_len = 20;
  // Probability that a token comes from the class block; otherwise it is
  // drawn from the shared block at the end of the vocabulary.
  double signal = 0.5;
  std::uint64_t seed = 0;
};

// The vocabulary is cut into one block per class plus a shared block of the
// same size; class blocks are disjoint.
Corpus synthetic_corpus(const SyntheticCorpusSpec& spec);

struct TextExperiment {
  TextAugmentation aug = TextAugmentation::drop;
  double p_drop = 0.3;
  Index rep_dim = 32;
  double val_fraction = 0.2;
  TrainConfig train;
};

// SimCLR at temperature 1, clip norm 2.5, patience 10, 100 epochs, batch 256.
TrainConfig text_train_defaults();

struct TextResult {
  Trajectory trajectory;
  double final_acc = 0.0;
  Index n_train = 0;
  Index n_val = 0;
};

// Bag-of-words encoder trained contrastively on the training split. The
// validation loss uses a fixed set of augmented validation pairs; accuracy
// is a one-vs-rest least-squares probe on unaugmented documents.
TextResult run_text_experiment(const Corpus& corpus, const TextExperiment& exp);

// Multi-class one-vs-rest least-squares probe with intercept.
struct MulticlassProbe {
  Matrix weights;  // (dim + 1) x classes, last row is the intercept
  Index predict(const Eigen::Ref<const Vector>& feature) const;
  double accuracy(const Matrix& features, std::span<const int> labels) const;
};
MulticlassProbe fit_multiclass_probe(const Matrix& features, std::span<const int> labels, Index n_classes);

}  // namespace contrastlab
