#include "contrastlab/spurious.hpp"

#include "contrastlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace contrastlab {

namespace {

void require_uniform(const AugmentationModel& model) {
  const Vector& w = model.input_marginal();
  require(w.maxCoeff() - w.minCoeff() <= 1e-12, "permutation invariance needs a uniform input marginal");
}

void require_permutation(const Permutation& perm, Index n) {
  require(static_cast<Index>(perm.size()) == n, "permutation has " + std::to_string(perm.size()) +
                                                    " entries, expected " + std::to_string(n));
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index p : perm) {
    require(p >= 0 && p < n && !seen[static_cast<std::size_t>(p)], "not a permutation of 0..N-1");
    seen[static_cast<std::size_t>(p)] = 1;
  }
}

}  // namespace

RepMatrix collapse_to_means(const AugmentationModel& model, const RepMatrix& rep) {
  const std::vector<Index> owner = augmentation_owner(model);
  const Matrix means = averaged_representation(model, rep);
  Matrix out = rep.values;
  for (Index x = 0; x < model.n_augs(); ++x) {
    const Index i = owner[static_cast<std::size_t>(x)];
    if (i >= 0) out.row(x) = means.row(i);
  }
  return RepMatrix(std::move(out));
}

RepMatrix permute_embeddings(const AugmentationModel& model, const RepMatrix& rep, const Permutation& perm,
                             PermuteMode mode) {
  require(rep.rows() == model.n_augs(), "representation must have one row per augmentation");
  const std::vector<Index> owner = augmentation_owner(model);
  require_uniform(model);
  require_permutation(perm, model.n_inputs());
  Matrix out = rep.values;

  if (mode == PermuteMode::collapsed) {
    const Matrix means = averaged_representation(model, rep);
    for (Index x = 0; x < model.n_augs(); ++x) {
      const Index i = owner[static_cast<std::size_t>(x)];
      if (i >= 0) out.row(x) = means.row(perm[static_cast<std::size_t>(i)]);
    }
    return RepMatrix(std::move(out));
  }

  // Support of each input in increasing augmentation order.
  std::vector<std::vector<Index>> support(static_cast<std::size_t>(model.n_inputs()));
  for (Index x = 0; x < model.n_augs(); ++x) {
    const Index i = owner[static_cast<std::size_t>(x)];
    if (i >= 0) support[static_cast<std::size_t>(i)].push_back(x);
  }
  const auto& ref = support.front();
  for (Index i = 0; i < model.n_inputs(); ++i) {
    const auto& s = support[static_cast<std::size_t>(i)];
    require(s.size() == ref.size(), "seed-map mode needs equal augmentation counts per input");
    for (std::size_t w = 0; w < s.size(); ++w) {
      require(std::abs(model.cond()(i, s[w]) - model.cond()(0, ref[w])) <= 1e-12,
              "seed-map mode needs identical conditional distributions across inputs");
    }
  }
  for (Index i = 0; i < model.n_inputs(); ++i) {
    const auto& dst = support[static_cast<std::size_t>(i)];
    const auto& src = support[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    for (std::size_t w = 0; w < dst.size(); ++w) out.row(dst[w]) = rep.values.row(src[w]);
  }
  return RepMatrix(std::move(out));
}

namespace {

// Least-squares probe fitted on (v_j, z_j): scores are H z with H the hat
// matrix of the per-input embeddings.
// C(n, k) <= limit, without overflow.
bool placements_within(Index n, Index k, Index limit) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (Index i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > static_cast<double>(limit) + 0.5) return false;
  }
  return true;
}

class SwapSearch {
 public:
  SwapSearch(const Matrix& embeddings, Index budget) : budget_(budget) {
    const RangeBasis r = column_range(embeddings);
    hat_ = r.basis * r.basis.transpose();
  }

  Index evaluations() const { return evaluations_; }
  bool exhausted() const { return evaluations_ >= budget_; }

  double error(const Vector& z, const Vector& s) const {
    double e = 0.0;
    for (Index j = 0; j < z.size(); ++j) {
      const double m = z[j] * s[j];
      e += m < 0.0 ? 1.0 : (m == 0.0 ? 0.5 : 0.0);
    }
    return e / static_cast<double>(z.size());
  }

  // First-improvement swaps over cross-label pairs in random order, until a
  // full pass finds nothing or `limit` evaluations are spent. `holder[j]` is
  // the input whose permuted image is j; swaps are mirrored into `perm`.
  double climb(Vector& z, Permutation& perm, std::vector<Index>& holder, Index limit, Rng& rng) {
    const Index n = z.size();
    const Index stop = std::min(budget_, evaluations_ + limit);
    Vector s = hat_ * z;
    double current = error(z, s);
    Vector trial(n);
    std::vector<Index> pos, neg;
    std::vector<std::uint64_t> order;
    bool improved = true;
    while (improved && evaluations_ < stop) {
      improved = false;
      pos.clear();
      neg.clear();
      for (Index j = 0; j < n; ++j) (z[j] > 0 ? pos : neg).push_back(j);
      order.resize(pos.size() * neg.size());
      std::iota(order.begin(), order.end(), std::uint64_t{0});
      shuffle(order, rng);
      for (std::uint64_t id : order) {
        if (evaluations_ >= stop) break;
        ++evaluations_;
        const Index j = pos[id / neg.size()];
        const Index k = neg[id % neg.size()];
        // z_j: +1 -> -1, z_k: -1 -> +1
        trial = s - 2.0 * hat_.col(j) + 2.0 * hat_.col(k);
        z[j] = -1.0;
        z[k] = 1.0;
        const double e = error(z, trial);
        if (e > current) {
          const Index a = holder[static_cast<std::size_t>(j)];
          const Index b = holder[static_cast<std::size_t>(k)];
          std::swap(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
          std::swap(holder[static_cast<std::size_t>(j)], holder[static_cast<std::size_t>(k)]);
          s = trial;
          current = e;
          improved = true;
          break;
        }
        z[j] = 1.0;
        z[k] = -1.0;
      }
    }
    return current;
  }

  // Best placement of n_plus labels over all subsets, first in
  // lexicographic order of the +1 mask (mask ordered high to low).
  double enumerate(Index n, Index n_plus, Vector& best_z) {
    std::vector<char> mask(static_cast<std::size_t>(n), 0);
    std::fill(mask.begin(), mask.begin() + n_plus, 1);
    Vector z(n);
    double best = -1.0;
    do {
      for (Index j = 0; j < n; ++j) z[j] = mask[static_cast<std::size_t>(j)] ? 1.0 : -1.0;
      ++evaluations_;
      const double e = error(z, hat_ * z);
      if (e > best) {
        best = e;
        best_z = z;
      }
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return best;
  }

 private:
  Matrix hat_;
  Index budget_;
  Index evaluations_ = 0;
};

}  // namespace

PermutationSearch search_bad_permutation(const AugmentationModel& model, const RepMatrix& collapsed,
                                         const LabelFunction& ystar, Index budget, Rng& rng, Index restarts) {
  require(budget >= 1, "search budget must be at least 1");
  require(restarts >= 1, "need at least one restart");
  require(ystar.domain() == LabelDomain::inputs && ystar.size() == model.n_inputs(),
          "expected labels on the inputs");
  require_uniform(model);
  (void)augmentation_owner(model);  // disjointness check
  const Index n = model.n_inputs();
  const Matrix means = averaged_representation(model, collapsed);

  PermutationSearch out;
  const double plus = static_cast<double>((ystar.values().array() > 0).count()) / static_cast<double>(n);
  out.unbalanced = !ystar.balanced();
  out.majority_baseline = std::min(plus, 1.0 - plus);

  SwapSearch search(means, budget);
  Permutation best_perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) best_perm[static_cast<std::size_t>(i)] = i;
  double best_err = -1.0;
  const Index n_plus = static_cast<Index>((ystar.values().array() > 0).count());
  if (placements_within(n, n_plus, budget)) {
    Vector z;
    best_err = search.enumerate(n, n_plus, z);
    // Inputs of each label go, in index order, to the positions carrying it.
    std::vector<Index> pos_slots, neg_slots;
    for (Index j = 0; j < n; ++j) (z[j] > 0 ? pos_slots : neg_slots).push_back(j);
    std::size_t pi = 0, ni = 0;
    for (Index i = 0; i < n; ++i)
      best_perm[static_cast<std::size_t>(i)] = ystar[i] > 0 ? pos_slots[pi++] : neg_slots[ni++];
    out.exhaustive = true;
    out.restarts_run = 1;
  }
  for (Index r = 0; r < restarts && !out.exhaustive && !search.exhausted(); ++r) {
    // Equal share of what is left for each remaining restart.
    const Index share = std::max<Index>(1, (budget - search.evaluations()) / (restarts - r));
    Permutation perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    if (r > 0) shuffle(perm, rng);
    std::vector<Index> holder(static_cast<std::size_t>(n));
    Vector z(n);
    for (Index i = 0; i < n; ++i) {
      const Index j = perm[static_cast<std::size_t>(i)];
      holder[static_cast<std::size_t>(j)] = i;
      z[j] = ystar[i];
    }
    const double e = search.climb(z, perm, holder, share, rng);
    ++out.restarts_run;
    if (e > best_err) {
      best_err = e;
      best_perm = perm;
    }
  }
  out.evaluations = search.evaluations();
  out.identity_error = clf_loss(model, collapsed, ystar);
  const double found = clf_loss(model, permute_embeddings(model, collapsed, best_perm), ystar);
  if (found >= out.identity_error) {
    out.perm = std::move(best_perm);
    out.probe_error = found;
  } else {
    out.perm.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out.perm[static_cast<std::size_t>(i)] = i;
    out.probe_error = out.identity_error;
  }
  return out;
}

void write_permutation(const Permutation& perm, std::ostream& out) {
  for (std::size_t i = 0; i < perm.size(); ++i) out << (i ? " " : "") << perm[i];
  out << '\n';
}

Permutation read_permutation(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "permutation file is empty");
  Permutation perm;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ') ++end;
    if (end > pos) perm.push_back(static_cast<Index>(parse_int(std::string_view(line).substr(pos, end - pos), "permutation")));
    pos = end;
  }
  require_permutation(perm, static_cast<Index>(perm.size()));
  return perm;
}

}  // namespace contrastlab
