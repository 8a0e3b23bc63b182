#include "contrastlab/augmodel.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace contrastlab {

namespace {

constexpr double kRenormTolerance = 1e-9;
constexpr double kKeepTolerance = 1e-12;

void check_probability_vector(Vector& v, const std::string& what) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw InputError(what + " entry " + std::to_string(i) + " is not finite");
    if (v[i] < 0.0) throw InputError(what + " entry " + std::to_string(i) + " is negative");
  }
  const double s = v.sum();
  if (s == 0.0) throw InputError(what + " sums to zero");
  if (std::abs(s - 1.0) > kRenormTolerance) {
    throw InputError(what + " sums to " + format_double(s) + ", not 1");
  }
  // Sums already within the invariant tolerance are kept verbatim so that a
  // store/load round trip is value-exact.
  if (std::abs(s - 1.0) > kKeepTolerance) v /= s;
}

}  // namespace

AugmentationModel::AugmentationModel(Vector input_marginal, Matrix cond,
                                     std::optional<Matrix> aug_points,
                                     std::optional<Matrix> input_points)
    : input_marginal_(std::move(input_marginal)),
      cond_(std::move(cond)),
      aug_points_(std::move(aug_points)),
      input_points_(std::move(input_points)) {
  require(cond_.rows() >= 1 && cond_.cols() >= 1, "model needs at least one input and one augmentation");
  require(input_marginal_.size() == cond_.rows(),
          "input marginal has " + std::to_string(input_marginal_.size()) + " entries but cond has " +
              std::to_string(cond_.rows()) + " rows");
  check_probability_vector(input_marginal_, "input marginal");
  for (Index i = 0; i < cond_.rows(); ++i) {
    Vector row = cond_.row(i).transpose();
    check_probability_vector(row, "cond row " + std::to_string(i));
    cond_.row(i) = row.transpose();
  }
  if (aug_points_) {
    require(aug_points_->rows() == cond_.cols(), "augmentation points must have one row per augmentation");
  }
  if (input_points_) {
    require(input_points_->rows() == cond_.rows(), "input points must have one row per input");
  }
  aug_marginal_ = cond_.transpose() * input_marginal_;
}

Matrix AugmentationModel::joint() const { return input_marginal_.asDiagonal() * cond_; }

AugmentationModel build_finite_model(Vector input_marginal, Matrix cond,
                                     std::optional<Matrix> aug_points,
                                     std::optional<Matrix> input_points) {
  return AugmentationModel(std::move(input_marginal), std::move(cond), std::move(aug_points),
                           std::move(input_points));
}

void HypercubeConfig::validate() const {
  require(label_dim >= 1 && label_dim < dim, "hypercube needs 1 <= k < D");
  require(tau_levels >= 1, "hypercube needs Q >= 1");
  if (classifier_w.size() > 0) {
    require(classifier_w.size() == label_dim, "classifier_w must have length k");
    require(classifier_w.cwiseAbs().maxCoeff() > 0.0, "classifier_w must be non-zero");
  }
}

AugmentationModel discretize_hypercube(const HypercubeConfig& cfg, Index n_inputs,
                                       std::uint64_t seed) {
  cfg.validate();
  require(n_inputs >= 1, "hypercube needs n_inputs >= 1");
  const Index D = cfg.dim;
  const Index k = cfg.label_dim;
  const Index Q = cfg.tau_levels;
  if (D < 62) {
    require(n_inputs <= (Index{1} << D), "n_inputs exceeds 2^D");
  }
  Rng rng(seed);
  Matrix inputs(n_inputs, D);
  if (D <= 20) {
    std::vector<std::uint32_t> ids(std::size_t{1} << D);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::uint32_t>(i);
    for (Index i = 0; i < n_inputs; ++i) {
      std::size_t j = static_cast<std::size_t>(i) + uniform_index(rng, ids.size() - static_cast<std::size_t>(i));
      std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
      for (Index c = 0; c < D; ++c) inputs(i, c) = ((ids[static_cast<std::size_t>(i)] >> c) & 1U) ? 1.0 : -1.0;
    }
  } else {
    std::set<std::vector<signed char>> seen;
    std::vector<signed char> v(static_cast<std::size_t>(D));
    Index filled = 0;
    while (filled < n_inputs) {
      for (auto& c : v) c = (rng() >> 63) ? 1 : -1;
      if (!seen.insert(v).second) continue;
      for (Index c = 0; c < D; ++c) inputs(filled, c) = v[static_cast<std::size_t>(c)];
      ++filled;
    }
  }
  const Index M = n_inputs * Q;
  Matrix cond = Matrix::Zero(n_inputs, M);
  Matrix points(M, D);
  for (Index i = 0; i < n_inputs; ++i) {
    for (Index q = 0; q < Q; ++q) {
      const Index x = i * Q + q;
      const double tau = (static_cast<double>(q) + 0.5) / static_cast<double>(Q);
      cond(i, x) = 1.0 / static_cast<double>(Q);
      points.row(x).head(k) = inputs.row(i).head(k);
      points.row(x).tail(D - k) = tau * inputs.row(i).tail(D - k);
    }
  }
  Vector marginal = Vector::Constant(n_inputs, 1.0 / static_cast<double>(n_inputs));
  return AugmentationModel(std::move(marginal), std::move(cond), std::move(points), std::move(inputs));
}

AugmentationModel tag_with_identity(const AugmentationModel& model) {
  const Index N = model.n_inputs();
  const Index M = model.n_augs();
  const Matrix base = model.aug_points() ? *model.aug_points() : Matrix(Matrix::Identity(M, M));
  const Index p = base.cols();
  auto tag = [N](Index i) { return N > 1 ? static_cast<double>(i) / static_cast<double>(N - 1) : 0.0; };

  Index count = 0;
  for (Index i = 0; i < N; ++i)
    for (Index x = 0; x < M; ++x)
      if (model.cond()(i, x) > 0.0) ++count;

  Matrix cond = Matrix::Zero(N, count);
  Matrix points(count, p + 1);
  Index next = 0;
  for (Index i = 0; i < N; ++i) {
    for (Index x = 0; x < M; ++x) {
      if (model.cond()(i, x) <= 0.0) continue;
      cond(i, next) = model.cond()(i, x);
      points.row(next).head(p) = base.row(x);
      points(next, p) = tag(i);
      ++next;
    }
  }
  std::optional<Matrix> inputs;
  if (model.input_points()) {
    const Matrix& ip = *model.input_points();
    Matrix tagged(N, ip.cols() + 1);
    tagged.leftCols(ip.cols()) = ip;
    for (Index i = 0; i < N; ++i) tagged(i, ip.cols()) = tag(i);
    inputs = std::move(tagged);
  }
  return AugmentationModel(model.input_marginal(), std::move(cond), std::move(points), std::move(inputs));
}

bool is_disjoint(const AugmentationModel& model) {
  const Matrix& c = model.cond();
  for (Index x = 0; x < c.cols(); ++x) {
    int owners = 0;
    for (Index i = 0; i < c.rows(); ++i)
      if (c(i, x) > 0.0 && ++owners > 1) return false;
  }
  return true;
}

std::vector<Index> augmentation_owner(const AugmentationModel& model) {
  const Matrix& c = model.cond();
  std::vector<Index> owner(static_cast<std::size_t>(c.cols()), -1);
  for (Index x = 0; x < c.cols(); ++x) {
    for (Index i = 0; i < c.rows(); ++i) {
      if (c(i, x) <= 0.0) continue;
      if (owner[static_cast<std::size_t>(x)] >= 0) {
        throw InputError("model is not disjoint: augmentation " + std::to_string(x) +
                         " has positive mass under inputs " +
                         std::to_string(owner[static_cast<std::size_t>(x)]) + " and " + std::to_string(i));
      }
      owner[static_cast<std::size_t>(x)] = i;
    }
  }
  return owner;
}

PairSampler::PairSampler(const AugmentationModel& model)
    : inputs_(model.input_marginal()), augs_(model.aug_marginal()) {
  rows_.reserve(static_cast<std::size_t>(model.n_inputs()));
  for (Index i = 0; i < model.n_inputs(); ++i) rows_.emplace_back(model.cond().row(i).transpose());
}

Index PairSampler::input(Rng& rng) const { return static_cast<Index>(inputs_(rng)); }

Index PairSampler::augment(Index input, Rng& rng) const {
  return static_cast<Index>(rows_[static_cast<std::size_t>(input)](rng));
}

std::pair<Index, Index> PairSampler::similar_pair(Rng& rng) const {
  const Index i = input(rng);
  const Index a = augment(i, rng);
  const Index b = augment(i, rng);
  return {a, b};
}

Index PairSampler::negative(Rng& rng) const { return static_cast<Index>(augs_(rng)); }

std::pair<Index, Index> sample_similar_pair(const PairSampler& sampler, Rng& rng) {
  return sampler.similar_pair(rng);
}

Index sample_negative(const PairSampler& sampler, Rng& rng) { return sampler.negative(rng); }

// ---- serialization ----

void save_model(const AugmentationModel& model, std::ostream& out) {
  const bool has_points = model.aug_points().has_value();
  out << "augmodel v1 " << model.n_inputs() << ' ' << model.n_augs() << ' ' << (has_points ? 1 : 0) << '\n';
  for (Index i = 0; i < model.n_inputs(); ++i) out << format_double(model.input_marginal()[i]) << '\n';
  for (Index i = 0; i < model.n_inputs(); ++i)
    for (Index x = 0; x < model.n_augs(); ++x)
      if (model.cond()(i, x) != 0.0) out << i << ' ' << x << ' ' << format_double(model.cond()(i, x)) << '\n';
  auto write_block = [&out](const char* tag, const Matrix& m) {
    out << tag << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
      out << '\n';
    }
  };
  if (has_points) {
    write_block("points", *model.aug_points());
    if (model.input_points()) write_block("input_points", *model.input_points());
  }
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank line split into tokens; false at EOF.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      tokens.clear();
      std::istringstream ss(line);
      std::string t;
      while (ss >> t) tokens.push_back(t);
      if (!tokens.empty()) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("line " + std::to_string(line_no_) + ": " + msg);
  }
  int line() const { return line_no_; }

 private:
  std::istream& in_;
  int line_no_ = 0;
};

Matrix read_block(LineReader& reader, Index rows, Index cols) {
  Matrix m(rows, cols);
  std::vector<std::string> tok;
  for (Index r = 0; r < rows; ++r) {
    if (!reader.next(tok)) reader.fail("unexpected end of file in point block");
    if (static_cast<Index>(tok.size()) != cols) reader.fail("expected " + std::to_string(cols) + " coordinates");
    for (Index c = 0; c < cols; ++c) {
      try {
        m(r, c) = parse_double(tok[static_cast<std::size_t>(c)], "coordinate");
      } catch (const InputError& e) {
        reader.fail(e.what());
      }
    }
  }
  return m;
}

}  // namespace

AugmentationModel load_model(std::istream& in) {
  LineReader reader(in);
  std::vector<std::string> tok;
  if (!reader.next(tok) || tok.size() != 5 || tok[0] != "augmodel" || tok[1] != "v1") {
    reader.fail("expected header 'augmodel v1 N M has_points'");
  }
  Index N = 0, M = 0;
  bool has_points = false;
  try {
    N = static_cast<Index>(parse_int(tok[2], "N"));
    M = static_cast<Index>(parse_int(tok[3], "M"));
    const long long hp = parse_int(tok[4], "has_points");
    if (hp != 0 && hp != 1) reader.fail("has_points must be 0 or 1");
    has_points = hp == 1;
  } catch (const InputError& e) {
    reader.fail(e.what());
  }
  if (N < 1 || M < 1) reader.fail("N and M must be positive");

  Vector marginal(N);
  for (Index i = 0; i < N; ++i) {
    if (!reader.next(tok) || tok.size() != 1) reader.fail("expected one marginal value per line");
    try {
      marginal[i] = parse_double(tok[0], "input marginal");
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
  }

  Matrix cond = Matrix::Zero(N, M);
  std::optional<Matrix> aug_points, input_points;
  bool more = reader.next(tok);
  while (more && tok[0] != "points") {
    if (tok.size() != 3) reader.fail("expected triple 'i j p'");
    long long i = 0, j = 0;
    double p = 0.0;
    try {
      i = parse_int(tok[0], "input index");
      j = parse_int(tok[1], "augmentation index");
      p = parse_double(tok[2], "probability");
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
    if (i < 0 || i >= N || j < 0 || j >= M) reader.fail("index out of range");
    cond(i, j) = p;
    more = reader.next(tok);
  }
  if (more) {
    if (!has_points) reader.fail("point block present but header has has_points = 0");
    if (tok.size() != 2) reader.fail("expected 'points P'");
    Index p = 0;
    try {
      p = static_cast<Index>(parse_int(tok[1], "point dimension"));
    } catch (const InputError& e) {
      reader.fail(e.what());
    }
    if (p < 1) reader.fail("point dimension must be positive");
    aug_points = read_block(reader, M, p);
    if (reader.next(tok)) {
      if (tok.size() != 2 || tok[0] != "input_points") reader.fail("expected 'input_points P'");
      Index q = 0;
      try {
        q = static_cast<Index>(parse_int(tok[1], "input point dimension"));
      } catch (const InputError& e) {
        reader.fail(e.what());
      }
      if (q < 1) reader.fail("point dimension must be positive");
      input_points = read_block(reader, N, q);
      if (reader.next(tok)) reader.fail("trailing content");
    }
  } else if (has_points) {
    reader.fail("header has has_points = 1 but no point block");
  }
  return AugmentationModel(std::move(marginal), std::move(cond), std::move(aug_points), std::move(input_points));
}

}  // namespace contrastlab
