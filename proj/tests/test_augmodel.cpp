#include "doctest.h"
#include "oracles.hpp"

#include "contrastlab/augmodel.hpp"

#include <set>
#include <sstream>

using namespace contrastlab;

TEST_CASE("common: seeds and samplers") {
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1) != derive_seed(8, 1));

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(uniform_index(rng, 5) < 5u);
  }

  Vector w(3);
  w << 0.2, 0.0, 0.8;
  DiscreteSampler s(w);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 100000; ++i) ++counts[s(rng)];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[0] / 1e5 - 0.2) < 5.0 * std::sqrt(0.16 / 1e5));

  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123, 1e300}) {
    CHECK(parse_double(format_double(x), "x") == x);
  }
  CHECK_THROWS_AS(parse_double("1.5x", "value"), InputError);
  CHECK_THROWS_AS(parse_int("3.0", "count"), InputError);
}

TEST_CASE("augmodel: marginals of the small examples") {
  const auto one = build_finite_model(Vector::Ones(1), Matrix::Ones(1, 1));
  CHECK(one.aug_marginal()[0] == 1.0);

  const auto id2 = build_finite_model(Vector::Constant(2, 0.5), Matrix::Identity(2, 2));
  CHECK(id2.aug_marginal()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(id2.aug_marginal()[1] == doctest::Approx(0.5).epsilon(1e-15));

  Matrix c(3, 4);
  c << 0.5, 0.5, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  const auto m3 = build_finite_model(Vector::Constant(3, 1.0 / 3.0), c);
  const double hand[4] = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0};
  for (int x = 0; x < 4; ++x) CHECK(std::abs(m3.aug_marginal()[x] - hand[x]) < 1e-15);
}

TEST_CASE("augmodel: marginal sums to one on random models") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_model(2 + t % 6, 3 + t % 9, rng);
    CHECK(std::abs(m.aug_marginal().sum() - 1.0) < 1e-10);
    CHECK((m.aug_marginal() - oracle::aug_marginal(m.input_marginal(), m.cond())).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("augmodel: validation") {
  Matrix c = Matrix::Identity(2, 2);
  c(0, 1) = -0.1;
  c(0, 0) = 1.1;
  CHECK_THROWS_WITH_AS(build_finite_model(Vector::Constant(2, 0.5), c), doctest::Contains("negative"), InputError);

  Matrix z = Matrix::Identity(2, 2);
  z(1, 1) = 0.0;
  CHECK_THROWS_WITH_AS(build_finite_model(Vector::Constant(2, 0.5), z), doctest::Contains("cond row 1"), InputError);

  // Off by less than 1e-9: renormalized silently.
  Matrix near = Matrix::Identity(2, 2);
  near(0, 0) = 1.0 + 5e-10;
  const auto m = build_finite_model(Vector::Constant(2, 0.5), near);
  CHECK(std::abs(m.cond().row(0).sum() - 1.0) < 1e-15);

  Matrix far = Matrix::Identity(2, 2);
  far(0, 0) = 1.0 + 1e-6;
  CHECK_THROWS_AS(build_finite_model(Vector::Constant(2, 0.5), far), InputError);
  CHECK_THROWS_AS(build_finite_model(Vector::Constant(3, 1.0 / 3.0), Matrix::Identity(2, 2)), InputError);
}

TEST_CASE("augmodel: discretized hypercube") {
  HypercubeConfig cfg;
  cfg.dim = 2;
  cfg.label_dim = 1;
  cfg.tau_levels = 1;
  const auto tiny = discretize_hypercube(cfg, 2, 0);
  REQUIRE(tiny.n_augs() == 2);
  for (Index i = 0; i < 2; ++i) {
    const auto& xbar = *tiny.input_points();
    const auto& pts = *tiny.aug_points();
    CHECK(pts(i, 0) == xbar(i, 0));
    CHECK(pts(i, 1) == 0.5 * xbar(i, 1));
  }

  cfg.dim = 50;
  cfg.label_dim = 10;
  cfg.tau_levels = 4;
  const auto m = discretize_hypercube(cfg, 64, 5);
  CHECK(m.n_augs() == 256);
  CHECK(is_disjoint(m));
  const auto& xbar = *m.input_points();
  const auto& pts = *m.aug_points();
  for (Index i = 0; i < m.n_inputs(); ++i) {
    int owned = 0;
    for (Index x = 0; x < m.n_augs(); ++x) {
      if (m.cond()(i, x) == 0.0) continue;
      ++owned;
      CHECK(m.cond()(i, x) == 0.25);
      for (Index c = 0; c < 10; ++c) CHECK(pts(x, c) == xbar(i, c));
      for (Index c = 0; c < 50; ++c) CHECK((pts(x, c) > 0.0) == (xbar(i, c) > 0.0));
    }
    CHECK(owned == 4);
  }
  // Inputs are drawn without replacement.
  std::set<std::vector<double>> rows;
  for (Index i = 0; i < m.n_inputs(); ++i) {
    Vector r = xbar.row(i).transpose();
    rows.insert(std::vector<double>(r.data(), r.data() + r.size()));
  }
  CHECK(static_cast<Index>(rows.size()) == m.n_inputs());

  // Midpoint grid: trailing scales are (q - 0.5) / Q.
  std::set<double> scales;
  for (Index x = 0; x < 4; ++x) scales.insert(std::abs(pts(x, 20)));
  CHECK(scales == std::set<double>{0.125, 0.375, 0.625, 0.875});

  cfg.tau_levels = 0;
  CHECK_THROWS_AS(discretize_hypercube(cfg, 4, 0), InputError);
  cfg.tau_levels = 2;
  CHECK_THROWS_AS(discretize_hypercube(cfg, 0, 0), InputError);
}

TEST_CASE("augmodel: disjointness and identity tagging") {
  CHECK(is_disjoint(build_finite_model(Vector::Constant(3, 1.0 / 3.0), Matrix::Identity(3, 3))));
  Matrix shared(2, 2);
  shared << 0.5, 0.5, 1.0, 0.0;
  const auto overlap = build_finite_model(Vector::Constant(2, 0.5), shared);
  CHECK_FALSE(is_disjoint(overlap));

  const auto tagged = tag_with_identity(overlap);
  CHECK(is_disjoint(tagged));
  CHECK(tagged.n_augs() == 3);  // one per positive (input, augmentation) cell
  Matrix full(2, 2);
  full << 0.5, 0.5, 0.5, 0.5;
  CHECK(tag_with_identity(build_finite_model(Vector::Constant(2, 0.5), full)).n_augs() == 4);

  Rng rng(4);
  for (int t = 0; t < 20; ++t) CHECK(is_disjoint(tag_with_identity(oracle::random_model(3, 5, rng))));

  // N = 1: same probabilities, one extra constant coordinate.
  Matrix pts(2, 1);
  pts << 0.25, -1.0;
  const auto single = build_finite_model(Vector::Ones(1), (Matrix(1, 2) << 0.3, 0.7).finished(), pts);
  const auto ts = tag_with_identity(single);
  REQUIRE(ts.aug_points()->cols() == 2);
  CHECK(ts.aug_points()->col(0) == pts.col(0));
  CHECK(ts.aug_points()->col(1).isConstant(ts.aug_points()->coeff(0, 1)));
  CHECK(ts.cond() == single.cond());
}

TEST_CASE("augmodel: pair sampling frequencies") {
  Rng rng(99);
  {
    const auto id = build_finite_model(Vector::Constant(4, 0.25), Matrix::Identity(4, 4));
    PairSampler s(id);
    for (int i = 0; i < 1000; ++i) {
      const auto [a, b] = sample_similar_pair(s, rng);
      CHECK(a == b);
    }
  }
  {
    Matrix c = Matrix::Zero(2, 4);
    c << 0.5, 0.5, 0, 0, 0, 0, 0.5, 0.5;
    PairSampler s(build_finite_model(Vector::Constant(2, 0.5), c));
    for (int i = 0; i < 1000; ++i) {
      const auto [a, b] = sample_similar_pair(s, rng);
      CHECK(a / 2 == b / 2);
    }
  }
  Matrix c(3, 4);
  c << 0.5, 0.5, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  const Vector pi = Vector::Constant(3, 1.0 / 3.0);
  const auto m = build_finite_model(pi, c);
  PairSampler s(m);
  const Matrix exact = oracle::similar_joint(pi, c);
  Matrix counts = Matrix::Zero(4, 4);
  Vector neg = Vector::Zero(4);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const auto [a, b] = sample_similar_pair(s, rng);
    counts(a, b) += 1.0;
    neg[sample_negative(s, rng)] += 1.0;
  }
  for (Index a = 0; a < 4; ++a) {
    for (Index b = 0; b < 4; ++b) {
      const double p = exact(a, b);
      CHECK(std::abs(counts(a, b) / n - p) <= 3.0 * std::sqrt(p * (1.0 - p) / n) + 1e-12);
    }
    const double q = m.aug_marginal()[a];
    CHECK(std::abs(neg[a] / n - q) <= 5.0 * std::sqrt(q * (1.0 - q) / n));
  }
}

TEST_CASE("augmodel: empirical similar-pair law on random models") {
  Rng rng(5);
  for (int t = 0; t < 3; ++t) {
    const auto m = oracle::random_model(3 + t, 6 + 3 * t, rng);
    const Matrix exact = oracle::similar_joint(m.input_marginal(), m.cond());
    PairSampler s(m);
    Matrix counts = Matrix::Zero(m.n_augs(), m.n_augs());
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const auto [a, b] = s.similar_pair(rng);
      counts(a, b) += 1.0;
    }
    for (Index a = 0; a < m.n_augs(); ++a)
      for (Index b = 0; b < m.n_augs(); ++b) {
        const double p = exact(a, b);
        CHECK(std::abs(counts(a, b) / n - p) <= 5.0 * std::sqrt(p * (1.0 - p) / n) + 1e-12);
      }
  }
}

TEST_CASE("augmodel: save and load round trip") {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const Index n = 2 + t % 4, m = 3 + t % 5;
    Matrix c = oracle::random_cond(n, m, rng);
    Matrix pts = Matrix::Random(m, 3);
    std::optional<Matrix> points;
    if (t % 2) points = pts;
    const auto model = build_finite_model(oracle::random_simplex(n, rng), c, points);
    std::stringstream ss;
    save_model(model, ss);
    const auto back = load_model(ss);
    CHECK(back.input_marginal() == model.input_marginal());
    CHECK(back.cond() == model.cond());
    CHECK(back.aug_points().has_value() == model.aug_points().has_value());
    if (model.aug_points()) CHECK(*back.aug_points() == *model.aug_points());
  }
}

TEST_CASE("augmodel: loader errors carry line numbers") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    CHECK_THROWS_WITH_AS(load_model(in), doctest::Contains(needle.c_str()), InputError);
  };
  fails_with("augmodel v2 1 1 0\n", "line 1");
  fails_with("augmodel v1 2 2 0\n0.5\nabc\n", "line 3");
  fails_with("augmodel v1 2 2 0\n0.5\n0.5\n0 0 1\n1 5 1\n", "line 5");
  fails_with("augmodel v1 2 2 0\n0.5\n0.5\n0 0 1\n", "cond row 1");
  fails_with("augmodel v1 1 1 0\n1\n0 0 -1\n", "negative");
}
