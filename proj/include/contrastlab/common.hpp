#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace contrastlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Malformed input or violated precondition (CLI exit code 1).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during a computation (CLI exit code 2).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// mt19937_64 has a fully specified output sequence, so runs are
// reproducible across standard libraries. Distributions below are
// hand-rolled for the same reason.
using Rng = std::mt19937_64;

// Stream splitting: seed for consumer `stream` derived from `base` by a
// splitmix64 finalizer over base + golden-ratio * (stream + 1).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

double uniform01(Rng& rng);                      // [0, 1), 53 bits
std::size_t uniform_index(Rng& rng, std::size_t n);  // [0, n)
double standard_normal(Rng& rng);

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

// Inverse-CDF sampler over a fixed weight vector.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(const Vector& weights);
  std::size_t operator()(Rng& rng) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

// Shortest decimal string that parses back to the same double.
std::string format_double(double x);
// Strict parse of a full token; throws InputError mentioning `what`.
double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);

void require(bool cond, const std::string& message);
void require_finite(const Matrix& m, const std::string& what);

}  // namespace contrastlab
