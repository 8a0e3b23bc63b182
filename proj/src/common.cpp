#include "contrastlab/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace contrastlab {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

double standard_normal(Rng& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DiscreteSampler::DiscreteSampler(const Vector& weights) {
  cdf_.resize(static_cast<std::size_t>(weights.size()));
  double acc = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf_[static_cast<std::size_t>(i)] = acc;
  }
  require(acc > 0.0, "sampler weights sum to zero");
}

std::size_t DiscreteSampler::operator()(Rng& rng) const {
  const double u = uniform01(rng) * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  if (i >= cdf_.size()) {
    // u rounded up to the total; take the last entry with positive weight.
    i = cdf_.size() - 1;
    while (i > 0 && cdf_[i] == cdf_[i - 1]) --i;
  }
  return i;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw InputError("cannot parse number '" + std::string(token) + "' for " +
                     std::string(what));
  }
  return v;
}

long long parse_int(std::string_view token, std::string_view what) {
  long long v = 0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw InputError("cannot parse integer '" + std::string(token) + "' for " +
                     std::string(what));
  }
  return v;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw InputError(message);
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError(what + " contains non-finite values");
}

}  // namespace contrastlab
