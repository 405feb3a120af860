#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mcdrop/errors.hpp"

namespace mcdrop {

namespace detail {

// SplitMix64 finalizer. Full 64-bit avalanche, invertible.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

// Counter-based random stream: the i-th draw is a pure function of
// (seed, stream_id, i), so sequences replay bit-identically and distinct
// stream ids give independent sequences. Streams are single-owner; hand a
// fork() to anything that needs its own randomness.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_(derive_key(seed, stream_id)), counter_(0), has_spare_(false), spare_(0.0) {}

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  // Uniform in [0,1), 53-bit resolution.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw DomainError("RngStream::next_below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool next_bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw DomainError("RngStream::next_bernoulli: p outside [0,1]");
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return next_uniform() < p;
  }

  // Standard normal via the Marsaglia polar method; the rejected-pair
  // trail is part of the counted sequence, so replay still holds.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_uniform() - 1.0;
      v = 2.0 * next_uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  // Independent child stream. Forking is how concurrent work gets its own
  // randomness without sharing state.
  RngStream fork(std::uint64_t child_id) const {
    RngStream child(0, 0);
    child.key_ = detail::mix64(key_ + detail::mix64(child_id + 1) * detail::kGolden);
    return child;
  }

  // Fisher-Yates over [0, n).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream_id) {
    return detail::mix64(detail::mix64(seed) + detail::mix64(stream_id) * detail::kGolden);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_;
  double spare_;
};

// n Bernoulli(p) draws as 0/1 values. p is the probability of a 1.
inline std::vector<double> bernoulli_vector(RngStream& rng, std::size_t n, double p) {
  if (p < 0.0 || p > 1.0) throw DomainError("bernoulli_vector: p outside [0,1]");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.next_bernoulli(p) ? 1.0 : 0.0;
  return out;
}

}  // namespace mcdrop
