#pragma once

// Shared error types and deterministic RNG utilities.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace setemb {

// ---------------------------------------------------------------------------
// Errors. Every throwing operation in the library uses one of these so the
// CLI can map error classes to exit codes.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad argument values (out-of-range ids, dimension mismatches).
struct ArgumentError : Error {
  using Error::Error;
};

/// Malformed input files; message carries file and line number.
struct ParseError : Error {
  using Error::Error;
};

/// Structurally invalid data (labels on unknown nodes, missing types).
struct ValidationError : Error {
  using Error::Error;
};

/// Invalid configuration (degenerate splits, bad hyperparameters).
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failure (non-convergence, non-finite values in kernels).
struct NumericError : Error {
  using Error::Error;
};

/// Training blew up (non-finite loss or parameters).
struct TrainingError : Error {
  using Error::Error;
};

/// A guard on combinatorial blow-up was exceeded.
struct ResourceError : Error {
  using Error::Error;
};

/// API misuse (stale caches, calls out of sequence).
struct UsageError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. All randomness in the library flows through this so
// results are reproducible bit-for-bit from a seed, independent of the
// standard library's distribution implementations.
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // modulo bias is negligible for the n used here (n << 2^64)
    return gen_() % n;
  }

  /// Standard normal via Box-Muller.
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double m = std::sqrt(-2.0 * std::log(u1));
    spare_ = m * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return m * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a over raw bytes; used for content hashes of cached artifacts.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace setemb
