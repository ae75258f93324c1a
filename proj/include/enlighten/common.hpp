#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace enlighten {

// Error categories surfaced across the C API boundary.
enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Corrupt = 3,
  ShapeMismatch = 4,
  Numeric = 5,
  NotFound = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

using Rng = std::mt19937_64;

// Bounded draw in [0, n). Plain modulo keeps the stream identical across
// standard library implementations; the bias is irrelevant at our ranges.
inline int64_t rng_below(Rng& rng, int64_t n) {
  return static_cast<int64_t>(rng() % static_cast<uint64_t>(n));
}

// Stable per-(seed, epoch, item) stream so sample-level augmentation draws
// do not depend on worker scheduling.
inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(master);
  mix(a);
  mix(b);
  return h;
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace enlighten
