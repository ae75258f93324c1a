#pragma once

#include <algorithm>
#include <cmath>

namespace enlighten::detail {

// Corner-aligned sample grid shared by map resizing and tensor upsampling.
// A single output sample reads the first corner.
inline double src_coord(int i, int osize, int isize) {
  if (osize <= 1 || isize <= 1) return 0.0;
  return static_cast<double>(i) * (isize - 1) / (osize - 1);
}

struct Lerp {
  int lo, hi;
  double t;
};

inline Lerp lerp_at(int i, int osize, int isize) {
  double s = src_coord(i, osize, isize);
  int lo = static_cast<int>(std::floor(s));
  lo = std::clamp(lo, 0, isize - 1);
  int hi = std::min(lo + 1, isize - 1);
  return {lo, hi, s - lo};
}

// Symmetric (edge-including) reflection of an out-of-range index into [0, n).
// Shared by image padding and the tensor-level pad so they agree exactly.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n;
  int j = i % period;
  if (j < 0) j += period;
  return j < n ? j : period - 1 - j;
}

}  // namespace enlighten::detail
