#include "enlighten/ahe.hpp"

#include <algorithm>
#include <cmath>

namespace enlighten {

namespace {

double luma_of(const ImageU8& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

int luma_bin(double y) { return std::clamp(static_cast<int>(std::lround(y)), 0, 255); }

// Tile i of n covers [lo, hi) along an axis of extent total.
int tile_edge(int i, int n, int total) {
  return static_cast<int>(static_cast<int64_t>(i) * total / n);
}

// Blend coordinates for one axis: for every pixel position, the surrounding
// pair of tile indices and the interpolation weight between their centers.
struct AxisBlend {
  std::vector<int> lo, hi;
  std::vector<double> t;
};

AxisBlend axis_blend(int n, int total) {
  std::vector<double> centers(n);
  for (int i = 0; i < n; ++i)
    centers[i] = 0.5 * (tile_edge(i, n, total) + tile_edge(i + 1, n, total) - 1);
  AxisBlend b;
  b.lo.resize(total);
  b.hi.resize(total);
  b.t.resize(total);
  int seg = 0;
  for (int p = 0; p < total; ++p) {
    if (p <= centers.front()) {
      b.lo[p] = b.hi[p] = 0;
      b.t[p] = 0.0;
    } else if (p >= centers.back()) {
      b.lo[p] = b.hi[p] = n - 1;
      b.t[p] = 0.0;
    } else {
      while (p > centers[seg + 1]) ++seg;
      b.lo[p] = seg;
      b.hi[p] = seg + 1;
      b.t[p] = (p - centers[seg]) / (centers[seg + 1] - centers[seg]);
    }
  }
  return b;
}

}  // namespace

std::array<uint8_t, 256> equalize_histogram(const std::array<double, 256>& hist,
                                            double clip_limit) {
  require(clip_limit >= 0.0, ErrorCode::InvalidArgument, "clip limit must be nonnegative");
  double total = 0.0;
  int occupied = 0;
  for (double h : hist) {
    require(h >= 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
            "histogram counts must be finite and nonnegative");
    total += h;
    if (h > 0.0) ++occupied;
  }
  require(total > 0.0, ErrorCode::InvalidArgument, "empty histogram");

  std::array<uint8_t, 256> map{};
  if (occupied <= 1) {
    for (int v = 0; v < 256; ++v) map[v] = static_cast<uint8_t>(v);
    return map;
  }

  std::array<double, 256> counts = hist;
  if (clip_limit > 0.0) {
    double cap = clip_limit * total / 256.0;
    double excess = 0.0;
    for (double& c : counts)
      if (c > cap) {
        excess += c - cap;
        c = cap;
      }
    double share = excess / 256.0;
    for (double& c : counts) c += share;
  }

  double cdf = 0.0;
  for (int v = 0; v < 256; ++v) {
    cdf += counts[v];
    map[v] = static_cast<uint8_t>(std::lround(255.0 * cdf / total));
  }
  return map;
}

std::vector<std::array<uint8_t, 256>> ahe_tile_maps(const ImageU8& img, int tiles_x, int tiles_y,
                                                    double clip_limit) {
  require(img.h >= 1 && img.w >= 1, ErrorCode::InvalidArgument, "empty image");
  require(img.px.size() == static_cast<size_t>(img.h) * img.w * 3, ErrorCode::ShapeMismatch,
          "pixel buffer does not match image dimensions");
  require(tiles_x >= 1 && tiles_y >= 1, ErrorCode::InvalidArgument,
          "tile counts must be at least 1");
  require(tiles_x <= img.w && tiles_y <= img.h, ErrorCode::InvalidArgument,
          "tile larger than image");

  std::vector<std::array<uint8_t, 256>> maps;
  maps.reserve(static_cast<size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      std::array<double, 256> hist{};
      int y1 = tile_edge(ty + 1, tiles_y, img.h), x1 = tile_edge(tx + 1, tiles_x, img.w);
      for (int y = tile_edge(ty, tiles_y, img.h); y < y1; ++y)
        for (int x = tile_edge(tx, tiles_x, img.w); x < x1; ++x)
          hist[luma_bin(luma_of(img, y, x))] += 1.0;
      maps.push_back(equalize_histogram(hist, clip_limit));
    }
  return maps;
}

ImageU8 ahe(const ImageU8& img, int tiles_x, int tiles_y, double clip_limit) {
  auto maps = ahe_tile_maps(img, tiles_x, tiles_y, clip_limit);
  AxisBlend bx = axis_blend(tiles_x, img.w);
  AxisBlend by = axis_blend(tiles_y, img.h);

  auto map_at = [&](int ty, int tx, int bin) {
    return static_cast<double>(maps[static_cast<size_t>(ty) * tiles_x + tx][bin]);
  };

  ImageU8 out;
  out.h = img.h;
  out.w = img.w;
  out.px.resize(img.px.size());
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double luma = luma_of(img, y, x);
      int bin = luma_bin(luma);
      double top = (1.0 - bx.t[x]) * map_at(by.lo[y], bx.lo[x], bin) +
                   bx.t[x] * map_at(by.lo[y], bx.hi[x], bin);
      double bottom = (1.0 - bx.t[x]) * map_at(by.hi[y], bx.lo[x], bin) +
                      bx.t[x] * map_at(by.hi[y], bx.hi[x], bin);
      double mapped = (1.0 - by.t[y]) * top + by.t[y] * bottom;
      for (int c = 0; c < 3; ++c) {
        double v = luma > 0.0 ? img.at(y, x, c) * (mapped / luma) : mapped;
        out.at(y, x, c) = static_cast<uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
      }
    }
  return out;
}

}  // namespace enlighten
