#pragma once

#include <array>
#include <vector>

#include "enlighten/image.hpp"

namespace enlighten {

// Monotone intensity remap for one 256-bin histogram: m(v) = round(255 *
// cdf(v)). A histogram with a single occupied bin maps to identity, so flat
// regions pass through unchanged. When clip_limit > 0, each bin is first
// capped at clip_limit times the uniform share (total / 256) and the excess
// is spread evenly over all bins, bounding contrast amplification.
std::array<uint8_t, 256> equalize_histogram(const std::array<double, 256>& hist,
                                            double clip_limit = 0.0);

// Per-tile remap tables for a tiles_y x tiles_x grid (row-major), built from
// the luma histogram of each tile. Exposed so the tile-level behavior can be
// inspected independently of the blended result.
std::vector<std::array<uint8_t, 256>> ahe_tile_maps(const ImageU8& img, int tiles_x, int tiles_y,
                                                    double clip_limit = 0.0);

// Adaptive histogram equalization of the luma channel with bilinear blending
// between the remap tables of neighboring tile centers; chroma is rescaled by
// the luma ratio so hues are preserved. clip_limit > 0 enables clipping.
ImageU8 ahe(const ImageU8& img, int tiles_x = 8, int tiles_y = 8, double clip_limit = 0.0);

}  // namespace enlighten
