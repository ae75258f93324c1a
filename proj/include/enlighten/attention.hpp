#pragma once

#include "enlighten/image.hpp"

namespace enlighten {

// Illumination map used for self-regularized attention.
using AttentionMap = GrayMap;

// Rec.601 luma of a unit-range image: 0.299 R + 0.587 G + 0.114 B.
GrayMap luminance(const Image& img);

// 1 - luminance; dark pixels get weights near 1.
AttentionMap attention_map(const Image& img);

// Corner-aligned bilinear resampling to a feature-map resolution.
AttentionMap resize_attention(const AttentionMap& map, int h, int w);

}  // namespace enlighten
