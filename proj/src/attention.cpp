#include "enlighten/attention.hpp"

namespace enlighten {

GrayMap luminance(const Image& img) {
  require(img.range == Range::Unit, ErrorCode::InvalidArgument,
          "luminance expects a unit-range image");
  require(img.px.size() == static_cast<size_t>(img.h) * img.w * 3, ErrorCode::InvalidArgument,
          "luminance expects a 3-channel image");
  GrayMap out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return out;
}

AttentionMap attention_map(const Image& img) {
  GrayMap lum = luminance(img);
  for (double& v : lum.v) v = 1.0 - v;
  return lum;
}

AttentionMap resize_attention(const AttentionMap& map, int h, int w) {
  return bilinear_resize(map, h, w);
}

}  // namespace enlighten
