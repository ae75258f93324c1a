#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enlighten/common.hpp"

namespace enlighten {

// Interleaved 8-bit RGB raster as decoded from disk.
struct ImageU8 {
  int h = 0, w = 0;
  std::vector<uint8_t> px;  // h*w*3, RGB

  uint8_t& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

enum class Range { Unit, Signed };  // [0,1] vs [-1,1]

// Real-valued RGB raster, the unit of enhancement.
struct Image {
  int h = 0, w = 0;
  Range range = Range::Unit;
  std::vector<double> px;  // h*w*3, RGB interleaved

  double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// Single-channel map (luminance, attention, MSCN fields, ...).
struct GrayMap {
  int h = 0, w = 0;
  std::vector<double> v;  // h*w

  GrayMap() = default;
  GrayMap(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}
  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

// Decode/encode via the system codec (PNG and JPEG accepted; PNG written).
ImageU8 load_image_u8(const std::string& path);
void save_png(const std::string& path, const ImageU8& img);

Image to_unit(const ImageU8& img);
ImageU8 to_u8(const Image& img);  // accepts either range, clamps to 8-bit

Image unit_to_signed(const Image& img);   // 2x - 1
Image signed_to_unit(const Image& img);   // (x + 1) / 2

// Mean over all pixels and channels on the 8-bit scale.
double mean_intensity_u8(const ImageU8& img);

// Corner-aligned bilinear resampling, shared by the attention path and the
// generator's upsampling so both interpolate on the same grid.
GrayMap bilinear_resize(const GrayMap& m, int oh, int ow);
Image bilinear_resize(const Image& img, int oh, int ow);

// Reflect-pads (symmetric, edge included) right/bottom so both dims are
// multiples of m. The crop record restores the original size afterwards.
struct CropRecord {
  int orig_h = 0, orig_w = 0;
};
std::pair<Image, CropRecord> pad_to_multiple(const Image& img, int m);
Image crop_to_record(const Image& img, const CropRecord& rec);

GrayMap flip_horizontal(const GrayMap& m);
Image flip_horizontal(const Image& img);
Image crop(const Image& img, int top, int left, int h, int w);

}  // namespace enlighten
