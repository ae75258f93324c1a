#include "enlighten/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>

#include "interp.hpp"

namespace enlighten {

ImageU8 load_image_u8(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  require(!m.empty(), ErrorCode::Io, "cannot decode image: " + path);
  ImageU8 out;
  out.h = m.rows;
  out.w = m.cols;
  out.px.resize(static_cast<size_t>(out.h) * out.w * 3);
  for (int y = 0; y < out.h; ++y) {
    const uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < out.w; ++x) {
      // OpenCV decodes BGR
      out.at(y, x, 0) = row[3 * x + 2];
      out.at(y, x, 1) = row[3 * x + 1];
      out.at(y, x, 2) = row[3 * x + 0];
    }
  }
  return out;
}

void save_png(const std::string& path, const ImageU8& img) {
  require(img.h > 0 && img.w > 0, ErrorCode::InvalidArgument, "empty image");
  cv::Mat m(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < img.w; ++x) {
      row[3 * x + 0] = img.at(y, x, 2);
      row[3 * x + 1] = img.at(y, x, 1);
      row[3 * x + 2] = img.at(y, x, 0);
    }
  }
  require(cv::imwrite(path, m), ErrorCode::Io, "cannot write image: " + path);
}

Image to_unit(const ImageU8& img) {
  Image out;
  out.h = img.h;
  out.w = img.w;
  out.range = Range::Unit;
  out.px.resize(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) out.px[i] = img.px[i] / 255.0;
  return out;
}

ImageU8 to_u8(const Image& img) {
  ImageU8 out;
  out.h = img.h;
  out.w = img.w;
  out.px.resize(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) {
    double u = img.range == Range::Unit ? img.px[i] : (img.px[i] + 1.0) / 2.0;
    out.px[i] = static_cast<uint8_t>(std::clamp(std::lround(u * 255.0), 0l, 255l));
  }
  return out;
}

Image unit_to_signed(const Image& img) {
  require(img.range == Range::Unit, ErrorCode::InvalidArgument, "expected unit-range image");
  Image out = img;
  out.range = Range::Signed;
  for (double& v : out.px) v = 2.0 * v - 1.0;
  return out;
}

Image signed_to_unit(const Image& img) {
  require(img.range == Range::Signed, ErrorCode::InvalidArgument, "expected signed-range image");
  Image out = img;
  out.range = Range::Unit;
  for (double& v : out.px) v = (v + 1.0) / 2.0;
  return out;
}

double mean_intensity_u8(const ImageU8& img) {
  require(!img.px.empty(), ErrorCode::InvalidArgument, "empty image");
  double sum = 0;
  for (uint8_t v : img.px) sum += v;
  return sum / static_cast<double>(img.px.size());
}

using detail::Lerp;
using detail::lerp_at;

GrayMap bilinear_resize(const GrayMap& m, int oh, int ow) {
  require(oh >= 1 && ow >= 1, ErrorCode::InvalidArgument, "resize target must be positive");
  require(m.h >= 1 && m.w >= 1, ErrorCode::InvalidArgument, "empty source map");
  GrayMap out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    Lerp ly = lerp_at(y, oh, m.h);
    for (int x = 0; x < ow; ++x) {
      Lerp lx = lerp_at(x, ow, m.w);
      double top = m.at(ly.lo, lx.lo) * (1 - lx.t) + m.at(ly.lo, lx.hi) * lx.t;
      double bot = m.at(ly.hi, lx.lo) * (1 - lx.t) + m.at(ly.hi, lx.hi) * lx.t;
      out.at(y, x) = top * (1 - ly.t) + bot * ly.t;
    }
  }
  return out;
}

Image bilinear_resize(const Image& img, int oh, int ow) {
  require(oh >= 1 && ow >= 1, ErrorCode::InvalidArgument, "resize target must be positive");
  require(img.h >= 1 && img.w >= 1, ErrorCode::InvalidArgument, "empty source image");
  Image out;
  out.h = oh;
  out.w = ow;
  out.range = img.range;
  out.px.resize(static_cast<size_t>(oh) * ow * 3);
  for (int y = 0; y < oh; ++y) {
    Lerp ly = lerp_at(y, oh, img.h);
    for (int x = 0; x < ow; ++x) {
      Lerp lx = lerp_at(x, ow, img.w);
      for (int c = 0; c < 3; ++c) {
        double top = img.at(ly.lo, lx.lo, c) * (1 - lx.t) + img.at(ly.lo, lx.hi, c) * lx.t;
        double bot = img.at(ly.hi, lx.lo, c) * (1 - lx.t) + img.at(ly.hi, lx.hi, c) * lx.t;
        out.at(y, x, c) = top * (1 - ly.t) + bot * ly.t;
      }
    }
  }
  return out;
}

namespace {

// Symmetric fold of index i into [0, n); works for any pad width, n >= 1.
using detail::reflect_index;

}  // namespace

std::pair<Image, CropRecord> pad_to_multiple(const Image& img, int m) {
  require(m >= 1, ErrorCode::InvalidArgument, "pad multiple must be >= 1");
  require(img.h >= 1 && img.w >= 1, ErrorCode::InvalidArgument, "empty image");
  CropRecord rec{img.h, img.w};
  int nh = (img.h + m - 1) / m * m;
  int nw = (img.w + m - 1) / m * m;
  if (nh == img.h && nw == img.w) return {img, rec};
  Image out;
  out.h = nh;
  out.w = nw;
  out.range = img.range;
  out.px.resize(static_cast<size_t>(nh) * nw * 3);
  for (int y = 0; y < nh; ++y) {
    int sy = reflect_index(y, img.h);
    for (int x = 0; x < nw; ++x) {
      int sx = reflect_index(x, img.w);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return {out, rec};
}

Image crop_to_record(const Image& img, const CropRecord& rec) {
  return crop(img, 0, 0, rec.orig_h, rec.orig_w);
}

GrayMap flip_horizontal(const GrayMap& m) {
  GrayMap out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
  return out;
}

Image crop(const Image& img, int top, int left, int h, int w) {
  require(top >= 0 && left >= 0 && h >= 1 && w >= 1 && top + h <= img.h && left + w <= img.w,
          ErrorCode::InvalidArgument, "crop outside image bounds");
  Image out;
  out.h = h;
  out.w = w;
  out.range = img.range;
  out.px.resize(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
  return out;
}

}  // namespace enlighten
