#include "enlighten/convert.hpp"

namespace enlighten {

Tensor image_to_tensor(const Image& img) {
  require(img.h >= 1 && img.w >= 1, ErrorCode::InvalidArgument, "empty image");
  Shape4 s{1, 3, img.h, img.w};
  std::vector<double> v(static_cast<size_t>(s.numel()));
  int64_t plane = static_cast<int64_t>(img.h) * img.w;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c)
        v[static_cast<size_t>(c * plane + y * img.w + x)] = img.at(y, x, c);
  return Tensor::from_data(s, std::move(v));
}

Tensor graymap_to_tensor(const GrayMap& m) {
  require(m.h >= 1 && m.w >= 1, ErrorCode::InvalidArgument, "empty map");
  return Tensor::from_data({1, 1, m.h, m.w}, m.v);
}

Image tensor_to_image(const Tensor& t, Range range) {
  const Shape4& s = t.shape();
  require(s.n == 1 && s.c == 3, ErrorCode::ShapeMismatch,
          "expected a {1,3,h,w} tensor, got " + s.str());
  Image img;
  img.h = s.h;
  img.w = s.w;
  img.range = range;
  img.px.resize(static_cast<size_t>(s.h) * s.w * 3);
  int64_t plane = static_cast<int64_t>(s.h) * s.w;
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = t.data()[static_cast<size_t>(c * plane + y * s.w + x)];
  return img;
}

GrayMap tensor_to_graymap(const Tensor& t) {
  const Shape4& s = t.shape();
  require(s.n == 1 && s.c == 1, ErrorCode::ShapeMismatch,
          "expected a {1,1,h,w} tensor, got " + s.str());
  GrayMap m(s.h, s.w);
  m.v = t.data();
  return m;
}

}  // namespace enlighten
