#pragma once

#include "enlighten/image.hpp"
#include "enlighten/tensor.hpp"

namespace enlighten {

// Interleaved rasters <-> planar NCHW tensors (single image, N = 1).
Tensor image_to_tensor(const Image& img);
Tensor graymap_to_tensor(const GrayMap& m);
Image tensor_to_image(const Tensor& t, Range range);
GrayMap tensor_to_graymap(const Tensor& t);

}  // namespace enlighten
